//! Joint retirement planning of dual-earner couples: a bivariate ordered
//! choice with a joint-leisure externality, estimated by indirect inference
//! on 52 auxiliary moments.

mod estimate;
mod household;
mod moments;
mod plan;

pub use estimate::{
    estimate, gamma_sensitivity, parameter_table, RetirementEstimate, RetirementEstimateOptions,
};
pub use household::{
    read_households, spa_w, synthetic_population, write_households, Household, PopulationTargets,
    COVARIATE_NAMES,
};
pub use moments::{
    age_group, moment_labels, simulate_data, simulated_moments, DataStats, PlanDistribution,
    RetirementModel,
    RetirementSample, AGE_GROUPS, N_MOMENTS, N_REGRESSORS,
};
pub use plan::{flow_utility, independent_plan_probabilities, optimal_plan, plan_value, Member, PlanSolver, RetirementPlan};

use crate::error::{Error, Result};

/// Planned retirement ages considered.
pub const R_MIN: i32 = 50;
pub const R_MAX: i32 = 70;
pub const N_AGES: usize = (R_MAX - R_MIN + 1) as usize;

pub const N_COVARIATES: usize = 10;
pub const N_DELTA: usize = 5;
pub const N_PARAMS: usize = 2 + 2 * N_COVARIATES + 2 * N_DELTA + 2;

pub const DELTA_NAMES: [&str; N_DELTA] = ["constant", "trend", "age55", "age60", "age65"];

/// Model constants that the estimation treats as known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetirementSettings {
    pub rho: f64,
    pub t_max: i32,
    pub interview_year: i32,
    /// Simulation draws per household.
    pub s_sim: usize,
    /// Seed for the common random numbers behind simulated plans.
    pub sim_seed: u64,
}

impl Default for RetirementSettings {
    fn default() -> Self {
        Self {
            rho: 0.96,
            t_max: 80,
            interview_year: 2001,
            s_sim: 200,
            sim_seed: 1,
        }
    }
}

impl RetirementSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Invalid(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if self.t_max < R_MAX {
            return Err(Error::Invalid(format!("t_max must be at least {R_MAX}, got {}", self.t_max)));
        }
        if self.s_sim == 0 {
            return Err(Error::Invalid("s_sim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetirementParams {
    pub gamma: f64,
    pub alpha_spa: f64,
    pub beta_h: [f64; N_COVARIATES],
    pub beta_w: [f64; N_COVARIATES],
    pub delta_h: [f64; N_DELTA],
    pub delta_w: [f64; N_DELTA],
    pub sigma_w2: f64,
    pub sigma_hw: f64,
}

impl RetirementParams {
    /// Point estimates used as the synthetic truth.
    pub fn reference() -> Self {
        Self {
            gamma: 0.026,
            alpha_spa: 0.105,
            beta_h: [-0.129, 0.315, 0.091, 0.006, 0.194, 0.610, 0.005, 0.005, 0.074, 0.171],
            beta_w: [-0.148, 0.152, 0.001, 0.011, -0.005, -0.044, -0.005, 0.003, -0.005, 0.013],
            delta_h: [-2.413, 0.036, 0.632, 0.867, 1.978],
            delta_w: [-1.667, 0.020, 0.729, 1.323, 1.452],
            sigma_w2: 0.917,
            sigma_hw: 0.359,
        }
    }

    /// Layout: γ, α, β_h, β_w, δ_h, δ_w, σ_w², σ_hw.
    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        if theta.len() != N_PARAMS {
            return Err(Error::Dimension(format!(
                "retirement model has {N_PARAMS} parameters, got {}",
                theta.len()
            )));
        }
        let mut p = Self {
            gamma: theta[0],
            alpha_spa: theta[1],
            beta_h: [0.0; N_COVARIATES],
            beta_w: [0.0; N_COVARIATES],
            delta_h: [0.0; N_DELTA],
            delta_w: [0.0; N_DELTA],
            sigma_w2: theta[N_PARAMS - 2],
            sigma_hw: theta[N_PARAMS - 1],
        };
        let mut at = 2;
        for dst in [&mut p.beta_h[..], &mut p.beta_w[..], &mut p.delta_h[..], &mut p.delta_w[..]] {
            let len = dst.len();
            dst.copy_from_slice(&theta[at..at + len]);
            at += len;
        }
        Ok(p)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.gamma, self.alpha_spa];
        v.extend_from_slice(&self.beta_h);
        v.extend_from_slice(&self.beta_w);
        v.extend_from_slice(&self.delta_h);
        v.extend_from_slice(&self.delta_w);
        v.push(self.sigma_w2);
        v.push(self.sigma_hw);
        v
    }

    /// Lower Cholesky factor of `Ω = [[1, σ_hw], [σ_hw, σ_w²]]` as `(l21, l22)`.
    pub fn omega_factor(&self) -> Result<(f64, f64)> {
        let d = self.sigma_w2 - self.sigma_hw * self.sigma_hw;
        if !(d > 0.0) || !self.sigma_w2.is_finite() {
            return Err(Error::OmegaNotPd {
                sigma_w2: self.sigma_w2,
                sigma_hw: self.sigma_hw,
            });
        }
        Ok((self.sigma_hw, d.sqrt()))
    }

    /// Shock pair from two independent standard normals.
    pub fn shocks(&self, factor: (f64, f64), z: [f64; 2]) -> (f64, f64) {
        (z[0], factor.0 * z[0] + factor.1 * z[1])
    }
}

/// Labels in vector order.
pub fn param_labels() -> Vec<String> {
    let mut v = vec!["gamma".to_string(), "alpha_spa".to_string()];
    for who in ["h", "w"] {
        v.extend(COVARIATE_NAMES.iter().map(|c| format!("beta_{who}.{c}")));
    }
    for who in ["h", "w"] {
        v.extend(DELTA_NAMES.iter().map(|c| format!("delta_{who}.{c}")));
    }
    v.push("sigma_w2".into());
    v.push("sigma_hw".into());
    v
}

/// Step-size scale per parameter: coefficients on incomes, birth years and the
/// age trend multiply regressors that are an order of magnitude larger.
pub fn param_scales() -> Vec<f64> {
    let mut v = vec![0.1, 0.1];
    let beta = [0.1, 0.1, 0.1, 0.01, 0.1, 0.1, 0.01, 0.01, 0.1, 0.1];
    v.extend_from_slice(&beta);
    v.extend_from_slice(&beta);
    let delta = [0.1, 0.01, 0.1, 0.1, 0.1];
    v.extend_from_slice(&delta);
    v.extend_from_slice(&delta);
    v.push(0.1);
    v.push(0.1);
    v
}
