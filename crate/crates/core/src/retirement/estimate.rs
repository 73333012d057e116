use nalgebra::{DMatrix, DVector};

use super::{moment_labels, param_labels, RetirementModel, RetirementSample, RetirementSettings};
use crate::error::Result;
use crate::estimation::{
    bootstrap_moment_variance, gmm_estimate, EstimateOptions, EstimateResult, JacobianScheme,
};
use crate::gmm::asymptotic_covariance;
use crate::sensitivity::{full_report, SensitivityReport};

#[derive(Debug, Clone, PartialEq)]
pub struct RetirementEstimateOptions {
    /// Bootstrap replications behind the diagonal weight.
    pub bootstrap_b: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_evals: usize,
    pub x_tol: f64,
    pub initial_step: f64,
    pub gauss_newton_iters: usize,
    /// Draws for a final polishing run from the best point; `None` skips it.
    pub final_s_sim: Option<usize>,
}

impl Default for RetirementEstimateOptions {
    fn default() -> Self {
        Self {
            bootstrap_b: 200,
            restarts: 2,
            seed: 0,
            max_evals: 150,
            x_tol: 1e-4,
            initial_step: 0.1,
            gauss_newton_iters: 3,
            final_s_sim: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetirementEstimate {
    pub result: EstimateResult,
    /// Settings of the run that produced `result`.
    pub settings: RetirementSettings,
    /// Bootstrap variances (times n) whose inverses form the diagonal weight.
    pub moment_variance: DVector<f64>,
    /// Finite-sample covariance of `θ̂`, i.e. the asymptotic `Σ / n`.
    pub covariance: DMatrix<f64>,
    pub n_households: usize,
}

impl RetirementEstimate {
    pub fn std_errors(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    /// Two-sided 95% interval for parameter `k`.
    pub fn confidence_interval(&self, k: usize) -> (f64, f64) {
        let se = self.std_errors()[k];
        let t = self.result.theta_hat[k];
        (t - 1.959_963_984_540_054 * se, t + 1.959_963_984_540_054 * se)
    }
}

/// Indirect-inference estimate with a bootstrap diagonal weight computed at `theta_start`.
pub fn estimate(
    sample: &RetirementSample,
    settings: &RetirementSettings,
    theta_start: &[f64],
    opts: &RetirementEstimateOptions,
) -> Result<RetirementEstimate> {
    settings.validate()?;
    let model = RetirementModel::new(*settings, sample.len());
    let var = bootstrap_moment_variance(&model, sample, theta_start, opts.bootstrap_b, opts.seed)?;
    let w = DMatrix::from_diagonal(&var.map(|v| 1.0 / v));
    let gmm_opts = EstimateOptions {
        restarts: opts.restarts,
        seed: opts.seed,
        max_evals: opts.max_evals,
        x_tol: opts.x_tol,
        f_tol: 1e-12,
        initial_step: opts.initial_step,
        jacobian: JacobianScheme::Simulated,
        gauss_newton_iters: opts.gauss_newton_iters,
    };
    let mut result = gmm_estimate(&model, sample, &w, theta_start, &gmm_opts)?;
    let mut used = *settings;
    if let Some(s) = opts.final_s_sim.filter(|s| *s != settings.s_sim) {
        used.s_sim = s;
        let fine = RetirementModel::new(used, sample.len());
        let polish = EstimateOptions {
            restarts: 1,
            initial_step: opts.initial_step * 0.2,
            ..gmm_opts
        };
        let evals = result.n_evals;
        result = gmm_estimate(&fine, sample, &w, &result.theta_hat, &polish)?;
        result.n_evals += evals;
    }
    let n = sample.len();
    // Coefficients on incomes and trends move the moments hundreds of times
    // more per unit than the dummies do, so the bread is inverted in
    // equilibrated units and mapped back.
    let d = DVector::from_vec(result.ingredients.equilibrating_scales());
    let sigma_eq = asymptotic_covariance(&result.ingredients.rescaled(d.as_slice())?)?.sigma;
    let covariance = sigma_eq.component_mul(&(&d * d.transpose())) / n as f64;
    Ok(RetirementEstimate {
        result,
        settings: used,
        moment_variance: var,
        covariance,
        n_households: n,
    })
}

/// Sensitivity measures for `γ` against each of the 52 moments.
pub fn gamma_sensitivity(est: &RetirementEstimate) -> Result<SensitivityReport> {
    let ing = &est.result.ingredients;
    let d = ing.equilibrating_scales();
    Ok(full_report(&ing.rescaled(&d)?, &param_labels(), &moment_labels())?
        .unscaled(&d)
        .row(0))
}

/// `(label, estimate, standard error)` in parameter order.
pub fn parameter_table(est: &RetirementEstimate) -> Vec<(String, f64, f64)> {
    param_labels()
        .into_iter()
        .zip(&est.result.theta_hat)
        .zip(est.std_errors())
        .map(|((l, t), s)| (l, *t, s))
        .collect()
}
