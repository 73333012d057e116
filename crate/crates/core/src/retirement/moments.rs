use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{
    param_labels, param_scales, Household, PlanSolver, RetirementParams, RetirementSettings,
    N_PARAMS,
};
use crate::error::{Error, Result};
use crate::estimation::{mean_moments, MomentModel};
use crate::rng;

pub const N_MOMENTS: usize = 52;
/// Regressors in the auxiliary OLS: constant, seven own covariates per
/// member, two wife-cohort dummies.
pub const N_REGRESSORS: usize = 17;

/// Planned-retirement age groups (inclusive bounds).
pub const AGE_GROUPS: [(i32, i32); 6] = [(50, 54), (55, 55), (56, 59), (60, 60), (61, 64), (65, 65)];

const SIM_TAG: u64 = 0x5111;
const DATA_TAG: u64 = 0xda7a;

// Offsets of the four moment blocks, in reporting order.
const REG: usize = 0;
const SHARES: usize = 2 * N_REGRESSORS;
const RESID: usize = SHARES + 12;
const GAPS: usize = RESID + 3;

pub fn age_group(r: i32) -> Option<usize> {
    AGE_GROUPS.iter().position(|(lo, hi)| (*lo..=*hi).contains(&r))
}

/// [`age_group`] for each grid age, with `usize::MAX` for none.
fn group_table() -> [usize; super::N_AGES] {
    std::array::from_fn(|k| age_group(super::R_MIN + k as i32).unwrap_or(usize::MAX))
}

/// Calendar-gap indicators for `C_h − C_w ∈ {−2,−1}`, `∈ {1,2}`, `= 0`.
fn gap_dummies(gap: i32) -> [f64; 3] {
    let b = |c: bool| f64::from(u8::from(c));
    [b(gap == -2 || gap == -1), b(gap == 1 || gap == 2), b(gap == 0)]
}

fn regressors(hh: &Household) -> [f64; N_REGRESSORS] {
    let mut x = [0.0; N_REGRESSORS];
    x[0] = 1.0;
    x[1..8].copy_from_slice(&hh.x_h[..7]);
    x[8..15].copy_from_slice(&hh.x_w[..7]);
    x[15] = f64::from(u8::from(hh.cohort_w > 1950 && hh.cohort_w <= 1954));
    x[16] = f64::from(u8::from(hh.cohort_w >= 1955));
    x
}

pub fn moment_labels() -> Vec<String> {
    let mut xs = vec!["constant".to_string()];
    for who in ["h", "w"] {
        xs.extend(super::COVARIATE_NAMES[..7].iter().map(|c| format!("{c}_{who}")));
    }
    xs.push("cohort_w_1951_1954".into());
    xs.push("cohort_w_1955_plus".into());
    let mut v = Vec::with_capacity(N_MOMENTS);
    for who in ["h", "w"] {
        v.extend(xs.iter().map(|x| format!("reg_{who}.{x}")));
    }
    for who in ["h", "w"] {
        v.extend(AGE_GROUPS.iter().map(|(lo, hi)| {
            if lo == hi {
                format!("share_{who}.{lo}")
            } else {
                format!("share_{who}.{lo}-{hi}")
            }
        }));
    }
    v.extend(["var_e_h", "var_e_w", "cov_e_hw", "gap_-2_-1", "gap_1_2", "joint"].map(String::from));
    v
}

/// Data-side statistics fixed before estimation: auxiliary OLS fits and residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct DataStats {
    pub x: Vec<[f64; N_REGRESSORS]>,
    pub beta_h: [f64; N_REGRESSORS],
    pub beta_w: [f64; N_REGRESSORS],
    pub e_h: Vec<f64>,
    pub e_w: Vec<f64>,
}

impl DataStats {
    pub fn compute(households: &[Household], r_h: &[i32], r_w: &[i32]) -> Result<Self> {
        let n = households.len();
        if r_h.len() != n || r_w.len() != n {
            return Err(Error::Dimension(format!(
                "{n} households but {} / {} planned ages",
                r_h.len(),
                r_w.len()
            )));
        }
        let x: Vec<[f64; N_REGRESSORS]> = households.iter().map(regressors).collect();
        let xm = DMatrix::from_fn(n, N_REGRESSORS, |i, k| x[i][k]);
        let xtx = xm.transpose() * &xm;
        let chol = xtx.cholesky().ok_or_else(|| {
            Error::Invalid("auxiliary regressors are collinear in this sample".into())
        })?;
        let fit = |r: &[i32]| -> [f64; N_REGRESSORS] {
            let y = DVector::from_iterator(n, r.iter().map(|v| f64::from(*v)));
            let b = chol.solve(&(xm.transpose() * y));
            b.as_slice().try_into().expect("regressor count")
        };
        let beta_h = fit(r_h);
        let beta_w = fit(r_w);
        let resid = |r: &[i32], b: &[f64; N_REGRESSORS]| -> Vec<f64> {
            x.iter()
                .zip(r)
                .map(|(xi, ri)| f64::from(*ri) - xi.iter().zip(b).map(|(a, c)| a * c).sum::<f64>())
                .collect()
        };
        let e_h = resid(r_h, &beta_h);
        let e_w = resid(r_w, &beta_w);
        Ok(Self {
            x,
            beta_h,
            beta_w,
            e_h,
            e_w,
        })
    }
}

/// Observed households with their planned ages and data-side statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RetirementSample {
    pub households: Vec<Household>,
    pub r_h: Vec<i32>,
    pub r_w: Vec<i32>,
    pub stats: DataStats,
}

impl RetirementSample {
    pub fn new(households: Vec<Household>, r_h: Vec<i32>, r_w: Vec<i32>) -> Result<Self> {
        let stats = DataStats::compute(&households, &r_h, &r_w)?;
        Ok(Self {
            households,
            r_h,
            r_w,
            stats,
        })
    }

    pub fn len(&self) -> usize {
        self.households.len()
    }

    pub fn is_empty(&self) -> bool {
        self.households.is_empty()
    }
}

/// One planned-age pair per household, drawn at `params` with its own shocks.
pub fn simulate_data(
    households: &[Household],
    params: &RetirementParams,
    settings: &RetirementSettings,
    seed: u64,
) -> Result<(Vec<i32>, Vec<i32>)> {
    settings.validate()?;
    let factor = params.omega_factor()?;
    let data_seed = rng::derive_seed(seed, DATA_TAG);
    let plans: Vec<(i32, i32)> = households
        .par_iter()
        .enumerate()
        .map(|(i, hh)| {
            let mut r = rng::stream(data_seed, i as u64);
            let z = [StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)];
            let (eh, ew) = params.shocks(factor, z);
            let plan = PlanSolver::new(hh, params, settings.rho, settings.t_max).solve(eh, ew);
            (plan.r_h, plan.r_w)
        })
        .collect();
    Ok(plans.into_iter().unzip())
}

/// Indirect-inference moments: simulated plans are compared with the data
/// through the 52 auxiliary statistics, reusing the same standard-normal
/// draws for every parameter value.
#[derive(Debug, Clone)]
pub struct RetirementModel {
    settings: RetirementSettings,
    n_households: usize,
    /// `s_sim` pairs of standard normals per household, household-major.
    draws: Vec<[f64; 2]>,
}

impl RetirementModel {
    pub fn new(settings: RetirementSettings, n_households: usize) -> Self {
        let s = settings.s_sim;
        let seed = rng::derive_seed(settings.sim_seed, SIM_TAG);
        let draws = (0..n_households)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut r = rng::stream(seed, i as u64);
                (0..s)
                    .map(|_| [StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)])
                    .collect::<Vec<_>>()
            })
            .collect();
        Self {
            settings,
            n_households,
            draws,
        }
    }

    pub fn settings(&self) -> &RetirementSettings {
        &self.settings
    }

    fn household_row(
        &self,
        sample: &RetirementSample,
        i: usize,
        p: &RetirementParams,
        factor: (f64, f64),
        row: &mut [f64],
    ) {
        let hh = &sample.households[i];
        let st = &sample.stats;
        let x = &st.x[i];
        let fit = |b: &[f64; N_REGRESSORS]| x.iter().zip(b).map(|(a, c)| a * c).sum::<f64>();
        let (fit_h, fit_w) = (fit(&st.beta_h), fit(&st.beta_w));
        let solver = PlanSolver::new(hh, p, self.settings.rho, self.settings.t_max);

        let s = self.settings.s_sim;
        let groups = group_table();
        let mut sum_e = [0.0; 2];
        let mut sum_sq = [0.0; 3];
        let mut shares = [0.0; 12];
        let mut gaps = [0.0; 3];
        for z in &self.draws[i * s..(i + 1) * s] {
            let (eh, ew) = p.shocks(factor, *z);
            let plan = solver.solve(eh, ew);
            let e_h = f64::from(plan.r_h) - fit_h;
            let e_w = f64::from(plan.r_w) - fit_w;
            sum_e[0] += e_h;
            sum_e[1] += e_w;
            sum_sq[0] += e_h * e_h;
            sum_sq[1] += e_w * e_w;
            sum_sq[2] += e_h * e_w;
            let gh = groups[(plan.r_h - super::R_MIN) as usize];
            if gh != usize::MAX {
                shares[gh] += 1.0;
            }
            let gw = groups[(plan.r_w - super::R_MIN) as usize];
            if gw != usize::MAX {
                shares[6 + gw] += 1.0;
            }
            match plan.calendar_gap(hh) {
                -2 | -1 => gaps[0] += 1.0,
                1 | 2 => gaps[1] += 1.0,
                0 => gaps[2] += 1.0,
                _ => {}
            }
        }
        let sf = s as f64;
        let (dh, dw) = (st.e_h[i], st.e_w[i]);
        // The data residuals are orthogonal to `x`, so subtracting them
        // leaves the mean at the simulated-residual moment while carrying
        // the data noise into each household's contribution.
        for k in 0..N_REGRESSORS {
            row[REG + k] = x[k] * (sum_e[0] / sf - dh);
            row[REG + N_REGRESSORS + k] = x[k] * (sum_e[1] / sf - dw);
        }
        let mut data_shares = [0.0; 12];
        if let Some(g) = age_group(sample.r_h[i]) {
            data_shares[g] = 1.0;
        }
        if let Some(g) = age_group(sample.r_w[i]) {
            data_shares[6 + g] = 1.0;
        }
        for k in 0..12 {
            row[SHARES + k] = data_shares[k] - shares[k] / sf;
        }
        row[RESID] = dh * dh - sum_sq[0] / sf;
        row[RESID + 1] = dw * dw - sum_sq[1] / sf;
        row[RESID + 2] = dh * dw - sum_sq[2] / sf;
        let data_gap = (hh.cohort_h + sample.r_h[i]) - (hh.cohort_w + sample.r_w[i]);
        for (k, d) in gap_dummies(data_gap).into_iter().enumerate() {
            row[GAPS + k] = d - gaps[k] / sf;
        }
    }
}

impl MomentModel for RetirementModel {
    type Data = RetirementSample;

    fn n_moments(&self) -> usize {
        N_MOMENTS
    }

    fn n_params(&self) -> usize {
        N_PARAMS
    }

    fn moment_labels(&self) -> Vec<String> {
        moment_labels()
    }

    fn param_labels(&self) -> Vec<String> {
        param_labels()
    }

    fn n_obs(&self, data: &RetirementSample) -> usize {
        data.len()
    }

    fn check(&self, data: &RetirementSample, theta: &[f64]) -> Result<()> {
        self.settings.validate()?;
        if data.len() != self.n_households {
            return Err(Error::Dimension(format!(
                "simulation draws prepared for {} households, sample has {}",
                self.n_households,
                data.len()
            )));
        }
        RetirementParams::from_slice(theta)?.omega_factor()?;
        Ok(())
    }

    fn eval_rows(
        &self,
        data: &RetirementSample,
        theta: &[f64],
        start: usize,
        out: &mut [f64],
    ) -> Result<()> {
        let p = RetirementParams::from_slice(theta)?;
        let factor = p.omega_factor()?;
        for (k, row) in out.chunks_exact_mut(N_MOMENTS).enumerate() {
            self.household_row(data, start + k, &p, factor, row);
        }
        Ok(())
    }

    fn param_scales(&self) -> Vec<f64> {
        param_scales()
    }
}

/// Shares of planned ages (grid order) and of calendar gaps `C_h − C_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanDistribution {
    pub r_h: [f64; super::N_AGES],
    pub r_w: [f64; super::N_AGES],
    /// `(gap, share)` sorted by gap.
    pub gaps: Vec<(i32, f64)>,
}

impl PlanDistribution {
    fn from_plans<'a>(plans: impl Iterator<Item = (&'a Household, i32, i32)>) -> Self {
        let mut r_h = [0.0; super::N_AGES];
        let mut r_w = [0.0; super::N_AGES];
        let mut gaps = std::collections::BTreeMap::<i32, f64>::new();
        let mut count = 0.0;
        for (hh, rh, rw) in plans {
            r_h[(rh - super::R_MIN) as usize] += 1.0;
            r_w[(rw - super::R_MIN) as usize] += 1.0;
            *gaps.entry((hh.cohort_h + rh) - (hh.cohort_w + rw)).or_default() += 1.0;
            count += 1.0;
        }
        for v in r_h.iter_mut().chain(r_w.iter_mut()).chain(gaps.values_mut()) {
            *v /= count;
        }
        Self {
            r_h,
            r_w,
            gaps: gaps.into_iter().collect(),
        }
    }

    /// Observed plans of a sample.
    pub fn observed(sample: &RetirementSample) -> Self {
        Self::from_plans(
            sample
                .households
                .iter()
                .zip(sample.r_h.iter().zip(&sample.r_w))
                .map(|(h, (a, b))| (h, *a, *b)),
        )
    }
}

impl RetirementModel {
    /// Distribution of simulated plans over all households and draws.
    pub fn plan_distribution(&self, sample: &RetirementSample, params: &RetirementParams) -> Result<PlanDistribution> {
        if sample.len() != self.n_households {
            return Err(Error::Dimension(format!(
                "model built for {} households, sample has {}",
                self.n_households,
                sample.len()
            )));
        }
        let factor = params.omega_factor()?;
        let s = self.settings.s_sim;
        let plans: Vec<(usize, i32, i32)> = (0..sample.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let solver = PlanSolver::new(&sample.households[i], params, self.settings.rho, self.settings.t_max);
                self.draws[i * s..(i + 1) * s]
                    .iter()
                    .map(|z| {
                        let (eh, ew) = params.shocks(factor, *z);
                        let p = solver.solve(eh, ew);
                        (i, p.r_h, p.r_w)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(PlanDistribution::from_plans(
            plans.into_iter().map(|(i, a, b)| (&sample.households[i], a, b)),
        ))
    }
}

/// `g(θ)` for a sample under the given settings.
pub fn simulated_moments(
    sample: &RetirementSample,
    params: &RetirementParams,
    settings: &RetirementSettings,
) -> Result<DVector<f64>> {
    let model = RetirementModel::new(*settings, sample.len());
    mean_moments(&model, sample, &params.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retirement::{synthetic_population, PopulationTargets};

    #[test]
    fn labels_and_groups() {
        let l = moment_labels();
        assert_eq!(l.len(), N_MOMENTS);
        assert_eq!(l[0], "reg_h.constant");
        assert_eq!(l[34], "share_h.50-54");
        assert_eq!(l[46], "var_e_h");
        assert_eq!(l[51], "joint");
        assert_eq!(age_group(52), Some(0));
        assert_eq!(age_group(60), Some(3));
        assert_eq!(age_group(66), None);
        assert_eq!(gap_dummies(-2), [1.0, 0.0, 0.0]);
        assert_eq!(gap_dummies(0), [0.0, 0.0, 1.0]);
        assert_eq!(gap_dummies(3), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn ols_residuals_are_orthogonal() {
        let pop = synthetic_population(500, 1, &PopulationTargets::default(), 2001);
        let p = RetirementParams::reference();
        let settings = RetirementSettings::default();
        let (rh, rw) = simulate_data(&pop, &p, &settings, 3).unwrap();
        let st = DataStats::compute(&pop, &rh, &rw).unwrap();
        for k in 0..N_REGRESSORS {
            let s: f64 = st.x.iter().zip(&st.e_h).map(|(x, e)| x[k] * e).sum();
            assert!(s.abs() < 1e-6, "{k}: {s}");
        }
    }

    #[test]
    fn omega_checked() {
        let pop = synthetic_population(100, 1, &PopulationTargets::default(), 2001);
        let settings = RetirementSettings {
            s_sim: 5,
            ..Default::default()
        };
        let p = RetirementParams::reference();
        let (rh, rw) = simulate_data(&pop, &p, &settings, 3).unwrap();
        let sample = RetirementSample::new(pop, rh, rw).unwrap();
        let mut bad = p;
        bad.sigma_w2 = bad.sigma_hw * bad.sigma_hw;
        assert!(matches!(
            simulated_moments(&sample, &bad, &settings),
            Err(Error::OmegaNotPd { .. })
        ));
    }
}
