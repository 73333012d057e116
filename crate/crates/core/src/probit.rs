//! Probit with two correlated normal regressors and six score-type moments.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::Result;
use crate::estimation::{Dataset, MomentModel};
use crate::normal;
use crate::rng;

pub const PARAM_LABELS: [&str; 3] = ["beta0", "beta1", "beta2"];
pub const MOMENT_LABELS: [&str; 6] = ["e", "e*x1", "e*x2", "e*x1^2", "e*x1*x2", "e*x2^2"];

/// Correlation between the two regressors.
pub const RHO_X: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbitParams {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl ProbitParams {
    /// All three coefficients equal to `1/√3`, so the index has unit variance.
    pub fn truth() -> Self {
        let b = 1.0 / 3f64.sqrt();
        Self {
            beta0: b,
            beta1: b,
            beta2: b,
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.beta0, self.beta1, self.beta2]
    }

    pub fn index(&self, x1: f64, x2: f64) -> f64 {
        self.beta0 + self.beta1 * x1 + self.beta2 * x2
    }
}

/// How the binary outcome is read off the latent variable `y* = index + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutcomeRule {
    /// `y = 1{y* > 0}`. Consistent with `E[y | x] = Φ(index)` and the moments.
    #[default]
    Latent,
    /// `y = 1{y* ≤ 0}`, the reversed mapping.
    AsPrinted,
}

/// Simulates `n` rows at the true parameters with the latent-index outcome.
pub fn simulate_probit(n: usize, seed: u64) -> Dataset {
    simulate_probit_with(n, seed, ProbitParams::truth(), OutcomeRule::Latent)
}

pub fn simulate_probit_with(
    n: usize,
    seed: u64,
    params: ProbitParams,
    rule: OutcomeRule,
) -> Dataset {
    let c = (1.0 - RHO_X * RHO_X).sqrt();
    let rows: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let z1: f64 = StandardNormal.sample(&mut r);
            let z2: f64 = StandardNormal.sample(&mut r);
            let eps: f64 = StandardNormal.sample(&mut r);
            let x1 = z1;
            let x2 = RHO_X * z1 + c * z2;
            let positive = params.index(x1, x2) + eps > 0.0;
            let y = match rule {
                OutcomeRule::Latent => positive,
                OutcomeRule::AsPrinted => !positive,
            };
            [f64::from(u8::from(y)), x1, x2]
        })
        .collect();
    let column = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    Dataset::new(
        vec!["y".into(), "x1".into(), "x2".into()],
        vec![column(0), column(1), column(2)],
    )
    .expect("columns have equal length")
}

/// `f = e·(1, x₁, x₂, x₁², x₁x₂, x₂²)` with `e = y − Φ(β₀ + β₁x₁ + β₂x₂)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProbitModel;

impl MomentModel for ProbitModel {
    type Data = Dataset;

    fn n_moments(&self) -> usize {
        6
    }

    fn n_params(&self) -> usize {
        3
    }

    fn moment_labels(&self) -> Vec<String> {
        MOMENT_LABELS.iter().map(|s| s.to_string()).collect()
    }

    fn param_labels(&self) -> Vec<String> {
        PARAM_LABELS.iter().map(|s| s.to_string()).collect()
    }

    fn n_obs(&self, data: &Dataset) -> usize {
        data.n_rows()
    }

    fn check(&self, data: &Dataset, _theta: &[f64]) -> Result<()> {
        for c in ["y", "x1", "x2"] {
            data.column(c)?;
        }
        Ok(())
    }

    fn eval_rows(&self, data: &Dataset, theta: &[f64], start: usize, out: &mut [f64]) -> Result<()> {
        let y = data.column("y")?;
        let x1 = data.column("x1")?;
        let x2 = data.column("x2")?;
        let p = ProbitParams {
            beta0: theta[0],
            beta1: theta[1],
            beta2: theta[2],
        };
        for (i, row) in out.chunks_exact_mut(6).enumerate() {
            let r = start + i;
            let (a, b) = (x1[r], x2[r]);
            let e = y[r] - normal::cdf(p.index(a, b));
            row.copy_from_slice(&[e, e * a, e * b, e * a * a, e * a * b, e * b * b]);
        }
        Ok(())
    }
}

/// Per-observation moment matrix (n × 6).
pub fn probit_moments(data: &Dataset, theta: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
    crate::estimation::eval(&ProbitModel, data, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn single_row_at_zero() {
        let d = Dataset::new(
            vec!["y".into(), "x1".into(), "x2".into()],
            vec![vec![1.0], vec![0.0], vec![0.0]],
        )
        .unwrap();
        let m = probit_moments(&d, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_column_is_reported() {
        let d = Dataset::new(vec!["y".into(), "x1".into()], vec![vec![1.0], vec![0.0]]).unwrap();
        assert!(matches!(probit_moments(&d, &[0.0; 3]), Err(Error::MissingColumn(c)) if c == "x2"));
    }

    #[test]
    fn simulation_is_deterministic_and_seed_dependent() {
        let a = simulate_probit(500, 4);
        let b = simulate_probit(500, 4);
        let c = simulate_probit(500, 5);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn large_intercept_under_reversed_rule() {
        let p = ProbitParams {
            beta0: 10.0,
            beta1: 0.0,
            beta2: 0.0,
        };
        let d = simulate_probit_with(100_000, 1, p, OutcomeRule::AsPrinted);
        let mean = d.column("y").unwrap().iter().sum::<f64>() / 1e5;
        assert!(mean < 1e-4);
    }

    #[test]
    fn regressor_correlation() {
        let d = simulate_probit(200_000, 9);
        let x1 = d.column("x1").unwrap();
        let x2 = d.column("x2").unwrap();
        let n = x1.len() as f64;
        let c = x1.iter().zip(x2).map(|(a, b)| a * b).sum::<f64>() / n;
        assert!((c - 0.5).abs() < 0.01, "{c}");
    }
}
