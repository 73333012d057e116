//! Mixed proportional hazard model with a Weibull baseline and a covariate
//! that changes value at `s = 1` and `s = 2`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{Dataset, MomentModel};
use crate::rng;

pub const PARAM_LABELS: [&str; 4] = ["b0", "b1", "b2", "alpha"];
pub const MOMENT_LABELS: [&str; 5] = ["e", "e*x1", "e*x21", "e*x22", "e*x23"];
pub const COLUMNS: [&str; 6] = ["T", "x1", "x21", "x22", "x23", "eta"];

/// Euler's constant to ten significant digits.
pub const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Integrated hazards below this are treated as an underflow.
const HAZARD_FLOOR: f64 = 1e-300;

/// `θ = (b0, b1, b2, α)` with `b_j = β_j / α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullParams {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub alpha: f64,
}

impl WeibullParams {
    pub fn from_slice(theta: &[f64]) -> Self {
        Self {
            b0: theta[0],
            b1: theta[1],
            b2: theta[2],
            alpha: theta[3],
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.b0, self.b1, self.b2, self.alpha]
    }

    /// Parameters at which the moments hold under [`WeibullDesign::default`].
    pub fn truth() -> Self {
        WeibullDesign::default().theta()
    }
}

/// One spell with its covariate path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpellRecord {
    pub t: f64,
    pub x1: f64,
    /// Levels of the time-varying covariate on `[0,1)`, `[1,2)`, `[2,∞)`.
    pub x2: [f64; 3],
}

/// `log(t^α − c^α)` for `t > c > 0`, without cancellation near `t = c`.
fn log_pow_diff(t: f64, c: f64, alpha: f64) -> f64 {
    let lt = alpha * t.ln();
    let r = alpha * (c.ln() - t.ln());
    lt + (-r.exp_m1()).ln()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `log ∫₀ᵗ α s^{α−1} exp(β₁x₁ + β₂x₂(s)) ds`.
pub fn log_integrated_hazard(t: f64, rec: &SpellRecord, beta: [f64; 2], alpha: f64) -> f64 {
    let lin = |s: usize| beta[0] * rec.x1 + beta[1] * rec.x2[s];
    let mut terms = [f64::NEG_INFINITY; 3];
    terms[0] = lin(0) + alpha * t.min(1.0).ln();
    if t > 1.0 {
        terms[1] = lin(1) + log_pow_diff(t.min(2.0), 1.0, alpha);
    }
    if t > 2.0 {
        terms[2] = lin(2) + log_pow_diff(t, 2.0, alpha);
    }
    log_sum_exp(&terms)
}

/// `∫₀ᵗ α s^{α−1} exp(β₁x₁ + β₂x₂(s)) ds` in closed form.
pub fn integrated_hazard(t: f64, rec: &SpellRecord, beta: [f64; 2], alpha: f64) -> f64 {
    log_integrated_hazard(t, rec, beta, alpha).exp()
}

/// Data-generating process. The hazard is
/// `η · α s^{α−1} · exp(β₀ + β₁x₁ + β₂x₂(s))` with `log η ~ N(0, log_eta_var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullDesign {
    pub beta: [f64; 3],
    pub alpha: f64,
    pub log_eta_var: f64,
    /// When false all covariates are zero.
    pub covariates: bool,
}

impl Default for WeibullDesign {
    fn default() -> Self {
        let b = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            beta: [-1.0, b, b],
            alpha: 2.0,
            log_eta_var: 0.5,
            covariates: true,
        }
    }
}

impl WeibullDesign {
    /// The moment parameters implied by the design. `E[log η] = 0`, so the
    /// hazard intercept carries over directly as `b0 = β₀/α`.
    pub fn theta(&self) -> WeibullParams {
        WeibullParams {
            b0: self.beta[0] / self.alpha,
            b1: self.beta[1] / self.alpha,
            b2: self.beta[2] / self.alpha,
            alpha: self.alpha,
        }
    }

    fn draw(&self, seed: u64, i: u64) -> (SpellRecord, f64) {
        let mut r = rng::stream(seed, i);
        let mut z = [0.0; 4];
        for v in &mut z {
            *v = StandardNormal.sample(&mut r);
        }
        let zeta: f64 = StandardNormal.sample(&mut r);
        let e = -rng::open_unit(&mut r).ln();

        let (x1, x2) = if self.covariates {
            let x21 = z[1];
            let x22 = (x21 + z[2]) * std::f64::consts::FRAC_1_SQRT_2;
            let x23 = (x22 + z[3]) * std::f64::consts::FRAC_1_SQRT_2;
            (z[0], [x21, x22, x23])
        } else {
            (0.0, [0.0; 3])
        };
        let log_eta = zeta * self.log_eta_var.sqrt();
        let a = self.alpha;
        let lc = |s: usize| self.beta[0] + self.beta[1] * x1 + self.beta[2] * x2[s] + log_eta;

        // Invert η·Λ(T) = E one segment at a time.
        let le = e.ln();
        let t = if le <= lc(0) {
            ((le - lc(0)) / a).exp()
        } else {
            let rem = e - lc(0).exp();
            let cap2 = lc(1).exp() * (2f64.powf(a) - 1.0);
            if rem <= cap2 {
                (1.0 + rem / lc(1).exp()).powf(1.0 / a)
            } else {
                let rem3 = rem - cap2;
                (2f64.powf(a) + rem3 / lc(2).exp()).powf(1.0 / a)
            }
        };
        (SpellRecord { t, x1, x2 }, log_eta.exp())
    }
}

/// Simulates `n` spells from the default design.
pub fn simulate_weibull(n: usize, seed: u64) -> Dataset {
    simulate_weibull_with(n, seed, &WeibullDesign::default())
}

pub fn simulate_weibull_with(n: usize, seed: u64, design: &WeibullDesign) -> Dataset {
    let rows: Vec<(SpellRecord, f64)> = (0..n)
        .into_par_iter()
        .map(|i| design.draw(seed, i as u64))
        .collect();
    let mut cols = vec![Vec::with_capacity(n); COLUMNS.len()];
    for (rec, eta) in &rows {
        for (c, v) in cols
            .iter_mut()
            .zip([rec.t, rec.x1, rec.x2[0], rec.x2[1], rec.x2[2], *eta])
        {
            c.push(v);
        }
    }
    Dataset::new(COLUMNS.iter().map(|s| s.to_string()).collect(), cols)
        .expect("columns have equal length")
}

/// Reads spell `i` back out of a dataset's columns.
fn record(cols: &[&[f64]; 5], i: usize) -> SpellRecord {
    SpellRecord {
        t: cols[0][i],
        x1: cols[1][i],
        x2: [cols[2][i], cols[3][i], cols[4][i]],
    }
}

/// Generalized residual `r = log Λ(T) + α·b0 + γ` interacted with
/// `(1, x₁, x₂₁, x₂₂, x₂₃)`, where `Λ` uses `β = α·(b1, b2)` and no intercept.
#[derive(Debug, Clone, Copy, Default)]
pub struct WeibullModel;

impl MomentModel for WeibullModel {
    type Data = Dataset;

    fn n_moments(&self) -> usize {
        5
    }

    fn n_params(&self) -> usize {
        4
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

    fn check(&self, data: &Dataset, theta: &[f64]) -> Result<()> {
        for c in &COLUMNS[..5] {
            data.column(c)?;
        }
        if let Some(i) = data.column("T")?.iter().position(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Invalid(format!("duration at row {} is not positive and finite", i + 1)));
        }
        if !(theta[3] > 0.0) {
            return Err(Error::Invalid(format!("alpha must be positive, got {}", theta[3])));
        }
        Ok(())
    }

    fn eval_rows(&self, data: &Dataset, theta: &[f64], start: usize, out: &mut [f64]) -> Result<()> {
        let cols = [
            data.column("T")?,
            data.column("x1")?,
            data.column("x21")?,
            data.column("x22")?,
            data.column("x23")?,
        ];
        let p = WeibullParams::from_slice(theta);
        let beta = [p.alpha * p.b1, p.alpha * p.b2];
        let floor = HAZARD_FLOOR.ln();
        for (i, row) in out.chunks_exact_mut(5).enumerate() {
            let rec = record(&cols, start + i);
            let lh = log_integrated_hazard(rec.t, &rec, beta, p.alpha);
            if !(lh >= floor) || !lh.is_finite() {
                return Err(Error::NonFinite(format!(
                    "integrated hazard underflow at row {}",
                    start + i + 1
                )));
            }
            let r = lh + p.alpha * p.b0 + EULER_GAMMA;
            row.copy_from_slice(&[r, r * rec.x1, r * rec.x2[0], r * rec.x2[1], r * rec.x2[2]]);
        }
        Ok(())
    }
}

/// Median and tail shares of simulated durations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationSummary {
    pub median: f64,
    pub below_1: f64,
    pub above_2: f64,
}

pub fn duration_summary(t: &[f64]) -> DurationSummary {
    let mut s = t.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len();
    let median = match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => s[n / 2],
        _ => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    };
    let share = |f: &dyn Fn(f64) -> bool| s.iter().filter(|v| f(**v)).count() as f64 / n as f64;
    DurationSummary {
        median,
        below_1: share(&|v| v < 1.0),
        above_2: share(&|v| v > 2.0),
    }
}

/// Per-observation moment matrix (n × 5).
pub fn weibull_moments(data: &Dataset, theta: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
    crate::estimation::eval(&WeibullModel, data, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_record(t: f64) -> SpellRecord {
        SpellRecord {
            t,
            x1: 0.0,
            x2: [0.0; 3],
        }
    }

    #[test]
    fn closed_form_special_cases() {
        for t in [0.3, 1.0, 1.7, 2.0, 5.5] {
            assert!((integrated_hazard(t, &zero_record(t), [0.0, 0.0], 1.0) - t).abs() < 1e-14 * t.max(1.0));
        }
        assert!((integrated_hazard(2.0, &zero_record(2.0), [0.0, 0.0], 2.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn segment_boundaries_are_continuous() {
        let rec = SpellRecord {
            t: 0.0,
            x1: 0.3,
            x2: [-1.0, 0.5, 2.0],
        };
        for c in [1.0, 2.0] {
            let lo = integrated_hazard(c * (1.0 - 1e-12), &rec, [0.7, 0.4], 1.8);
            let hi = integrated_hazard(c * (1.0 + 1e-12), &rec, [0.7, 0.4], 1.8);
            assert!((lo - hi).abs() < 1e-9 * lo);
        }
    }

    #[test]
    fn unit_spell_at_zero_parameters() {
        let d = Dataset::new(
            COLUMNS[..5].iter().map(|s| s.to_string()).collect(),
            vec![vec![1.0], vec![0.0], vec![0.0], vec![0.0], vec![0.0]],
        )
        .unwrap();
        let m = weibull_moments(&d, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![EULER_GAMMA, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn nonpositive_alpha_rejected() {
        let d = simulate_weibull(10, 1);
        assert!(weibull_moments(&d, &[0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn simulated_spells_invert_the_hazard() {
        let design = WeibullDesign::default();
        for i in 0..200 {
            let (rec, eta) = design.draw(7, i);
            let lin = design.beta[0];
            let h = integrated_hazard(rec.t, &rec, [design.beta[1], design.beta[2]], design.alpha);
            let mut r = rng::stream(7, i);
            for _ in 0..5 {
                let _: f64 = StandardNormal.sample(&mut r);
            }
            let e = -rng::open_unit(&mut r).ln();
            assert!((eta * lin.exp() * h / e - 1.0).abs() < 1e-10, "row {i}");
        }
    }
}
