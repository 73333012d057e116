//! Generic moment-based estimation: per-observation moment contributions,
//! their mean and covariance, numerical Jacobians, bootstrap weights and the
//! GMM minimization itself.

pub mod dataset;
pub mod nelder_mead;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::GmmIngredients;
use crate::linalg;
use crate::rng;

pub use dataset::Dataset;
pub use nelder_mead::{NelderMeadOptions, NelderMeadResult};

/// Rows handed to a model at once. Fixed so results do not depend on the thread count.
const CHUNK_ROWS: usize = 16_384;

const BOOTSTRAP_TAG: u64 = 0xb007;
const JITTER_TAG: u64 = 0x1177e2;

/// A model defined by per-observation moment contributions `f_i(θ)`,
/// with `E f_i(θ₀) = 0`.
pub trait MomentModel: Sync {
    type Data: ?Sized + Sync;

    fn n_moments(&self) -> usize;
    fn n_params(&self) -> usize;
    fn moment_labels(&self) -> Vec<String>;
    fn param_labels(&self) -> Vec<String>;
    fn n_obs(&self, data: &Self::Data) -> usize;

    /// Validates `data` and `θ` before any contributions are computed.
    fn check(&self, _data: &Self::Data, _theta: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Writes the contributions of rows `start..start + out.len() / J`
    /// into `out`, row-major.
    fn eval_rows(&self, data: &Self::Data, theta: &[f64], start: usize, out: &mut [f64])
        -> Result<()>;

    /// Typical magnitude of each parameter, used for step sizes.
    fn param_scales(&self) -> Vec<f64> {
        vec![1.0; self.n_params()]
    }
}

fn check_theta<M: MomentModel>(model: &M, data: &M::Data, theta: &[f64]) -> Result<()> {
    if theta.len() != model.n_params() {
        return Err(Error::Dimension(format!(
            "expected {} parameters, got {}",
            model.n_params(),
            theta.len()
        )));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("parameter vector".into()));
    }
    if model.n_obs(data) == 0 {
        return Err(Error::Invalid("no observations".into()));
    }
    model.check(data, theta)
}

/// Evaluates each chunk and maps it through `f`, preserving chunk order.
fn map_chunks<M, T, F>(model: &M, data: &M::Data, theta: &[f64], f: F) -> Result<Vec<T>>
where
    M: MomentModel,
    T: Send,
    F: Fn(&[f64], usize) -> T + Sync,
{
    let n = model.n_obs(data);
    let j = model.n_moments();
    let n_chunks = n.div_ceil(CHUNK_ROWS);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_ROWS;
            let rows = CHUNK_ROWS.min(n - start);
            let mut buf = vec![0.0; rows * j];
            model.eval_rows(data, theta, start, &mut buf)?;
            if let Some(pos) = buf.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "moment contribution at row {}, moment {}",
                    start + pos / j,
                    pos % j + 1
                )));
            }
            Ok(f(&buf, rows))
        })
        .collect()
}

/// All contributions as an `n × J` matrix.
pub fn eval<M: MomentModel>(model: &M, data: &M::Data, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_theta(model, data, theta)?;
    let j = model.n_moments();
    let chunks = map_chunks(model, data, theta, |buf, _| buf.to_vec())?;
    let flat: Vec<f64> = chunks.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(flat.len() / j.max(1), j, &flat))
}

fn column_sums(buf: &[f64], j: usize) -> Vec<f64> {
    let mut sums = vec![0.0; j];
    for row in buf.chunks_exact(j) {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums
}

/// `ḡ(θ) = n⁻¹ Σᵢ f_i(θ)`.
pub fn mean_moments<M: MomentModel>(
    model: &M,
    data: &M::Data,
    theta: &[f64],
) -> Result<DVector<f64>> {
    check_theta(model, data, theta)?;
    let j = model.n_moments();
    let n = model.n_obs(data) as f64;
    let parts = map_chunks(model, data, theta, |buf, _| column_sums(buf, j))?;
    let mut total = DVector::zeros(j);
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(total / n)
}

/// Mean and covariance `S = n⁻¹ Σᵢ (f_i − ḡ)(f_i − ḡ)'` of the contributions.
pub fn moment_covariance<M: MomentModel>(
    model: &M,
    data: &M::Data,
    theta: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let mean = mean_moments(model, data, theta)?;
    let j = model.n_moments();
    let n = model.n_obs(data) as f64;
    let m = mean.as_slice();
    let parts = map_chunks(model, data, theta, |buf, _| {
        let mut acc = vec![0.0; j * j];
        let mut centered = vec![0.0; j];
        for row in buf.chunks_exact(j) {
            for (c, (v, mu)) in centered.iter_mut().zip(row.iter().zip(m)) {
                *c = v - mu;
            }
            for a in 0..j {
                let ca = centered[a];
                for b in a..j {
                    acc[a * j + b] += ca * centered[b];
                }
            }
        }
        acc
    })?;
    let mut s = DMatrix::zeros(j, j);
    for p in parts {
        for a in 0..j {
            for b in a..j {
                s[(a, b)] += p[a * j + b];
            }
        }
    }
    for a in 0..j {
        for b in a..j {
            s[(a, b)] /= n;
            s[(b, a)] = s[(a, b)];
        }
    }
    for k in 0..j {
        if s[(k, k)] <= 1e-20 * mean[k].powi(2).max(1.0) {
            return Err(Error::DegenerateMoment { index: k + 1 });
        }
    }
    Ok((mean, s))
}

/// Step-size regime for finite-difference Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianScheme {
    /// Moments are smooth in `θ`: small relative steps.
    Smooth,
    /// Moments come from a simulator with discrete outcomes: wide steps
    /// so the difference spans many jumps.
    Simulated,
}

impl JacobianScheme {
    pub fn base_step(self) -> f64 {
        match self {
            JacobianScheme::Smooth => 1e-5,
            JacobianScheme::Simulated => 5e-2,
        }
    }
}

/// Times a simulated-scheme step is quadrupled when its column comes out zero.
pub const SIMULATED_WIDENINGS: usize = 3;

/// Central-difference `G = ∂ḡ/∂θ'` (J × P).
pub fn numerical_jacobian<M: MomentModel>(
    model: &M,
    data: &M::Data,
    theta: &[f64],
    scheme: JacobianScheme,
) -> Result<DMatrix<f64>> {
    check_theta(model, data, theta)?;
    let scales = model.param_scales();
    let base = scheme.base_step();
    let mut g = DMatrix::zeros(model.n_moments(), theta.len());
    for p in 0..theta.len() {
        let mut h = base * scales[p].max(theta[p].abs());
        // A simulated column that is exactly zero means no outcome switched
        // inside the step; widen it a few times before accepting the zero.
        let tries = if scheme == JacobianScheme::Simulated { 1 + SIMULATED_WIDENINGS } else { 1 };
        for _ in 0..tries {
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[p] += h;
            down[p] -= h;
            let width = up[p] - down[p];
            let diff = (mean_moments(model, data, &up)? - mean_moments(model, data, &down)?) / width;
            g.set_column(p, &diff);
            if diff.iter().any(|v| *v != 0.0) {
                break;
            }
            h *= 4.0;
        }
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Jacobian".into()));
    }
    Ok(g)
}

/// `W = diag(S)⁻¹`.
pub fn diagonal_weight(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = s.diagonal();
    if let Some(k) = d.iter().position(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(Error::DegenerateMoment { index: k + 1 });
    }
    Ok(DMatrix::from_diagonal(&d.map(|v| 1.0 / v)))
}

/// Bootstrap variance of each mean moment, scaled by `n` so it estimates
/// the diagonal of `S`.
pub fn bootstrap_moment_variance<M: MomentModel>(
    model: &M,
    data: &M::Data,
    theta: &[f64],
    replications: usize,
    seed: u64,
) -> Result<DVector<f64>> {
    if replications < 2 {
        return Err(Error::Invalid("bootstrap needs at least two replications".into()));
    }
    let contributions = eval(model, data, theta)?;
    let (n, j) = contributions.shape();
    let rows: Vec<f64> = contributions.transpose().as_slice().to_vec();
    let boot_seed = rng::derive_seed(seed, BOOTSTRAP_TAG);
    let means: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(boot_seed, b as u64);
            let mut sums = vec![0.0; j];
            for _ in 0..n {
                let i = r.random_range(0..n);
                for (s, v) in sums.iter_mut().zip(&rows[i * j..(i + 1) * j]) {
                    *s += v;
                }
            }
            sums.into_iter().map(|s| s / n as f64).collect()
        })
        .collect();
    let bf = replications as f64;
    let mut var = DVector::zeros(j);
    for k in 0..j {
        let mu = means.iter().map(|m| m[k]).sum::<f64>() / bf;
        let v = means.iter().map(|m| (m[k] - mu).powi(2)).sum::<f64>() / (bf - 1.0);
        if v <= 0.0 {
            return Err(Error::DegenerateMoment { index: k + 1 });
        }
        var[k] = v * n as f64;
    }
    Ok(var)
}

/// `Q(θ) = ḡ(θ)' W ḡ(θ)`.
pub fn criterion<M: MomentModel>(
    model: &M,
    data: &M::Data,
    theta: &[f64],
    w: &DMatrix<f64>,
) -> Result<f64> {
    let g = mean_moments(model, data, theta)?;
    Ok((g.transpose() * w * &g)[(0, 0)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    /// Number of minimizer runs; the first starts at `θ_start`, the rest from jittered starts.
    pub restarts: usize,
    pub seed: u64,
    pub max_evals: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    /// Initial simplex edge, relative to `max(scale, |θ|)`.
    pub initial_step: f64,
    pub jacobian: JacobianScheme,
    /// Damped Gauss–Newton iterations run from each start before the simplex
    /// search; zero disables the stage.
    pub gauss_newton_iters: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            restarts: 1,
            seed: 0,
            max_evals: 20_000,
            x_tol: 1e-8,
            f_tol: 1e-12,
            initial_step: 0.1,
            jacobian: JacobianScheme::Smooth,
            gauss_newton_iters: 0,
        }
    }
}

/// Damped Gauss–Newton on `ḡ'Wḡ` with finite-difference Jacobians. Each
/// step is halved until the criterion falls; stops when no halving helps.
/// Returns the final point, its criterion and the evaluations spent.
pub fn gauss_newton<M: MomentModel>(
    model: &M,
    data: &M::Data,
    w: &DMatrix<f64>,
    start: &[f64],
    iters: usize,
    scheme: JacobianScheme,
) -> (Vec<f64>, f64, usize) {
    let mut x = start.to_vec();
    let mut evals = 1;
    let Ok(mut gbar) = mean_moments(model, data, &x) else {
        return (x, f64::INFINITY, evals);
    };
    let mut f = (gbar.transpose() * w * &gbar)[(0, 0)];
    for _ in 0..iters {
        let Ok(g) = numerical_jacobian(model, data, &x, scheme) else {
            break;
        };
        evals += 2 * x.len();
        let gtw = g.transpose() * w;
        let Some(chol) = (&gtw * &g).cholesky() else {
            break;
        };
        let step = chol.solve(&(gtw * &gbar));
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..6 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a - t * d).collect();
            evals += 1;
            if let Ok(gt) = mean_moments(model, data, &trial) {
                let ft = (gt.transpose() * w * &gt)[(0, 0)];
                if ft < f {
                    x = trial;
                    f = ft;
                    gbar = gt;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (x, f, evals)
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub theta_hat: Vec<f64>,
    pub criterion_value: f64,
    /// `G`, `S` and `W` evaluated at `θ̂`.
    pub ingredients: GmmIngredients,
    pub n_evals: usize,
    pub converged: bool,
}

/// Minimizes `ḡ(θ)'Wḡ(θ)` from `theta_start` and assembles the sensitivity inputs at the optimum.
pub fn gmm_estimate<M: MomentModel>(
    model: &M,
    data: &M::Data,
    w: &DMatrix<f64>,
    theta_start: &[f64],
    opts: &EstimateOptions,
) -> Result<EstimateResult> {
    let j = model.n_moments();
    if w.shape() != (j, j) {
        return Err(Error::Dimension(format!("W must be {j}x{j}, got {:?}", w.shape())));
    }
    let w = linalg::symmetrized(w, "W")?;
    let min_eig = linalg::min_eigenvalue(&w);
    if min_eig <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            name: "W",
            min_eigenvalue: min_eig,
        });
    }
    check_theta(model, data, theta_start)?;
    let start_value = criterion(model, data, theta_start, &w)?;

    let scales = model.param_scales();
    let nm_opts = NelderMeadOptions {
        max_evals: opts.max_evals,
        x_tol: opts.x_tol,
        f_tol: opts.f_tol,
    };
    let objective = |x: &[f64]| criterion(model, data, x, &w).unwrap_or(f64::INFINITY);
    let jitter_seed = rng::derive_seed(opts.seed, JITTER_TAG);

    let mut best: Option<NelderMeadResult> = None;
    let mut n_evals = 1;
    for run in 0..opts.restarts.max(1) {
        let x0: Vec<f64> = if run == 0 {
            theta_start.to_vec()
        } else {
            let mut r = rng::stream(jitter_seed, run as u64);
            theta_start
                .iter()
                .zip(&scales)
                .map(|(t, s)| {
                    let half = (0.1 * t.abs()).max(0.1 * s);
                    t + r.random_range(-half..=half)
                })
                .collect()
        };
        let x0 = if opts.gauss_newton_iters > 0 {
            let (x, _, evals) =
                gauss_newton(model, data, &w, &x0, opts.gauss_newton_iters, opts.jacobian);
            n_evals += evals;
            x
        } else {
            x0
        };
        let steps: Vec<f64> = x0
            .iter()
            .zip(&scales)
            .map(|(t, s)| opts.initial_step * s.max(t.abs()))
            .collect();
        let res = nelder_mead::minimize(objective, &x0, &steps, &scales, nm_opts);
        n_evals += res.evals;
        if best.as_ref().is_none_or(|b| res.f < b.f) {
            best = Some(res);
        }
    }
    let best = best.expect("at least one run");
    if !(best.f <= start_value) {
        return Err(Error::NoImprovement {
            start: start_value,
            best: best.f,
        });
    }

    let g = numerical_jacobian(model, data, &best.x, opts.jacobian)?;
    let (_, s) = moment_covariance(model, data, &best.x)?;
    let ingredients = GmmIngredients::new(g, s, w)?;
    Ok(EstimateResult {
        theta_hat: best.x,
        criterion_value: best.f,
        ingredients,
        n_evals,
        converged: best.converged,
    })
}
