//! Derivative-free simplex minimizer.
//!
//! Reflection, expansion, contraction and shrink coefficients follow the
//! dimension-adaptive choice of Gao and Han for problems with more than two
//! parameters, and the classic (1, 2, 1/2, 1/2) otherwise.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Converged once every vertex is within this (scaled) distance of the best one...
    pub x_tol: f64,
    /// ...and the criterion spread across vertices is below this.
    pub f_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            x_tol: 1e-8,
            f_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Coefficients {
    reflect: f64,
    expand: f64,
    contract: f64,
    shrink: f64,
}

impl Coefficients {
    fn for_dim(d: usize) -> Self {
        if d <= 2 {
            Self {
                reflect: 1.0,
                expand: 2.0,
                contract: 0.5,
                shrink: 0.5,
            }
        } else {
            let n = d as f64;
            Self {
                reflect: 1.0,
                expand: 1.0 + 2.0 / n,
                contract: 0.75 - 0.5 / n,
                shrink: 1.0 - 1.0 / n,
            }
        }
    }
}

/// Minimizes `f` from `x0`, with initial simplex edges `steps` along each axis.
///
/// Non-finite criterion values are treated as `+∞`. Distances in the
/// convergence test are divided componentwise by `scales`.
pub fn minimize<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    scales: &[f64],
    opts: NelderMeadOptions,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    assert_eq!(steps.len(), d);
    assert_eq!(scales.len(), d);
    let coef = Coefficients::for_dim(d);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for j in 0..d {
        let mut x = x0.to_vec();
        x[j] += steps[j];
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut converged = false;
    let mut centroid = vec![0.0; d];
    let point = |c: &[f64], toward: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(toward).map(|(ci, wi)| ci + t * (wi - ci)).collect()
    };

    loop {
        // Stable sort keeps the ordering deterministic under ties.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0];
        let worst_f = simplex[d].1;
        let spread = worst_f - best.1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| {
                x.iter()
                    .zip(&best.0)
                    .zip(scales)
                    .map(|((a, b), s)| (a - b).abs() / s)
            })
            .fold(0.0_f64, f64::max);
        if diameter < opts.x_tol && (spread < opts.f_tol || (spread.is_nan() && best.1.is_infinite())) {
            converged = true;
            break;
        }
        if evals >= opts.max_evals || d == 0 {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..d] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / d as f64;
            }
        }
        let worst = simplex[d].0.clone();
        let xr = point(&centroid, &worst, -coef.reflect);
        let fr = eval(&xr, &mut evals);

        if fr < simplex[0].1 {
            let xe = point(&centroid, &worst, -coef.reflect * coef.expand);
            let fe = eval(&xe, &mut evals);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst_f {
            let xc = point(&centroid, &xr, coef.contract);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = point(&centroid, &worst, coef.contract);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(worst_f) || (fr < worst_f && fc <= fr) {
            simplex[d] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let x = point(&x_best, &v.0, coef.shrink);
            let fx = eval(&x, &mut evals);
            *v = (x, fx);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        f,
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    #[test]
    fn quadratic_one_dimensional() {
        let r = minimize(
            |x| (x[0] - 3.0).powi(2),
            &[0.0],
            &[0.1],
            &[1.0],
            NelderMeadOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn rosenbrock_two_and_four_dims() {
        for d in [2usize, 4] {
            let r = minimize(
                rosenbrock,
                &vec![-1.0; d],
                &vec![0.5; d],
                &vec![1.0; d],
                NelderMeadOptions {
                    max_evals: 50_000,
                    ..Default::default()
                },
            );
            assert!(r.converged, "d = {d}: {r:?}");
            assert!(r.x.iter().all(|v| (v - 1.0).abs() < 1e-5), "d = {d}: {r:?}");
        }
    }

    #[test]
    fn infinite_region_is_avoided() {
        let r = minimize(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) + x[1] * x[1] },
            &[0.1, 0.3],
            &[0.2, 0.2],
            &[1.0, 1.0],
            NelderMeadOptions::default(),
        );
        assert!((r.x[0] - 0.5).abs() < 1e-6 && r.x[1].abs() < 1e-6);
    }

    #[test]
    fn evaluation_budget_is_respected() {
        let r = minimize(
            rosenbrock,
            &[-1.0, -1.0, -1.0],
            &[0.5, 0.5, 0.5],
            &[1.0; 3],
            NelderMeadOptions {
                max_evals: 50,
                ..Default::default()
            },
        );
        assert!(!r.converged);
        assert!(r.evals <= 50 + 4);
    }
}
