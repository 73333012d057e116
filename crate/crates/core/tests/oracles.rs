//! Independent oracles for the probit and Weibull models: Gauss–Hermite
//! quadrature for the probit ingredients, exact distributional facts for the
//! simulated durations.

use nalgebra::DMatrix;

use momentinfo::estimation::{mean_moments, moment_covariance, numerical_jacobian, JacobianScheme};
use momentinfo::normal;
use momentinfo::probit::{self, ProbitModel, ProbitParams, RHO_X};
use momentinfo::weibull::{self, WeibullDesign, WeibullModel, WeibullParams, EULER_GAMMA};

/// Probabilists' Gauss–Hermite rule via the Golub–Welsch eigenproblem;
/// weights sum to one.
fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let jac = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jac.symmetric_eigen();
    (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect()
}

/// `E[h(x₁, x₂)]` under the probit design.
fn probit_expectation(f: impl Fn(f64, f64) -> Vec<f64>, len: usize) -> Vec<f64> {
    let rule = gauss_hermite(48);
    let c = (1.0 - RHO_X * RHO_X).sqrt();
    let mut acc = vec![0.0; len];
    for &(z1, w1) in &rule {
        for &(z2, w2) in &rule {
            for (a, v) in acc.iter_mut().zip(f(z1, RHO_X * z1 + c * z2)) {
                *a += w1 * w2 * v;
            }
        }
    }
    acc
}

fn instruments(x1: f64, x2: f64) -> [f64; 6] {
    [1.0, x1, x2, x1 * x1, x1 * x2, x2 * x2]
}

#[test]
fn quadrature_rule_matches_normal_moments() {
    let rule = gauss_hermite(48);
    let m = |k: i32| rule.iter().map(|(x, w)| w * x.powi(k)).sum::<f64>();
    assert!((m(0) - 1.0).abs() < 1e-12);
    assert!((m(2) - 1.0).abs() < 1e-12);
    assert!((m(4) - 3.0).abs() < 1e-10);
    assert!(m(3).abs() < 1e-10);
}

#[test]
fn probit_s_and_g_match_quadrature() {
    let p = ProbitParams::truth();
    let s_exact = probit_expectation(
        |x1, x2| {
            let q = normal::cdf(p.index(x1, x2));
            let h = instruments(x1, x2);
            let mut v = Vec::with_capacity(36);
            for a in h {
                for b in h {
                    v.push(q * (1.0 - q) * a * b);
                }
            }
            v
        },
        36,
    );
    let g_exact = probit_expectation(
        |x1, x2| {
            let d = normal::pdf(p.index(x1, x2));
            let h = instruments(x1, x2);
            let x = [1.0, x1, x2];
            let mut v = Vec::with_capacity(18);
            for a in h {
                for b in x {
                    v.push(-d * a * b);
                }
            }
            v
        },
        18,
    );
    let data = probit::simulate_probit(400_000, 11);
    let theta = p.to_vec();
    let (_, s) = moment_covariance(&ProbitModel, &data, &theta).unwrap();
    let g = numerical_jacobian(&ProbitModel, &data, &theta, JacobianScheme::Smooth).unwrap();
    // S₁₁ = E[Φ(1 − Φ)] and the rest of S: Monte-Carlo error at 4·10⁵ draws.
    assert!((s[(0, 0)] - s_exact[0]).abs() < 0.003, "S11 {} vs {}", s[(0, 0)], s_exact[0]);
    for j in 0..6 {
        for k in 0..6 {
            let e = s_exact[j * 6 + k];
            assert!((s[(j, k)] - e).abs() < 0.02 * e.abs().max(1.0), "S[{j},{k}] {} vs {e}", s[(j, k)]);
        }
        for q in 0..3 {
            let e = g_exact[j * 3 + q];
            assert!((g[(j, q)] - e).abs() < 0.02 * e.abs().max(0.5), "G[{j},{q}] {} vs {e}", g[(j, q)]);
        }
    }
}

#[test]
fn probit_moments_are_valid_at_truth() {
    let data = probit::simulate_probit(200_000, 3);
    let theta = ProbitParams::truth().to_vec();
    let g = mean_moments(&ProbitModel, &data, &theta).unwrap();
    let (_, s) = moment_covariance(&ProbitModel, &data, &theta).unwrap();
    for k in 0..6 {
        let se = (s[(k, k)] / 200_000.0).sqrt();
        assert!(g[k].abs() < 4.5 * se, "moment {k}: {} vs se {se}", g[k]);
    }
}

/// Kolmogorov–Smirnov distance of a sample from a continuous CDF.
fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn weibull_probability_integral_transform_is_exponential() {
    let n = 100_000;
    let data = weibull::simulate_weibull(n, 21);
    let design = WeibullDesign::default();
    let cols: Vec<&[f64]> = ["T", "x1", "x21", "x22", "x23", "eta"]
        .iter()
        .map(|c| data.column(c).unwrap())
        .collect();
    let e: Vec<f64> = (0..n)
        .map(|i| {
            let rec = weibull::SpellRecord {
                t: cols[0][i],
                x1: cols[1][i],
                x2: [cols[2][i], cols[3][i], cols[4][i]],
            };
            let lam = weibull::integrated_hazard(rec.t, &rec, [design.beta[1], design.beta[2]], design.alpha);
            cols[5][i] * design.beta[0].exp() * lam
        })
        .collect();
    let d = ks_distance(e, |x| 1.0 - (-x).exp());
    // 1% critical value 1.63/√n.
    assert!(d < 1.63 / (n as f64).sqrt(), "KS distance {d}");
}

#[test]
fn weibull_residual_is_centred_gumbel_plus_heterogeneity() {
    let n = 400_000;
    let data = weibull::simulate_weibull(n, 5);
    let f = weibull::weibull_moments(&data, &WeibullParams::truth().to_vec()).unwrap();
    let r = f.column(0);
    let mean = r.mean();
    let var = r.variance();
    let want = std::f64::consts::PI.powi(2) / 6.0 + 0.5;
    assert!(mean.abs() < 4.0 * (want / n as f64).sqrt(), "mean {mean}");
    assert!((var - want).abs() < 0.02 * want, "variance {var} vs {want}");
    assert!((EULER_GAMMA - 0.577_215_664_901_532_9).abs() < 1e-10);
}

#[test]
fn weibull_exponential_case_has_closed_form() {
    let design = WeibullDesign {
        alpha: 1.0,
        log_eta_var: 0.0,
        covariates: false,
        ..WeibullDesign::default()
    };
    let n = 100_000;
    let data = weibull::simulate_weibull_with(n, 9, &design);
    let rate = design.beta[0].exp();
    let d = ks_distance(data.column("T").unwrap().to_vec(), |t| 1.0 - (-rate * t).exp());
    assert!(d < 1.63 / (n as f64).sqrt(), "KS distance {d}");
    let g = mean_moments(&WeibullModel, &data, &design.theta().to_vec()).unwrap();
    assert!(g[0].abs() < 4.0 * (std::f64::consts::PI.powi(2) / 6.0 / n as f64).sqrt());
}

#[test]
fn weibull_moments_are_valid_at_truth() {
    let n = 200_000;
    let data = weibull::simulate_weibull(n, 8);
    let theta = WeibullParams::truth().to_vec();
    let g = mean_moments(&WeibullModel, &data, &theta).unwrap();
    let (_, s) = moment_covariance(&WeibullModel, &data, &theta).unwrap();
    for k in 0..5 {
        let se = (s[(k, k)] / n as f64).sqrt();
        assert!(g[k].abs() < 4.5 * se, "moment {k}: {} vs se {se}", g[k]);
    }
}

#[test]
fn weibull_jacobian_zero_pattern() {
    // At the truth b0 moves only the first moment and b1 only the second,
    // since the covariates have mean zero and are independent of x1.
    let data = weibull::simulate_weibull(200_000, 2);
    let g = numerical_jacobian(&WeibullModel, &data, &WeibullParams::truth().to_vec(), JacobianScheme::Smooth).unwrap();
    let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for k in 1..5 {
        assert!(g[(k, 0)].abs() < 0.02 * scale, "G[{k},0] = {}", g[(k, 0)]);
    }
    for k in [0, 2, 3, 4] {
        assert!(g[(k, 1)].abs() < 0.02 * scale, "G[{k},1] = {}", g[(k, 1)]);
    }
    assert!((g[(0, 0)] - WeibullParams::truth().alpha).abs() < 1e-6);
    assert!(g[(1, 1)].abs() > 0.1 * scale);
}
