//! Asymptotic covariance of GMM estimators.
//!
//! With `G` the expected Jacobian of the moment conditions, `S` their
//! covariance and `W` the weighting matrix, the estimator is asymptotically
//! normal with the sandwich covariance
//! `Σ = (G'WG)⁻¹ G'WSWG (G'WG)⁻¹`, which collapses to `(G'S⁻¹G)⁻¹` when
//! `W = S⁻¹`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, sym_inverse, symmetrize, SymInverse, CONDITION_CEILING, RANK_TOL};

/// Validated `(G, S, W)` triple at a parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmIngredients {
    g: DMatrix<f64>,
    s: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl GmmIngredients {
    /// Checks dimensions, symmetry (symmetrizing small roundoff), definiteness
    /// of `W`, semidefiniteness of `S` and the column rank of `G`.
    pub fn new(g: DMatrix<f64>, s: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        let (j, p) = g.shape();
        if j == 0 || p == 0 {
            return Err(Error::Dimension("G must be non-empty".into()));
        }
        if j < p {
            return Err(Error::Dimension(format!(
                "need at least as many moments as parameters, got J = {j}, P = {p}"
            )));
        }
        if s.shape() != (j, j) || w.shape() != (j, j) {
            return Err(Error::Dimension(format!(
                "S and W must be {j}x{j}, got {:?} and {:?}",
                s.shape(),
                w.shape()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("G has non-finite entries".into()));
        }
        let s = linalg::symmetrized(&s, "S")?;
        let w = linalg::symmetrized(&w, "W")?;

        let w_min = linalg::min_eigenvalue(&w);
        if w_min <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                name: "W",
                min_eigenvalue: w_min,
            });
        }
        let s_min = linalg::min_eigenvalue(&s);
        if s_min < -1e-10 * s.trace().abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotPositiveSemidefinite {
                name: "S",
                min_eigenvalue: s_min,
            });
        }
        let ratio = linalg::singular_value_ratio(&g);
        if ratio <= RANK_TOL {
            return Err(Error::RankDeficient { ratio });
        }
        Ok(Self { g, s, w })
    }

    /// Ingredients with the optimal weighting matrix `W = S⁻¹`.
    pub fn with_optimal_weight(g: DMatrix<f64>, s: DMatrix<f64>) -> Result<Self> {
        let s_sym = linalg::symmetrized(&s, "S")?;
        let inv = sym_inverse(&s_sym);
        if inv.is_singular() {
            return Err(Error::SingularS {
                condition: inv.condition,
            });
        }
        Self::new(g, s_sym, inv.inverse)
    }

    /// Ingredients for the reparameterization `θ = diag(d) φ`: `G` becomes
    /// `G diag(d)`. Covariances computed from the result map back as
    /// `diag(d) Σ_φ diag(d)`.
    pub fn rescaled(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.g.ncols() {
            return Err(Error::Dimension(format!(
                "expected {} scale factors, got {}",
                self.g.ncols(),
                d.len()
            )));
        }
        if d.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Invalid("scale factors must be positive and finite".into()));
        }
        let mut g = self.g.clone();
        for (mut col, f) in g.column_iter_mut().zip(d) {
            col *= *f;
        }
        Ok(Self {
            g,
            s: self.s.clone(),
            w: self.w.clone(),
        })
    }

    /// Factors `d` that give `G diag(d)` a bread `d' G'WG d` with unit
    /// diagonal. Columns of `G` that are exactly zero keep factor 1.
    pub fn equilibrating_scales(&self) -> Vec<f64> {
        let gwg = self.g.transpose() * &self.w * &self.g;
        (0..gwg.nrows())
            .map(|p| {
                let v = gwg[(p, p)];
                if v > 0.0 && v.is_finite() {
                    1.0 / v.sqrt()
                } else {
                    1.0
                }
            })
            .collect()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Number of moments `J`.
    pub fn n_moments(&self) -> usize {
        self.g.nrows()
    }

    /// Number of parameters `P`.
    pub fn n_params(&self) -> usize {
        self.g.ncols()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (self.g, self.s, self.w)
    }
}

/// An asymptotic covariance matrix and the conditioning of its bread.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceResult {
    pub sigma: DMatrix<f64>,
    pub condition_number: f64,
}

/// Inverse of a bread matrix `G'AG`, failing when it is numerically singular.
pub(crate) fn bread_inverse(g: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<SymInverse> {
    let bread = symmetrize(&(g.transpose() * a * g));
    let inv = sym_inverse(&bread);
    if inv.is_singular() {
        return Err(Error::SingularBread {
            condition: inv.condition,
        });
    }
    Ok(inv)
}

/// Sandwich covariance for arbitrary (possibly rank-deficient) weights.
pub(crate) fn sandwich(
    g: &DMatrix<f64>,
    s: &DMatrix<f64>,
    w: &DMatrix<f64>,
) -> Result<CovarianceResult> {
    let inv = bread_inverse(g, w)?;
    let wg = w * g;
    let meat = wg.transpose() * s * &wg;
    let sigma = symmetrize(&(&inv.inverse * meat * &inv.inverse));
    Ok(CovarianceResult {
        sigma,
        condition_number: inv.condition,
    })
}

/// `Σ = (G'WG)⁻¹ G'WSWG (G'WG)⁻¹`.
pub fn asymptotic_covariance(ing: &GmmIngredients) -> Result<CovarianceResult> {
    sandwich(&ing.g, &ing.s, &ing.w)
}

/// Inverse of `S` checked against the condition ceiling.
pub(crate) fn s_inverse(s: &DMatrix<f64>) -> Result<SymInverse> {
    let inv = sym_inverse(s);
    if inv.is_singular() {
        return Err(Error::SingularS {
            condition: inv.condition,
        });
    }
    Ok(inv)
}

/// `Σ_opt = (G'S⁻¹G)⁻¹`.
pub fn optimal_covariance(g: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<CovarianceResult> {
    if s.shape() != (g.nrows(), g.nrows()) {
        return Err(Error::Dimension(format!(
            "S must be {0}x{0}, got {1:?}",
            g.nrows(),
            s.shape()
        )));
    }
    let s = linalg::symmetrized(s, "S")?;
    let s_inv = s_inverse(&s)?;
    let inv = bread_inverse(g, &s_inv.inverse)?;
    Ok(CovarianceResult {
        sigma: inv.inverse,
        condition_number: inv.condition,
    })
}

/// Condition ceiling used throughout; exposed for reports.
pub const fn condition_ceiling() -> f64 {
    CONDITION_CEILING
}
