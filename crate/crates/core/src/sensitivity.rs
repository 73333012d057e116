//! Moment informativeness measures.
//!
//! For parameter `j` and moment `k`:
//!
//! * `M1 = -(G'WG)⁻¹G'W`, the misspecification sensitivity (`Σ = M1 S M1'`).
//! * `M2,k = ∂Σ_opt/∂S(k,k)` with the optimal weight re-optimized.
//! * `M3,k = ∂Σ/∂S(k,k) = M1 O_kk M1'` at the weight actually used.
//! * `M4,k`: change in `Σ` when moment `k` gets zero weight, other weights kept.
//! * `M5,k`: change in `Σ_opt` when moment `k` is removed.
//! * `M6,k = ∂Σ/∂W(k,k)`, zero at the optimal weight.
//!
//! The reported elasticities rescale each measure by the baseline variance of
//! the parameter and by the moment's own scale so that they do not depend on
//! the units of the moments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gmm::{self, bread_inverse, s_inverse, GmmIngredients};
use crate::linalg::{drop_index, symmetrize};

/// Which measure a block holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    M1,
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::M1,
        Measure::E1,
        Measure::E2,
        Measure::E3,
        Measure::E4,
        Measure::E5,
        Measure::E6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::M1 => "M1",
            Measure::E1 => "E1",
            Measure::E2 => "E2",
            Measure::E3 => "E3",
            Measure::E4 => "E4",
            Measure::E5 => "E5",
            Measure::E6 => "E6",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Measure::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Status of one moment column in a measure block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnStatus {
    Ok,
    /// The parameter vector is not point-identified once the moment is dropped.
    NotIdentified,
    /// The measure could not be formed (singular `S`, or a just-identified model).
    Unavailable,
}

impl ColumnStatus {
    pub fn flag(self) -> &'static str {
        match self {
            ColumnStatus::Ok => "",
            ColumnStatus::NotIdentified => "not_identified",
            ColumnStatus::Unavailable => "unavailable",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "" => Some(ColumnStatus::Ok),
            "not_identified" => Some(ColumnStatus::NotIdentified),
            "unavailable" => Some(ColumnStatus::Unavailable),
            _ => None,
        }
    }
}

/// A `P × J` block of one measure with per-column status.
///
/// Values in flagged columns are kept when they could be computed (the
/// tables print them with a star) and are `∞` or `NaN` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureBlock {
    pub measure: Measure,
    pub values: DMatrix<f64>,
    pub status: Vec<ColumnStatus>,
}

impl MeasureBlock {
    fn ok(measure: Measure, values: DMatrix<f64>) -> Self {
        let status = vec![ColumnStatus::Ok; values.ncols()];
        Self {
            measure,
            values,
            status,
        }
    }

    fn unavailable(measure: Measure, p: usize, j: usize) -> Self {
        Self {
            measure,
            values: DMatrix::from_element(p, j, f64::NAN),
            status: vec![ColumnStatus::Unavailable; j],
        }
    }
}

/// Outcome of a moment-dropping measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Dropped {
    Identified(DMatrix<f64>),
    /// The bread matrix after dropping the moment exceeds the condition ceiling.
    NotIdentified { condition: f64 },
}

impl Dropped {
    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Dropped::Identified(m) => Some(m),
            Dropped::NotIdentified { .. } => None,
        }
    }
}

/// Thresholds for declaring a column not identified after dropping a moment.
///
/// A post-drop bread matrix conditioned beyond `1e12` is always flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentificationPolicy {
    /// Scaled variance increase (𝓔4 or 𝓔5) above which the column is flagged.
    /// Estimated `G` never has exact zeros, so rank loss shows up as a huge
    /// but finite variance ratio rather than as an exactly singular bread.
    pub elasticity_ceiling: f64,
}

impl Default for IdentificationPolicy {
    fn default() -> Self {
        Self {
            elasticity_ceiling: 100.0,
        }
    }
}

fn check_k(k: usize, j: usize) -> Result<()> {
    if k >= j {
        return Err(Error::MomentIndex { index: k, moments: j });
    }
    Ok(())
}

fn check_square(name: &str, a: &DMatrix<f64>, j: usize) -> Result<()> {
    if a.shape() != (j, j) {
        return Err(Error::Dimension(format!(
            "{name} must be {j}x{j}, got {:?}",
            a.shape()
        )));
    }
    Ok(())
}

fn check_overidentified(g: &DMatrix<f64>) -> Result<()> {
    let (j, p) = g.shape();
    if j <= p {
        return Err(Error::NotOveridentified { moments: j, params: p });
    }
    Ok(())
}

/// `W` with row and column `k` set to zero, i.e. `W ⊙ (ι_k ι_k')`.
pub fn drop_weight(w: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = w.clone();
    out.row_mut(k).fill(0.0);
    out.column_mut(k).fill(0.0);
    out
}

/// Precomputed pieces of the sandwich at a given weight.
struct SandwichParts {
    bread_inv: DMatrix<f64>,
    sigma: DMatrix<f64>,
    m1: DMatrix<f64>,
}

impl SandwichParts {
    fn new(g: &DMatrix<f64>, s: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<Self> {
        let inv = bread_inverse(g, w)?;
        let m1 = -(&inv.inverse * g.transpose() * w);
        let sigma = symmetrize(&(&m1 * s * m1.transpose()));
        Ok(Self {
            bread_inv: inv.inverse,
            sigma,
            m1,
        })
    }

    fn m3(&self, k: usize) -> DMatrix<f64> {
        let col = self.m1.column(k);
        &col * col.transpose()
    }

    fn m6(&self, g: &DMatrix<f64>, s: &DMatrix<f64>, w: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
        // G'O_kk G = g_k g_k' and G'O_kk S W G = g_k (SWG)_k.
        let gk: DVector<f64> = g.row(k).transpose();
        let swg_k: DVector<f64> = (s * w * g).row(k).transpose();
        let gog = &gk * gk.transpose();
        let gosw = &gk * swg_k.transpose();
        let a = &self.bread_inv * &gog * &self.sigma;
        let b = &self.bread_inv * &gosw * &self.bread_inv;
        let out = -&a + &b + b.transpose() - a.transpose();
        symmetrize(&out)
    }
}

/// Precomputed pieces of the efficient (optimally weighted) estimator.
struct EfficientParts {
    s_inv: DMatrix<f64>,
    sigma_opt: DMatrix<f64>,
}

impl EfficientParts {
    fn new(g: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<Self> {
        let s_inv = s_inverse(s)?.inverse;
        let sigma_opt = bread_inverse(g, &s_inv)?.inverse;
        Ok(Self { s_inv, sigma_opt })
    }

    fn m2(&self, g: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
        // Σ_opt G'S⁻¹ e_k e_k' S⁻¹ G Σ_opt = v v'.
        let v: DVector<f64> = &self.sigma_opt * g.transpose() * self.s_inv.column(k);
        &v * v.transpose()
    }
}

fn m4_with(g: &DMatrix<f64>, s: &DMatrix<f64>, w: &DMatrix<f64>, sigma: &DMatrix<f64>, k: usize) -> Dropped {
    let w_tilde = drop_weight(w, k);
    match gmm::sandwich(g, s, &w_tilde) {
        Ok(cov) => Dropped::Identified(cov.sigma - sigma),
        Err(Error::SingularBread { condition }) => Dropped::NotIdentified { condition },
        Err(_) => Dropped::NotIdentified {
            condition: f64::INFINITY,
        },
    }
}

fn m5_with(g: &DMatrix<f64>, s: &DMatrix<f64>, sigma_opt: &DMatrix<f64>, k: usize) -> Result<Dropped> {
    let g_k = drop_index(g, k, false);
    let s_k = drop_index(s, k, true);
    match gmm::optimal_covariance(&g_k, &s_k) {
        Ok(cov) => Ok(Dropped::Identified(cov.sigma - sigma_opt)),
        Err(Error::SingularBread { condition }) => Ok(Dropped::NotIdentified { condition }),
        Err(e) => Err(e),
    }
}

/// `M1 = -(G'WG)⁻¹G'W`, a `P × J` matrix.
pub fn m1(g: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square("W", w, g.nrows())?;
    let inv = bread_inverse(g, w)?;
    Ok(-(&inv.inverse * g.transpose() * w))
}

/// `M2,k = Σ_opt (G'S⁻¹ O_kk S⁻¹G) Σ_opt`. `k` is zero-based.
pub fn m2(g: &DMatrix<f64>, s: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    check_square("S", s, g.nrows())?;
    check_k(k, g.nrows())?;
    Ok(EfficientParts::new(g, s)?.m2(g, k))
}

/// `M3,k = M1 O_kk M1'`. `k` is zero-based.
pub fn m3(g: &DMatrix<f64>, w: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    check_k(k, g.nrows())?;
    let m1 = m1(g, w)?;
    let col = m1.column(k);
    Ok(&col * col.transpose())
}

/// `M4,k = Σ̃_k − Σ` where `Σ̃_k` uses `W` with moment `k`'s row and column zeroed.
pub fn m4(g: &DMatrix<f64>, w: &DMatrix<f64>, s: &DMatrix<f64>, k: usize) -> Result<Dropped> {
    check_square("W", w, g.nrows())?;
    check_square("S", s, g.nrows())?;
    check_overidentified(g)?;
    check_k(k, g.nrows())?;
    let parts = SandwichParts::new(g, s, w)?;
    Ok(m4_with(g, s, w, &parts.sigma, k))
}

/// `M5,k = (G₋ₖ'S₋ₖ⁻¹G₋ₖ)⁻¹ − (G'S⁻¹G)⁻¹`.
pub fn m5(g: &DMatrix<f64>, s: &DMatrix<f64>, k: usize) -> Result<Dropped> {
    check_square("S", s, g.nrows())?;
    check_overidentified(g)?;
    check_k(k, g.nrows())?;
    let parts = EfficientParts::new(g, s)?;
    m5_with(g, s, &parts.sigma_opt, k)
}

/// `M6,k = ∂Σ/∂W(k,k)`, the four-term derivative of the sandwich.
pub fn m6(g: &DMatrix<f64>, w: &DMatrix<f64>, s: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    check_square("W", w, g.nrows())?;
    check_square("S", s, g.nrows())?;
    check_k(k, g.nrows())?;
    let parts = SandwichParts::new(g, s, w)?;
    Ok(parts.m6(g, s, w, k))
}

/// All measures for one set of ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub params: Vec<String>,
    pub moments: Vec<String>,
    pub sigma: DMatrix<f64>,
    /// `None` when `S` is singular.
    pub sigma_opt: Option<DMatrix<f64>>,
    /// Whether the model stays identified when each moment is dropped.
    pub dropped_identified: Vec<bool>,
    blocks: Vec<MeasureBlock>,
}

impl SensitivityReport {
    pub fn block(&self, measure: Measure) -> &MeasureBlock {
        self.blocks
            .iter()
            .find(|b| b.measure == measure)
            .expect("every measure block is present")
    }

    pub fn blocks(&self) -> &[MeasureBlock] {
        &self.blocks
    }

    pub fn m1(&self) -> &DMatrix<f64> {
        &self.block(Measure::M1).values
    }

    pub fn e(&self, which: u8) -> &DMatrix<f64> {
        let m = match which {
            1 => Measure::E1,
            2 => Measure::E2,
            3 => Measure::E3,
            4 => Measure::E4,
            5 => Measure::E5,
            6 => Measure::E6,
            _ => panic!("elasticity index must be 1..=6, got {which}"),
        };
        &self.block(m).values
    }

    /// Value and status of one cell.
    pub fn cell(&self, measure: Measure, param: usize, moment: usize) -> (f64, ColumnStatus) {
        let b = self.block(measure);
        (b.values[(param, moment)], b.status[moment])
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_moments(&self) -> usize {
        self.moments.len()
    }

    /// Maps a report computed from [`GmmIngredients::rescaled`] back to the
    /// original parameter units. Only `M1`, `E1` and the covariances carry
    /// units; the other elasticities are ratios and stay as they are.
    pub fn unscaled(mut self, d: &[f64]) -> SensitivityReport {
        let dd = DVector::from_column_slice(d);
        let outer = &dd * dd.transpose();
        self.sigma.component_mul_assign(&outer);
        if let Some(s) = self.sigma_opt.as_mut() {
            s.component_mul_assign(&outer);
        }
        for b in self.blocks.iter_mut() {
            if matches!(b.measure, Measure::M1 | Measure::E1) {
                for (mut row, f) in b.values.row_iter_mut().zip(d) {
                    row *= *f;
                }
            }
        }
        self
    }

    /// Restricts the report to a single parameter row.
    pub fn row(&self, param: usize) -> SensitivityReport {
        let pick = |m: &DMatrix<f64>| m.rows(param, 1).into_owned();
        SensitivityReport {
            params: vec![self.params[param].clone()],
            moments: self.moments.clone(),
            sigma: self.sigma.view((param, param), (1, 1)).into_owned(),
            sigma_opt: self
                .sigma_opt
                .as_ref()
                .map(|s| s.view((param, param), (1, 1)).into_owned()),
            dropped_identified: self.dropped_identified.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| MeasureBlock {
                    measure: b.measure,
                    values: pick(&b.values),
                    status: b.status.clone(),
                })
                .collect(),
        }
    }

    /// Reassembles a report from stored blocks (used when re-reading CSV output).
    pub fn from_blocks(
        params: Vec<String>,
        moments: Vec<String>,
        blocks: Vec<MeasureBlock>,
    ) -> Result<Self> {
        let (p, j) = (params.len(), moments.len());
        for m in Measure::ALL {
            let b = blocks
                .iter()
                .find(|b| b.measure == m)
                .ok_or_else(|| Error::ShapeMismatch(format!("missing block {}", m.name())))?;
            if b.values.shape() != (p, j) || b.status.len() != j {
                return Err(Error::ShapeMismatch(format!(
                    "block {} has shape {:?}, expected ({p}, {j})",
                    m.name(),
                    b.values.shape()
                )));
            }
        }
        let e4 = blocks.iter().find(|b| b.measure == Measure::E4).unwrap();
        let dropped_identified = e4
            .status
            .iter()
            .map(|s| *s != ColumnStatus::NotIdentified)
            .collect();
        Ok(Self {
            params,
            moments,
            sigma: DMatrix::from_element(p, p, f64::NAN),
            sigma_opt: None,
            dropped_identified,
            blocks,
        })
    }
}

/// Computes `M1` and the scaled measures `𝓔1..𝓔6` with default identification policy.
pub fn full_report(
    ing: &GmmIngredients,
    params: &[String],
    moments: &[String],
) -> Result<SensitivityReport> {
    full_report_with(ing, params, moments, IdentificationPolicy::default())
}

/// [`full_report`] with an explicit identification policy.
///
/// Failures of individual measures (singular `S`, a just-identified model, a
/// moment whose removal destroys identification) are recorded as column
/// status rather than aborting; only a singular baseline bread is fatal.
pub fn full_report_with(
    ing: &GmmIngredients,
    params: &[String],
    moments: &[String],
    policy: IdentificationPolicy,
) -> Result<SensitivityReport> {
    let (g, s, w) = (ing.g(), ing.s(), ing.w());
    let (j, p) = g.shape();
    if params.len() != p || moments.len() != j {
        return Err(Error::Dimension(format!(
            "expected {p} parameter and {j} moment labels, got {} and {}",
            params.len(),
            moments.len()
        )));
    }

    let sw = SandwichParts::new(g, s, w)?;
    let eff = match EfficientParts::new(g, s) {
        Ok(e) => Some(e),
        Err(Error::SingularS { .. }) | Err(Error::SingularBread { .. }) => None,
        Err(e) => return Err(e),
    };
    let sig_diag: Vec<f64> = (0..p).map(|i| sw.sigma[(i, i)]).collect();
    let opt_diag: Option<Vec<f64>> = eff
        .as_ref()
        .map(|e| (0..p).map(|i| e.sigma_opt[(i, i)]).collect());

    let mut e1 = DMatrix::zeros(p, j);
    let mut e3 = DMatrix::zeros(p, j);
    let mut e6 = DMatrix::zeros(p, j);
    for k in 0..j {
        let sd = s[(k, k)].sqrt();
        let m3 = sw.m3(k);
        let m6 = sw.m6(g, s, w, k);
        for i in 0..p {
            e1[(i, k)] = sw.m1[(i, k)] * sd;
            e3[(i, k)] = m3[(i, i)] * s[(k, k)] / sig_diag[i];
            e6[(i, k)] = m6[(i, i)] * w[(k, k)] / sig_diag[i];
        }
    }

    let e2 = match (&eff, &opt_diag) {
        (Some(eff), Some(od)) => {
            let mut e2 = DMatrix::zeros(p, j);
            for k in 0..j {
                let m2 = eff.m2(g, k);
                for i in 0..p {
                    e2[(i, k)] = m2[(i, i)] * s[(k, k)] / od[i];
                }
            }
            MeasureBlock::ok(Measure::E2, e2)
        }
        _ => MeasureBlock::unavailable(Measure::E2, p, j),
    };

    let (e4, e5, dropped_identified) = if j > p {
        let mut e4 = MeasureBlock::ok(Measure::E4, DMatrix::zeros(p, j));
        let mut e5 = match &eff {
            Some(_) => MeasureBlock::ok(Measure::E5, DMatrix::zeros(p, j)),
            None => MeasureBlock::unavailable(Measure::E5, p, j),
        };
        let mut identified = vec![true; j];
        for k in 0..j {
            let mut flagged = false;
            match m4_with(g, s, w, &sw.sigma, k) {
                Dropped::Identified(m) => {
                    for i in 0..p {
                        e4.values[(i, k)] = m[(i, i)] / sig_diag[i];
                    }
                }
                Dropped::NotIdentified { .. } => {
                    flagged = true;
                    e4.values.column_mut(k).fill(f64::INFINITY);
                }
            }
            if let (Some(eff), Some(od)) = (&eff, &opt_diag) {
                match m5_with(g, s, &eff.sigma_opt, k)? {
                    Dropped::Identified(m) => {
                        for i in 0..p {
                            e5.values[(i, k)] = m[(i, i)] / od[i];
                        }
                    }
                    Dropped::NotIdentified { .. } => {
                        flagged = true;
                        e5.values.column_mut(k).fill(f64::INFINITY);
                    }
                }
            }
            let too_large = |b: &MeasureBlock| {
                b.status[k] == ColumnStatus::Ok
                    && b.values
                        .column(k)
                        .iter()
                        .any(|v| v.abs() > policy.elasticity_ceiling)
            };
            if too_large(&e4) || too_large(&e5) {
                flagged = true;
            }
            if flagged {
                identified[k] = false;
                e4.status[k] = ColumnStatus::NotIdentified;
                if e5.status[k] == ColumnStatus::Ok {
                    e5.status[k] = ColumnStatus::NotIdentified;
                }
            }
        }
        (e4, e5, identified)
    } else {
        (
            MeasureBlock::unavailable(Measure::E4, p, j),
            MeasureBlock::unavailable(Measure::E5, p, j),
            vec![false; j],
        )
    };

    Ok(SensitivityReport {
        params: params.to_vec(),
        moments: moments.to_vec(),
        sigma: sw.sigma.clone(),
        sigma_opt: eff.map(|e| e.sigma_opt),
        dropped_identified,
        blocks: vec![
            MeasureBlock::ok(Measure::M1, sw.m1.clone()),
            MeasureBlock::ok(Measure::E1, e1),
            e2,
            MeasureBlock::ok(Measure::E3, e3),
            e4,
            e5,
            MeasureBlock::ok(Measure::E6, e6),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::relative_difference;

    fn eye(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn mean_model() -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[-1.0, -1.0])
    }

    #[test]
    fn identity_measures() {
        let m = m1(&eye(3), &eye(3)).unwrap();
        assert!(relative_difference(&m, &(-eye(3))) < 1e-15);
        let mut o22 = DMatrix::zeros(3, 3);
        o22[(1, 1)] = 1.0;
        assert!(relative_difference(&m2(&eye(3), &eye(3), 1).unwrap(), &o22) < 1e-15);
        let mut o11 = DMatrix::zeros(3, 3);
        o11[(0, 0)] = 1.0;
        assert!(relative_difference(&m3(&eye(3), &eye(3), 0).unwrap(), &o11) < 1e-15);
    }

    #[test]
    fn hand_computed_mean_model() {
        let g = mean_model();
        assert!((m2(&g, &eye(2), 0).unwrap()[(0, 0)] - 0.25).abs() < 1e-15);
        let d4 = m4(&g, &eye(2), &eye(2), 1).unwrap();
        assert!((d4.matrix().unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
        let d5 = m5(&g, &eye(2), 0).unwrap();
        assert!((d5.matrix().unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!(m6(&g, &eye(2), &eye(2), 0).unwrap()[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn index_and_overidentification_errors() {
        assert!(matches!(
            m2(&eye(3), &eye(3), 3),
            Err(Error::MomentIndex { index: 3, moments: 3 })
        ));
        assert!(matches!(
            m4(&eye(3), &eye(3), &eye(3), 0),
            Err(Error::NotOveridentified { .. })
        ));
        assert!(matches!(
            m5(&eye(2), &eye(2), 1),
            Err(Error::NotOveridentified { .. })
        ));
    }

    #[test]
    fn dropping_the_only_informative_moment() {
        // Moment 2 is the only one that moves the second parameter.
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            m4(&g, &eye(3), &eye(3), 1).unwrap(),
            Dropped::NotIdentified { .. }
        ));
        assert!(matches!(
            m5(&g, &eye(3), 1).unwrap(),
            Dropped::NotIdentified { .. }
        ));
        let ing = GmmIngredients::new(g, eye(3), eye(3)).unwrap();
        let rep = full_report(&ing, &labels("p", 2), &labels("m", 3)).unwrap();
        assert_eq!(rep.dropped_identified, vec![true, false, true]);
        assert_eq!(rep.cell(Measure::E4, 0, 1).1, ColumnStatus::NotIdentified);
        assert_eq!(rep.cell(Measure::E5, 1, 1).1, ColumnStatus::NotIdentified);
        assert_eq!(rep.cell(Measure::E4, 0, 0).1, ColumnStatus::Ok);
    }

    #[test]
    fn huge_variance_ratio_is_flagged() {
        // Nearly, but not exactly, rank deficient after dropping moment 2.
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1e-4]);
        let ing = GmmIngredients::new(g, eye(3), eye(3)).unwrap();
        let rep = full_report(&ing, &labels("p", 2), &labels("m", 3)).unwrap();
        let (v, status) = rep.cell(Measure::E4, 1, 1);
        assert!(v.is_finite() && v > 100.0);
        assert_eq!(status, ColumnStatus::NotIdentified);
        assert!(!rep.dropped_identified[1]);
    }

    #[test]
    fn report_for_mean_model() {
        let ing = GmmIngredients::new(mean_model(), eye(2), eye(2)).unwrap();
        let rep = full_report(&ing, &labels("p", 1), &labels("m", 2)).unwrap();
        for k in 0..2 {
            assert!((rep.m1()[(0, k)] - 0.5).abs() < 1e-12);
            assert!((rep.e(2)[(0, k)] - 0.5).abs() < 1e-12);
            assert!((rep.e(4)[(0, k)] - 1.0).abs() < 1e-12);
            assert!((rep.e(5)[(0, k)] - 1.0).abs() < 1e-12);
            assert!(rep.e(6)[(0, k)].abs() < 1e-12);
        }
        assert_eq!(rep.dropped_identified, vec![true, true]);
    }

    #[test]
    fn just_identified_report_marks_drop_measures_unavailable() {
        let ing = GmmIngredients::new(eye(2), eye(2), eye(2)).unwrap();
        let rep = full_report(&ing, &labels("p", 2), &labels("m", 2)).unwrap();
        assert_eq!(rep.block(Measure::E4).status, vec![ColumnStatus::Unavailable; 2]);
        assert!(rep.e(6).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rescaled_report_maps_back() {
        let g = DMatrix::from_row_slice(4, 2, &[1.0, 0.3, -0.5, 2.0, 0.2, 0.1, 1.5, -0.7]);
        let s = DMatrix::from_fn(4, 4, |a, b| if a == b { 1.0 + a as f64 } else { 0.2 });
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 2.0, 1.0]));
        let ing = GmmIngredients::new(g, s, w).unwrap();
        let (params, moments) = (labels("p", 2), labels("m", 4));
        let direct = full_report(&ing, &params, &moments).unwrap();
        let d = [0.2, 3.0];
        let back = full_report(&ing.rescaled(&d).unwrap(), &params, &moments)
            .unwrap()
            .unscaled(&d);
        assert!(relative_difference(&direct.sigma, &back.sigma) < 1e-10);
        for m in Measure::ALL {
            for i in 0..2 {
                let a = DMatrix::from_iterator(1, 4, direct.block(m).values.row(i).iter().copied());
                let b = DMatrix::from_iterator(1, 4, back.block(m).values.row(i).iter().copied());
                assert!(relative_difference(&a, &b) < 1e-9, "{} row {i}", m.name());
            }
        }
    }
}
