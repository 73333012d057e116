//! Experiment orchestration: a TOML config describes one run, the run writes
//! its ingredients, reports and tables atomically, and a manifest with
//! content hashes allows the run to be replayed and verified.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimation::{
    bootstrap_moment_variance, diagonal_weight, moment_covariance, numerical_jacobian,
    JacobianScheme, MomentModel,
};
use crate::gmm::GmmIngredients;
use crate::report::{self, render_blocked, render_parameter, render_rows, write_atomic};
use crate::retirement::{
    self, PlanDistribution, RetirementEstimateOptions, RetirementModel, RetirementParams,
    RetirementSample, RetirementSettings,
};
use crate::sensitivity::{full_report, SensitivityReport};
use crate::{probit, weibull};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// `W = S⁻¹`.
    Optimal,
    /// `W = diag(S)⁻¹`.
    Diagonal,
}

impl Weighting {
    pub fn name(self) -> &'static str {
        match self {
            Weighting::Optimal => "optimal",
            Weighting::Diagonal => "diagonal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Probit,
    Weibull,
    Retire,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RetireStage {
    Simulate,
    Estimate,
    Sensitivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Observations (probit, Weibull) or synthetic households (retirement).
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_weighting")]
    pub weighting: Weighting,
    /// File name of the long-format sensitivity CSV inside the output directory.
    #[serde(default = "default_sensitivity_name")]
    pub sensitivity_csv: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retire: Option<RetireConfig>,
}

fn default_weighting() -> Weighting {
    Weighting::Optimal
}

fn default_sensitivity_name() -> String {
    "sensitivity.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetireConfig {
    pub stage: RetireStage,
    pub rho: f64,
    pub t_max: i32,
    #[serde(default = "default_interview_year")]
    pub interview_year: i32,
    #[serde(default = "default_s_sim")]
    pub s_sim: usize,
    #[serde(default = "default_bootstrap_b")]
    pub bootstrap_b: usize,
    /// Seed of the common random numbers; defaults to `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_seed: Option<u64>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_gn")]
    pub gauss_newton_iters: usize,
    /// Draws for a final polishing run after the search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_s_sim: Option<usize>,
    /// Household CSV; synthetic households are drawn when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// SHA-256 of `data`, recorded in manifests and checked on replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_sha256: Option<String>,
    /// Parameter values by label; missing labels keep the reference values.
    #[serde(default)]
    pub theta_star: BTreeMap<String, f64>,
    /// Starting values by label; missing labels start at `theta_star`.
    #[serde(default)]
    pub theta_start: BTreeMap<String, f64>,
}

fn default_interview_year() -> i32 {
    2001
}
fn default_s_sim() -> usize {
    200
}
fn default_bootstrap_b() -> usize {
    200
}
fn default_restarts() -> usize {
    RetirementEstimateOptions::default().restarts
}
fn default_max_evals() -> usize {
    RetirementEstimateOptions::default().max_evals
}
fn default_gn() -> usize {
    RetirementEstimateOptions::default().gauss_newton_iters
}

impl RetireConfig {
    pub fn new(stage: RetireStage) -> Self {
        toml::from_str(&format!("stage = \"{stage:?}\"\nrho = 0.96\nt_max = 80\n").to_lowercase())
            .expect("default retirement config parses")
    }

    pub fn settings(&self, seed: u64) -> RetirementSettings {
        RetirementSettings {
            rho: self.rho,
            t_max: self.t_max,
            interview_year: self.interview_year,
            s_sim: self.s_sim,
            sim_seed: self.sim_seed.unwrap_or(seed),
        }
    }

    fn params_from(&self, base: &[f64], table: &BTreeMap<String, f64>, what: &str) -> Result<RetirementParams> {
        let labels = retirement::param_labels();
        let mut v = base.to_vec();
        for (k, val) in table {
            let i = labels
                .iter()
                .position(|l| l == k)
                .ok_or_else(|| Error::Invalid(format!("{what}: unknown parameter `{k}`")))?;
            v[i] = *val;
        }
        RetirementParams::from_slice(&v)
    }

    pub fn theta_star(&self) -> Result<RetirementParams> {
        self.params_from(&RetirementParams::reference().to_vec(), &self.theta_star, "theta_star")
    }

    pub fn theta_start(&self) -> Result<RetirementParams> {
        self.params_from(&self.theta_star()?.to_vec(), &self.theta_start, "theta_start")
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, n: usize, seed: u64, weighting: Weighting) -> Self {
        Self {
            experiment,
            n,
            seed,
            weighting,
            sensitivity_csv: default_sensitivity_name(),
            retire: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Invalid(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Invalid("config: `n` must be at least 1".into()));
        }
        let name = Path::new(&self.sensitivity_csv);
        if name.components().count() != 1 || self.sensitivity_csv.is_empty() {
            return Err(Error::Invalid(
                "config: `sensitivity_csv` must be a plain file name".into(),
            ));
        }
        match (self.experiment, &self.retire) {
            (ExperimentKind::Retire, None) => {
                Err(Error::Invalid("config: retirement runs need a `[retire]` table".into()))
            }
            (ExperimentKind::Retire, Some(r)) => {
                if self.weighting != Weighting::Diagonal {
                    return Err(Error::Invalid(
                        "config: retirement runs use the bootstrap diagonal weight; set `weighting = \"diagonal\"`".into(),
                    ));
                }
                r.settings(self.seed).validate()?;
                if r.bootstrap_b < 2 {
                    return Err(Error::Invalid("config: `bootstrap_b` must be at least 2".into()));
                }
                r.theta_start()?.omega_factor()?;
                r.theta_star()?.omega_factor().map(|_| ())
            }
            (_, Some(_)) => Err(Error::Invalid(
                "config: `[retire]` is only valid with experiment = \"retire\"".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// `(G, S, W)` at `θ` with a smooth finite-difference Jacobian.
pub fn ingredients_at<M: MomentModel>(
    model: &M,
    data: &M::Data,
    theta: &[f64],
    weighting: Weighting,
) -> Result<GmmIngredients> {
    let (_, s) = moment_covariance(model, data, theta)?;
    let g = numerical_jacobian(model, data, theta, JacobianScheme::Smooth)?;
    match weighting {
        Weighting::Optimal => GmmIngredients::with_optimal_weight(g, s),
        Weighting::Diagonal => {
            let w = diagonal_weight(&s)?;
            GmmIngredients::new(g, s, w)
        }
    }
}

/// Sensitivity report of the probit model at the truth.
pub fn probit_report(n: usize, seed: u64, weighting: Weighting) -> Result<(GmmIngredients, SensitivityReport)> {
    let data = probit::simulate_probit(n, seed);
    let model = probit::ProbitModel;
    let ing = ingredients_at(&model, &data, &probit::ProbitParams::truth().to_vec(), weighting)?;
    let rep = full_report(&ing, &model.param_labels(), &model.moment_labels())?;
    Ok((ing, rep))
}

/// Sensitivity report of the Weibull model at the truth.
pub fn weibull_report(n: usize, seed: u64, weighting: Weighting) -> Result<(GmmIngredients, SensitivityReport)> {
    let data = weibull::simulate_weibull(n, seed);
    let model = weibull::WeibullModel;
    let ing = ingredients_at(&model, &data, &weibull::WeibullParams::truth().to_vec(), weighting)?;
    let rep = full_report(&ing, &model.param_labels(), &model.moment_labels())?;
    Ok((ing, rep))
}

/// Files written by a run, relative to its output directory, with hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub config: ExperimentConfig,
    /// Retirement model constants, echoed for convenience.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<i32>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Invalid(format!("manifest: {}", e.message())))?;
        m.config.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Full sensitivity report, when the run produced one.
    pub report: Option<SensitivityReport>,
    /// One-line summaries for the console.
    pub summary: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

struct Writer<'a> {
    dir: &'a Path,
    outputs: BTreeMap<String, String>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, text: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), text.as_bytes())?;
        self.outputs.insert(name.to_string(), sha256_hex(text.as_bytes()));
        Ok(())
    }

    fn ingredients(&mut self, ing: &GmmIngredients) -> Result<()> {
        self.put("G.csv", &report::matrix_to_csv(ing.g()))?;
        self.put("S.csv", &report::matrix_to_csv(ing.s()))?;
        self.put("W.csv", &report::matrix_to_csv(ing.w()))
    }
}

fn header_notes(cfg: &ExperimentConfig) -> Vec<String> {
    let mut v = vec![format!(
        "n = {}, seed = {}, weighting = {}.",
        cfg.n,
        cfg.seed,
        cfg.weighting.name()
    )];
    if let Some(r) = &cfg.retire {
        v.push(format!(
            "rho = {}, t_max = {}, interview year = {}, S_sim = {}, B = {}.",
            r.rho, r.t_max, r.interview_year, r.s_sim, r.bootstrap_b
        ));
    }
    v
}

/// Runs one experiment and writes its artifacts and manifest into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    let mut w = Writer {
        dir: out_dir,
        outputs: BTreeMap::new(),
    };
    let notes = header_notes(&cfg);
    let mut summary = Vec::new();
    let report = match cfg.experiment {
        ExperimentKind::Probit => {
            let (ing, rep) = probit_report(cfg.n, cfg.seed, cfg.weighting)?;
            w.ingredients(&ing)?;
            w.put(&cfg.sensitivity_csv, &report::report_to_csv(&rep))?;
            let title = format!("Sensitivity measures, probit model, {} weighting", cfg.weighting.name());
            w.put("tables.md", &render_blocked(&rep, &title, &notes))?;
            Some(rep)
        }
        ExperimentKind::Weibull => {
            let data = weibull::simulate_weibull(cfg.n, cfg.seed);
            let model = weibull::WeibullModel;
            let ing = ingredients_at(&model, &data, &weibull::WeibullParams::truth().to_vec(), cfg.weighting)?;
            let rep = full_report(&ing, &model.param_labels(), &model.moment_labels())?;
            w.ingredients(&ing)?;
            w.put(&cfg.sensitivity_csv, &report::report_to_csv(&rep))?;
            let d = weibull::duration_summary(data.column("T")?);
            let mut notes = notes;
            notes.push(format!(
                "Durations: median {:.3}, P(T < 1) = {:.3}, P(T > 2) = {:.3}.",
                d.median, d.below_1, d.above_2
            ));
            summary.push(notes.last().cloned().unwrap_or_default());
            let title = format!("Sensitivity measures, Weibull model, {} weighting", cfg.weighting.name());
            w.put("tables.md", &render_blocked(&rep, &title, &notes))?;
            Some(rep)
        }
        ExperimentKind::Retire => run_retire(&mut cfg, &mut w, &notes, &mut summary)?,
    };
    let retire = cfg.retire.as_ref();
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        rho: retire.map(|r| r.rho),
        t_max: retire.map(|r| r.t_max),
        config: cfg,
        outputs: w.outputs,
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    write_atomic(&out_dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        manifest,
        report,
        summary,
    })
}

fn load_sample(cfg: &mut ExperimentConfig, params: &RetirementParams) -> Result<RetirementSample> {
    let r = cfg.retire.as_mut().expect("validated");
    let settings = r.settings(cfg.seed);
    let (households, plans) = match &r.data {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            let hash = sha256_hex(&bytes);
            if let Some(want) = &r.data_sha256 {
                if *want != hash {
                    return Err(Error::Invalid(format!(
                        "data file {} changed since the manifest was written",
                        path.display()
                    )));
                }
            }
            r.data_sha256 = Some(hash);
            retirement::read_households(path)?
        }
        None => (
            retirement::synthetic_population(
                cfg.n,
                cfg.seed,
                &retirement::PopulationTargets::default(),
                settings.interview_year,
            ),
            None,
        ),
    };
    let (r_h, r_w) = match plans {
        Some(p) if r.stage != RetireStage::Simulate => p,
        _ => retirement::simulate_data(&households, params, &settings, cfg.seed)?,
    };
    RetirementSample::new(households, r_h, r_w)
}

fn histogram_csv(observed: &PlanDistribution, simulated: &PlanDistribution) -> String {
    let mut out = String::from("age,data_h,sim_h,data_w,sim_w\n");
    for k in 0..retirement::N_AGES {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            retirement::R_MIN + k as i32,
            report::fmt_full(observed.r_h[k]),
            report::fmt_full(simulated.r_h[k]),
            report::fmt_full(observed.r_w[k]),
            report::fmt_full(simulated.r_w[k])
        );
    }
    out
}

fn gap_csv(observed: &PlanDistribution, simulated: &PlanDistribution) -> String {
    let mut gaps: Vec<i32> = observed.gaps.iter().chain(&simulated.gaps).map(|g| g.0).collect();
    gaps.sort_unstable();
    gaps.dedup();
    let share = |d: &PlanDistribution, g: i32| d.gaps.iter().find(|x| x.0 == g).map_or(0.0, |x| x.1);
    let mut out = String::from("calendar_gap,data,sim\n");
    for g in gaps {
        let _ = writeln!(
            out,
            "{g},{},{}",
            report::fmt_full(share(observed, g)),
            report::fmt_full(share(simulated, g))
        );
    }
    out
}

fn vector_csv(labels: &[String], values: &[f64], name: &str) -> String {
    let mut out = format!("index,label,{name}\n");
    for (k, (l, v)) in labels.iter().zip(values).enumerate() {
        let _ = writeln!(out, "{},{l},{}", k + 1, report::fmt_full(*v));
    }
    out
}

fn run_retire(
    cfg: &mut ExperimentConfig,
    w: &mut Writer<'_>,
    notes: &[String],
    summary: &mut Vec<String>,
) -> Result<Option<SensitivityReport>> {
    let stage = cfg.retire.as_ref().expect("validated").stage;
    let star = cfg.retire.as_ref().expect("validated").theta_star()?;
    let sample = load_sample(cfg, &star)?;
    let r = cfg.retire.clone().expect("validated");
    let settings = r.settings(cfg.seed);
    let observed = PlanDistribution::observed(&sample);
    summary.push(format!("{} households", sample.len()));
    match stage {
        RetireStage::Simulate => {
            let mut buf = Vec::new();
            retirement::write_households(&mut buf, &sample.households, Some((&sample.r_h, &sample.r_w)))?;
            w.put("households.csv", std::str::from_utf8(&buf).expect("csv is utf-8"))?;
            let model = RetirementModel::new(settings, sample.len());
            let sim = model.plan_distribution(&sample, &star)?;
            w.put("plan_histogram.csv", &histogram_csv(&observed, &sim))?;
            w.put("gap_histogram.csv", &gap_csv(&observed, &sim))?;
            Ok(None)
        }
        RetireStage::Estimate => {
            let opts = RetirementEstimateOptions {
                bootstrap_b: r.bootstrap_b,
                restarts: r.restarts,
                seed: cfg.seed,
                max_evals: r.max_evals,
                gauss_newton_iters: r.gauss_newton_iters,
                final_s_sim: r.final_s_sim,
                ..Default::default()
            };
            let start = r.theta_start()?.to_vec();
            let est = retirement::estimate(&sample, &settings, &start, &opts)?;
            let labels = retirement::param_labels();
            let theta = &est.result.theta_hat;
            let mut params = String::from("parameter,estimate,std_error,ci_low,ci_high\n");
            let mut rows = Vec::new();
            for (k, (l, t, se)) in retirement::parameter_table(&est).into_iter().enumerate() {
                let (lo, hi) = est.confidence_interval(k);
                let _ = writeln!(
                    params,
                    "{l},{},{},{},{}",
                    report::fmt_full(t),
                    report::fmt_full(se),
                    report::fmt_full(lo),
                    report::fmt_full(hi)
                );
                rows.push((l, vec![t, se]));
            }
            w.put("parameters.csv", &params)?;
            let final_model = RetirementModel::new(est.settings, sample.len());
            let hat = RetirementParams::from_slice(theta)?;
            let g = crate::estimation::mean_moments(&final_model, &sample, theta)?;
            w.put("moments.csv", &vector_csv(&retirement::moment_labels(), g.as_slice(), "g"))?;
            w.ingredients(&est.result.ingredients)?;
            let sens = retirement::gamma_sensitivity(&est)?;
            w.put(&cfg.sensitivity_csv, &report::report_to_csv(&sens))?;
            let sim = final_model.plan_distribution(&sample, &hat)?;
            w.put("plan_histogram.csv", &histogram_csv(&observed, &sim))?;
            w.put("gap_histogram.csv", &gap_csv(&observed, &sim))?;
            let mut notes = notes.to_vec();
            notes.push(format!(
                "Criterion {:.6} after {} evaluations{}.",
                est.result.criterion_value,
                est.result.n_evals,
                if est.result.converged { "" } else { " (budget reached)" }
            ));
            let md = format!(
                "{}\n{}",
                render_rows("Estimation results", &["parameter", "estimate", "std. error"], &rows, &notes),
                render_parameter(&sens, 0, "Sensitivity of gamma", &[])
            );
            w.put("tables.md", &md)?;
            let (lo, hi) = est.confidence_interval(0);
            summary.push(format!("gamma = {:.4} (95% CI {:.4} to {:.4})", theta[0], lo, hi));
            let _ = labels;
            Ok(Some(sens))
        }
        RetireStage::Sensitivity => {
            let model = RetirementModel::new(settings, sample.len());
            let theta = star.to_vec();
            let var = bootstrap_moment_variance(&model, &sample, &theta, r.bootstrap_b, cfg.seed)?;
            let wmat = DMatrix::from_diagonal(&var.map(|v| 1.0 / v));
            let (_, s) = moment_covariance(&model, &sample, &theta)?;
            let g = numerical_jacobian(&model, &sample, &theta, JacobianScheme::Simulated)?;
            let ing = GmmIngredients::new(g, s, wmat)?;
            let d = ing.equilibrating_scales();
            let rep = full_report(&ing.rescaled(&d)?, &retirement::param_labels(), &retirement::moment_labels())?
                .unscaled(&d);
            w.ingredients(&ing)?;
            w.put(&cfg.sensitivity_csv, &report::report_to_csv(&rep))?;
            let gm = crate::estimation::mean_moments(&model, &sample, &theta)?;
            w.put("moments.csv", &vector_csv(&retirement::moment_labels(), gm.as_slice(), "g"))?;
            w.put("tables.md", &render_parameter(&rep, 0, "Sensitivity of gamma at theta_star", notes))?;
            Ok(Some(rep))
        }
    }
}

/// Result of re-running a manifest.
#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub run: RunOutcome,
    /// Files whose content differs from the manifest, or that are missing.
    pub mismatches: Vec<String>,
}

impl ReplayOutcome {
    pub fn identical(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-runs the configuration stored in a manifest into `out_dir` and
/// compares every output hash.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<ReplayOutcome> {
    let old = Manifest::load(manifest_path)?;
    let run = run_experiment(&old.config, out_dir)?;
    let mut mismatches = Vec::new();
    for (name, hash) in &old.outputs {
        match run.manifest.outputs.get(name) {
            Some(h) if h == hash => {}
            Some(_) => mismatches.push(format!("{name}: content differs")),
            None => mismatches.push(format!("{name}: not produced")),
        }
    }
    for name in run.manifest.outputs.keys() {
        if !old.outputs.contains_key(name) {
            mismatches.push(format!("{name}: not in the original manifest"));
        }
    }
    Ok(ReplayOutcome { run, mismatches })
}

/// Sensitivity report from ingredient CSVs in the `j,k,value` format.
/// Writes the long-format CSV and a blocked Markdown table into `out_dir`.
pub fn sensitivity_from_matrices(g: &Path, s: &Path, w: &Path, out_dir: &Path) -> Result<SensitivityReport> {
    let ing = GmmIngredients::new(report::read_matrix(g)?, report::read_matrix(s)?, report::read_matrix(w)?)?;
    let params: Vec<String> = (1..=ing.n_params()).map(|i| format!("theta{i}")).collect();
    let moments: Vec<String> = (1..=ing.n_moments()).map(|k| format!("m{k}")).collect();
    let rep = full_report(&ing, &params, &moments)?;
    write_atomic(&out_dir.join(default_sensitivity_name()), report::report_to_csv(&rep).as_bytes())?;
    let md = render_blocked(&rep, "Sensitivity measures", &[format!("Ingredients read from {}.", g.display())]);
    write_atomic(&out_dir.join("tables.md"), md.as_bytes())?;
    Ok(rep)
}

/// Shipped golden tables: `(name, experiment, weighting, csv)`.
pub const GOLDENS: [(&str, ExperimentKind, Weighting, &str); 4] = [
    ("probit_optimal", ExperimentKind::Probit, Weighting::Optimal, include_str!("../goldens/probit_optimal.csv")),
    ("probit_diagonal", ExperimentKind::Probit, Weighting::Diagonal, include_str!("../goldens/probit_diagonal.csv")),
    ("weibull_optimal", ExperimentKind::Weibull, Weighting::Optimal, include_str!("../goldens/weibull_optimal.csv")),
    ("weibull_diagonal", ExperimentKind::Weibull, Weighting::Diagonal, include_str!("../goldens/weibull_diagonal.csv")),
];

/// Runs the four golden experiments at `n` draws and compares each with its table.
pub fn check_goldens(n: usize, seed: u64, policy: &report::TolerancePolicy) -> Result<Vec<report::GoldenReport>> {
    GOLDENS
        .iter()
        .map(|(name, kind, weighting, text)| {
            let (_, rep) = match kind {
                ExperimentKind::Probit => probit_report(n, seed, *weighting)?,
                _ => weibull_report(n, seed, *weighting)?,
            };
            let golden = report::GoldenTable::parse(name, text)?;
            report::golden_check(&rep, &golden, policy)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::from_toml("experiment = \"probit\"\nn = 100\nseed = 3\n").unwrap();
        assert_eq!(cfg.weighting, Weighting::Optimal);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let err = ExperimentConfig::from_toml("experiment = \"probit\"\nseed = 3\n").unwrap_err();
        assert!(err.to_string().contains("`n`"), "{err}");
        assert!(ExperimentConfig::from_toml("experiment = \"probit\"\nn = 0\nseed = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"probit\"\nn = 1\nseed = 3\nfoo = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"retire\"\nn = 1\nseed = 3\n").is_err());
    }

    #[test]
    fn retire_config_requires_rho_and_t_max() {
        let base = "experiment = \"retire\"\nn = 10\nseed = 1\nweighting = \"diagonal\"\n[retire]\nstage = \"simulate\"\n";
        let err = ExperimentConfig::from_toml(&format!("{base}t_max = 80\n")).unwrap_err();
        assert!(err.to_string().contains("rho"), "{err}");
        let cfg = ExperimentConfig::from_toml(&format!(
            "{base}rho = 0.96\nt_max = 80\n[retire.theta_star]\ngamma = 0.5\n"
        ))
        .unwrap();
        assert_eq!(cfg.retire.as_ref().unwrap().theta_star().unwrap().gamma, 0.5);
        let bad = format!("{base}rho = 0.96\nt_max = 80\n[retire.theta_star]\nnope = 0.5\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        assert_eq!(RetireConfig::new(RetireStage::Estimate).rho, 0.96);
    }
}
