use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use momentinfo::error::{Error, Result};
use momentinfo::experiment::{
    self, ExperimentConfig, ExperimentKind, RetireConfig, RetireStage, RunOutcome, Weighting,
};
use momentinfo::report::{self, GoldenTable, TolerancePolicy};

/// Draws used by `check-goldens` by default and with `--paper-scale`.
const CI_DRAWS: usize = 1_000_000;
const PAPER_DRAWS: usize = report::PAPER_SCALE_DRAWS;

#[derive(Parser, Debug)]
#[command(name = "momentinfo", version, about = "Moment informativeness measures for GMM estimators")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "MOMENTINFO_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct SmoothArgs {
    /// Sample size; accepts forms like `1e6`.
    #[arg(long, value_parser = parse_count, required_unless_present = "config")]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Weighting::Optimal)]
    weighting: Weighting,
    /// TOML config; overrides the other flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bivariate-covariate probit experiment.
    Probit(SmoothArgs),
    /// Mixed proportional hazard experiment.
    Weibull(SmoothArgs),
    /// Joint retirement model.
    Retire {
        #[arg(value_enum)]
        stage: RetireStage,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Household CSV; overrides the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_count)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// 500 bootstrap draws and a 2000-draw final polish.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Measures from stored ingredients.
    Sensitivity {
        #[arg(long, num_args = 3, value_names = ["G", "S", "W"], required = true)]
        from_matrices: Vec<PathBuf>,
    },
    /// Compare fresh probit and Weibull runs, or a produced CSV, with the golden tables.
    CheckGoldens {
        #[arg(long, value_parser = parse_count)]
        n: Option<usize>,
        #[arg(long)]
        paper_scale: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Long-format sensitivity CSV to check instead of a fresh run; `--n`
        /// then selects the tolerance tier (default: published draw count).
        #[arg(long, requires = "golden")]
        produced: Option<PathBuf>,
        #[arg(long, requires = "produced")]
        golden: Option<PathBuf>,
    },
    /// Re-run a manifest and verify every output hash.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if v.fract() != 0.0 || !(1.0..=1e15).contains(&v) {
        return Err(format!("`{s}` is not a positive whole number"));
    }
    Ok(v as usize)
}

fn smooth_config(kind: ExperimentKind, a: &SmoothArgs) -> Result<ExperimentConfig> {
    let cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(kind, a.n.expect("required by clap"), a.seed, a.weighting),
    };
    if cfg.experiment != kind {
        return Err(Error::Invalid(format!("config describes a {:?} experiment", cfg.experiment)));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_run(run: &RunOutcome) {
    for s in &run.summary {
        println!("{s}");
    }
    if let Some(r) = &run.report {
        if run.manifest.config.experiment != ExperimentKind::Retire {
            let e2 = r.e(2);
            let diag: Vec<String> = (0..r.n_params().min(r.n_moments()))
                .map(|i| format!("{:.3}", e2[(i, i)]))
                .collect();
            println!("E2 diagonal: ({})", diag.join(", "));
        }
    }
    println!(
        "wrote {} files and {} to {}",
        run.manifest.outputs.len(),
        experiment::MANIFEST_FILE,
        run.out_dir.display()
    );
}

fn retire_config(
    stage: RetireStage,
    config: Option<&Path>,
    data: Option<PathBuf>,
    n: Option<usize>,
    seed: Option<u64>,
    paper_scale: bool,
) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let mut c = ExperimentConfig::new(
                ExperimentKind::Retire,
                n.ok_or_else(|| Error::Invalid("retire needs --config or --n".into()))?,
                seed.unwrap_or(0),
                Weighting::Diagonal,
            );
            c.retire = Some(RetireConfig::new(stage));
            c
        }
    };
    if cfg.experiment != ExperimentKind::Retire {
        return Err(Error::Invalid(format!("config describes a {:?} experiment", cfg.experiment)));
    }
    if let Some(n) = n {
        cfg.n = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let r = cfg.retire.as_mut().expect("validated on load");
    r.stage = stage;
    if data.is_some() {
        r.data = data;
        r.data_sha256 = None;
    }
    if paper_scale {
        r.bootstrap_b = 500;
        r.final_s_sim = Some(2000);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_goldens(n: usize, seed: u64) -> Result<bool> {
    let reports = experiment::check_goldens(n, seed, &TolerancePolicy::for_draws(n))?;
    let mut ok = true;
    for r in &reports {
        print!("{r}");
        ok &= r.passed();
    }
    Ok(ok)
}

fn check_produced(produced: &Path, golden: &Path, policy: &TolerancePolicy) -> Result<bool> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        })
    };
    let rep = report::report_from_csv(&read(produced)?)?;
    let name = golden.file_stem().map_or("golden".into(), |s| s.to_string_lossy().into_owned());
    let g = GoldenTable::parse(&name, &read(golden)?)?;
    let r = report::golden_check(&rep, &g, policy)?;
    print!("{r}");
    Ok(r.passed())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Probit(a) => print_run(&experiment::run_experiment(&smooth_config(ExperimentKind::Probit, &a)?, out)?),
        Command::Weibull(a) => print_run(&experiment::run_experiment(&smooth_config(ExperimentKind::Weibull, &a)?, out)?),
        Command::Retire {
            stage,
            config,
            data,
            n,
            seed,
            paper_scale,
        } => {
            let cfg = retire_config(stage, config.as_deref(), data, n, seed, paper_scale)?;
            print_run(&experiment::run_experiment(&cfg, out)?);
        }
        Command::Sensitivity { from_matrices: m } => {
            let rep = experiment::sensitivity_from_matrices(&m[0], &m[1], &m[2], out)?;
            println!(
                "{} parameters, {} moments; wrote sensitivity.csv and tables.md to {}",
                rep.n_params(),
                rep.n_moments(),
                out.display()
            );
        }
        Command::CheckGoldens {
            n,
            paper_scale,
            seed,
            produced,
            golden,
        } => {
            let ok = match (produced, golden) {
                (Some(p), Some(g)) => check_produced(&p, &g, &TolerancePolicy::for_draws(n.unwrap_or(PAPER_DRAWS)))?,
                _ => check_goldens(n.unwrap_or(if paper_scale { PAPER_DRAWS } else { CI_DRAWS }), seed)?,
            };
            if !ok {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Replay { manifest } => {
            let r = experiment::replay(&manifest, out)?;
            print_run(&r.run);
            if r.identical() {
                println!("replay identical: all {} outputs match", r.run.manifest.outputs.len());
            } else {
                for m in &r.mismatches {
                    eprintln!("mismatch: {m}");
                }
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
