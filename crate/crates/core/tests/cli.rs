use std::path::Path;
use std::process::{Command, Output};

use momentinfo::report::{read_matrix, report_from_csv};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_momentinfo"));
    c.env_remove("MOMENTINFO_OUT_DIR");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn probit_run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("probit");
    let o = run(bin().args(["--out-dir", out.to_str().unwrap(), "probit", "--n", "2e4", "--weighting", "diagonal"]));
    assert!(o.status.success(), "{}", text(&o));
    for f in ["G.csv", "S.csv", "W.csv", "sensitivity.csv", "tables.md", "manifest.toml"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert_eq!(read_matrix(&out.join("G.csv")).unwrap().shape(), (6, 3));
    let md = read(&out.join("tables.md"));
    assert!(md.contains("| **E4** |") && md.contains("| beta1 |"), "{md}");
    let manifest = read(&out.join("manifest.toml"));
    assert!(manifest.contains("n = 20000") && manifest.contains("seed = 0") && manifest.contains("version ="));
}

#[test]
fn output_dir_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin().env("MOMENTINFO_OUT_DIR", dir.path()).args(["weibull", "--n", "5000"]));
    assert!(o.status.success(), "{}", text(&o));
    assert!(dir.path().join("sensitivity.csv").exists());
    assert!(text(&o).contains("Durations: median"));
}

#[test]
fn config_missing_n_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"probit\"\nseed = 1\n").unwrap();
    let o = run(bin().args(["--out-dir", dir.path().to_str().unwrap(), "probit", "--config", cfg.to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("missing field `n`"), "{}", text(&o));
}

#[test]
fn usage_errors_exit_2() {
    for args in [vec!["probit"], vec!["probit", "--n", "1.5"], vec!["frobnicate"], vec!["retire", "simulate"]] {
        let o = run(bin().args(&args));
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", text(&o));
    }
}

#[test]
fn from_matrices_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(bin().args(["--out-dir", a.to_str().unwrap(), "probit", "--n", "20000"])).status.success());
    let o = run(bin().args([
        "--out-dir",
        b.to_str().unwrap(),
        "sensitivity",
        "--from-matrices",
        a.join("G.csv").to_str().unwrap(),
        a.join("S.csv").to_str().unwrap(),
        a.join("W.csv").to_str().unwrap(),
    ]));
    assert!(o.status.success(), "{}", text(&o));
    let x = report_from_csv(&read(&a.join("sensitivity.csv"))).unwrap();
    let y = report_from_csv(&read(&b.join("sensitivity.csv"))).unwrap();
    for (bx, by) in x.blocks().iter().zip(y.blocks()) {
        assert_eq!(bx.status, by.status);
        for (u, v) in bx.values.iter().zip(by.values.iter()) {
            assert!(u.to_bits() == v.to_bits() || (u.is_nan() && v.is_nan()));
        }
    }
}

#[test]
fn rank_deficient_ingredients_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let w = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_string()
    };
    let g = w("G.csv", "j,k,value\n1,1,1\n1,2,2\n2,1,2\n2,2,4\n3,1,3\n3,2,6\n");
    let eye = "j,k,value\n1,1,1\n1,2,0\n1,3,0\n2,1,0\n2,2,1\n2,3,0\n3,1,0\n3,2,0\n3,3,1\n";
    let s = w("S.csv", eye);
    let wm = w("W.csv", eye);
    let o = run(bin().args(["--out-dir", dir.path().to_str().unwrap(), "sensitivity", "--from-matrices", &g, &s, &wm]));
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("full column rank"), "{}", text(&o));
}

#[test]
fn replay_reports_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert!(run(bin().args(["--out-dir", a.to_str().unwrap(), "weibull", "--n", "10000", "--seed", "4"])).status.success());
    let o = run(bin().args([
        "--threads",
        "2",
        "--out-dir",
        dir.path().join("b").to_str().unwrap(),
        "replay",
        "--manifest",
        a.join("manifest.toml").to_str().unwrap(),
    ]));
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("replay identical"));
}

#[test]
fn check_goldens_on_a_produced_table() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert!(run(bin().args(["--out-dir", a.to_str().unwrap(), "probit", "--n", "1e6", "--weighting", "diagonal"])).status.success());
    let golden = concat!(env!("CARGO_MANIFEST_DIR"), "/goldens/probit_diagonal.csv");
    let produced = a.join("sensitivity.csv");
    let o = run(bin().args(["check-goldens", "--n", "1e6", "--produced", produced.to_str().unwrap(), "--golden", golden]));
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("probit_diagonal: PASS"));
    let wrong = concat!(env!("CARGO_MANIFEST_DIR"), "/goldens/weibull_diagonal.csv");
    let o = run(bin().args(["check-goldens", "--produced", produced.to_str().unwrap(), "--golden", wrong]));
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("shape mismatch"));
}

#[test]
fn retire_stages_run_from_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("retire.toml");
    std::fs::write(
        &cfg,
        "experiment = \"retire\"\nn = 120\nseed = 2\nweighting = \"diagonal\"\n\n[retire]\nstage = \"simulate\"\nrho = 0.96\nt_max = 80\ns_sim = 10\nbootstrap_b = 10\nmax_evals = 20\nrestarts = 0\ngauss_newton_iters = 1\n",
    )
    .unwrap();
    let sim = dir.path().join("sim");
    let o = run(bin().args(["--out-dir", sim.to_str().unwrap(), "retire", "simulate", "--config", cfg.to_str().unwrap()]));
    assert!(o.status.success(), "{}", text(&o));
    assert!(read(&sim.join("households.csv")).lines().next().unwrap().ends_with("r_h,r_w"));
    assert!(read(&sim.join("plan_histogram.csv")).starts_with("age,data_h,sim_h,data_w,sim_w"));

    let est = dir.path().join("est");
    let data = sim.join("households.csv");
    let o = run(bin().args([
        "--out-dir",
        est.to_str().unwrap(),
        "retire",
        "estimate",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]));
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("gamma = "));
    let params = read(&est.join("parameters.csv"));
    assert_eq!(params.lines().count(), 35);
    assert!(params.lines().nth(1).unwrap().starts_with("gamma,"));
    assert_eq!(read_matrix(&est.join("G.csv")).unwrap().shape(), (52, 34));
    let manifest = read(&est.join("manifest.toml"));
    assert!(manifest.contains("rho = 0.96") && manifest.contains("t_max = 80") && manifest.contains("data_sha256"));
    let tables = read(&est.join("tables.md"));
    assert!(tables.contains("rho = 0.96, t_max = 80"));
}

#[test]
fn retire_config_without_rho_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("retire.toml");
    std::fs::write(&cfg, "experiment = \"retire\"\nn = 10\nseed = 2\nweighting = \"diagonal\"\n[retire]\nstage = \"simulate\"\nt_max = 80\n").unwrap();
    let o = run(bin().args(["--out-dir", dir.path().to_str().unwrap(), "retire", "simulate", "--config", cfg.to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("rho"), "{}", text(&o));
}
