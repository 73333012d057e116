use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;

use super::N_COVARIATES;
use crate::error::{Error, Result};
use crate::estimation::Dataset;
use crate::rng;

/// Covariate order within `x_h` and `x_w`. The first seven are the
/// member's own characteristics, the last three describe the spouse.
pub const COVARIATE_NAMES: [&str; N_COVARIATES] = [
    "high_skilled",
    "gp10",
    "worse_health",
    "labor_income",
    "ppp",
    "eps",
    "birth_year",
    "spouse_labor_income",
    "spouse_ppp",
    "spouse_eps",
];

/// Index of the own birth-year covariate (birth year minus 1955).
const BIRTH_YEAR: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Household {
    pub cohort_h: i32,
    pub cohort_w: i32,
    pub age_h: i32,
    pub age_w: i32,
    pub x_h: [f64; N_COVARIATES],
    pub x_w: [f64; N_COVARIATES],
    /// Wife's state pension age.
    pub spa_w: f64,
}

/// State pension age of a woman born in `cohort`: 60 before 1950, 65 from
/// 1955, rising one month per month of birth in between (mid-year birth).
pub fn spa_w(cohort: i32) -> f64 {
    if cohort < 1950 {
        60.0
    } else if cohort >= 1955 {
        65.0
    } else {
        60.0 + f64::from(cohort - 1950) + 0.25
    }
}

/// Marginal laws for synthetic covariates, husband then wife.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationTargets {
    pub high_skilled: [f64; 2],
    pub gp10: [f64; 2],
    pub worse_health: [f64; 2],
    pub income_mean: [f64; 2],
    pub income_sd: [f64; 2],
    pub ppp: [f64; 2],
    pub eps: [f64; 2],
    pub age_min: i32,
    pub age_max: i32,
    /// Mean of the gap law before truncation to the age range; 1.75 yields
    /// a realized mean gap of about 1.5 years.
    pub age_gap_mean: f64,
    pub age_gap_sd: f64,
}

impl Default for PopulationTargets {
    fn default() -> Self {
        Self {
            high_skilled: [0.157, 0.139],
            gp10: [0.039, 0.080],
            worse_health: [0.182, 0.115],
            income_mean: [25.248, 13.815],
            income_sd: [17.12, 10.78],
            ppp: [0.280, 0.134],
            eps: [0.514, 0.466],
            age_min: 40,
            age_max: 59,
            age_gap_mean: 1.75,
            age_gap_sd: 3.0,
        }
    }
}

fn lognormal(mean: f64, sd: f64) -> LogNormal<f64> {
    let s2 = (1.0 + (sd / mean).powi(2)).ln();
    LogNormal::new(mean.ln() - 0.5 * s2, s2.sqrt()).expect("positive scale")
}

/// Draws `n` households with independent covariates; ages anchor cohorts
/// at `interview_year`.
pub fn synthetic_population(
    n: usize,
    seed: u64,
    targets: &PopulationTargets,
    interview_year: i32,
) -> Vec<Household> {
    let income = [
        lognormal(targets.income_mean[0], targets.income_sd[0]),
        lognormal(targets.income_mean[1], targets.income_sd[1]),
    ];
    let gap = Normal::new(targets.age_gap_mean, targets.age_gap_sd).expect("finite gap law");
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            // Redraw the couple until both ages fall in range.
            let (age_h, age_w) = loop {
                let a_h = r.random_range(targets.age_min..=targets.age_max);
                let a_w = a_h - gap.sample(&mut r).round() as i32;
                if (targets.age_min..=targets.age_max).contains(&a_w) {
                    break (a_h, a_w);
                }
            };
            let mut own = [[0.0; 6]; 2];
            for (m, o) in own.iter_mut().enumerate() {
                let mut bern = |p: f64| f64::from(u8::from(r.random::<f64>() < p));
                o[0] = bern(targets.high_skilled[m]);
                o[1] = bern(targets.gp10[m]);
                o[2] = bern(targets.worse_health[m]);
                o[4] = bern(targets.ppp[m]);
                o[5] = bern(targets.eps[m]);
                o[3] = income[m].sample(&mut r);
            }
            let cohort_h = interview_year - age_h;
            let cohort_w = interview_year - age_w;
            let build = |me: &[f64; 6], spouse: &[f64; 6], cohort: i32| {
                let mut x = [0.0; N_COVARIATES];
                x[..6].copy_from_slice(me);
                x[BIRTH_YEAR] = f64::from(cohort - 1955);
                x[7] = spouse[3];
                x[8] = spouse[4];
                x[9] = spouse[5];
                x
            };
            Household {
                cohort_h,
                cohort_w,
                age_h,
                age_w,
                x_h: build(&own[0], &own[1], cohort_h),
                x_w: build(&own[1], &own[0], cohort_w),
                spa_w: spa_w(cohort_w),
            }
        })
        .collect()
}

fn columns() -> Vec<String> {
    let mut c: Vec<String> = ["cohort_h", "cohort_w", "age_h", "age_w"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for who in ["h", "w"] {
        c.extend(COVARIATE_NAMES.iter().map(|n| format!("x{who}_{n}")));
    }
    c.push("spa_w".into());
    c
}

/// Writes households (and optionally planned ages `r_h`, `r_w`) as CSV.
pub fn write_households<W: std::io::Write>(
    out: W,
    households: &[Household],
    plans: Option<(&[i32], &[i32])>,
) -> Result<()> {
    let mut names = columns();
    if plans.is_some() {
        names.push("r_h".into());
        names.push("r_w".into());
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(households.len()); names.len()];
    for (i, h) in households.iter().enumerate() {
        let mut row = vec![
            f64::from(h.cohort_h),
            f64::from(h.cohort_w),
            f64::from(h.age_h),
            f64::from(h.age_w),
        ];
        row.extend_from_slice(&h.x_h);
        row.extend_from_slice(&h.x_w);
        row.push(h.spa_w);
        if let Some((rh, rw)) = plans {
            row.push(f64::from(rh[i]));
            row.push(f64::from(rw[i]));
        }
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    Dataset::new(names, cols)?.write_csv(out)
}

fn as_int(v: f64, name: &str, row: usize) -> Result<i32> {
    if v.fract() != 0.0 || !v.is_finite() || v.abs() > 1e6 {
        return Err(Error::Invalid(format!("`{name}` must be an integer (row {})", row + 1)));
    }
    Ok(v as i32)
}

/// Reads a household file. `spa_w` is derived from `cohort_w` when absent;
/// planned ages are returned when both `r_h` and `r_w` are present.
pub fn read_households(path: &Path) -> Result<(Vec<Household>, Option<(Vec<i32>, Vec<i32>)>)> {
    let d = Dataset::read_csv(path)?;
    let names = columns();
    let get = |n: &str| d.column(n);
    let cohort_h = get("cohort_h")?;
    let cohort_w = get("cohort_w")?;
    let age_h = get("age_h")?;
    let age_w = get("age_w")?;
    let xs: Vec<&[f64]> = names[4..4 + 2 * N_COVARIATES]
        .iter()
        .map(|n| get(n))
        .collect::<Result<_>>()?;
    let spa = if d.has_column("spa_w") {
        Some(get("spa_w")?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(d.n_rows());
    for i in 0..d.n_rows() {
        let cw = as_int(cohort_w[i], "cohort_w", i)?;
        let mut x_h = [0.0; N_COVARIATES];
        let mut x_w = [0.0; N_COVARIATES];
        for k in 0..N_COVARIATES {
            x_h[k] = xs[k][i];
            x_w[k] = xs[N_COVARIATES + k][i];
        }
        let h = Household {
            cohort_h: as_int(cohort_h[i], "cohort_h", i)?,
            cohort_w: cw,
            age_h: as_int(age_h[i], "age_h", i)?,
            age_w: as_int(age_w[i], "age_w", i)?,
            x_h,
            x_w,
            spa_w: spa.map_or(spa_w(cw), |s| s[i]),
        };
        if h.age_h > super::R_MAX || h.age_w > super::R_MAX {
            return Err(Error::Invalid(format!(
                "household {} has a member older than {}",
                i + 1,
                super::R_MAX
            )));
        }
        if x_h.iter().chain(&x_w).any(|v| !v.is_finite()) || !h.spa_w.is_finite() {
            return Err(Error::Invalid(format!("household {} has non-finite covariates", i + 1)));
        }
        out.push(h);
    }
    let plans = if d.has_column("r_h") && d.has_column("r_w") {
        let rh = get("r_h")?
            .iter()
            .enumerate()
            .map(|(i, v)| as_int(*v, "r_h", i))
            .collect::<Result<Vec<_>>>()?;
        let rw = get("r_w")?
            .iter()
            .enumerate()
            .map(|(i, v)| as_int(*v, "r_w", i))
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = rh.iter().chain(&rw).find(|r| !(super::R_MIN..=super::R_MAX).contains(*r)) {
            return Err(Error::Invalid(format!(
                "planned retirement age {bad} outside {}..={}",
                super::R_MIN,
                super::R_MAX
            )));
        }
        Some((rh, rw))
    } else {
        None
    };
    Ok((out, plans))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spa_schedule() {
        assert_eq!(spa_w(1945), 60.0);
        assert_eq!(spa_w(1949), 60.0);
        assert_eq!(spa_w(1952), 62.25);
        assert_eq!(spa_w(1955), 65.0);
        assert_eq!(spa_w(1960), 65.0);
        for c in 1940..1970 {
            assert!((60.0..=65.0).contains(&spa_w(c)));
            assert!(spa_w(c + 1) >= spa_w(c));
        }
    }

    #[test]
    fn population_matches_targets() {
        let pop = synthetic_population(100_000, 3, &PopulationTargets::default(), 2001);
        let n = pop.len() as f64;
        let mean = |f: &dyn Fn(&Household) -> f64| pop.iter().map(f).sum::<f64>() / n;
        assert!((mean(&|h| h.x_h[0]) - 0.157).abs() < 0.004);
        assert!((mean(&|h| h.x_h[3]) - 25.2).abs() < 0.3);
        assert!((mean(&|h| h.x_w[3]) - 13.8).abs() < 0.2);
        assert!((mean(&|h| f64::from(h.age_h - h.age_w)) - 1.5).abs() < 0.2);
        assert!(pop.iter().all(|h| (40..=59).contains(&h.age_h) && (40..=59).contains(&h.age_w)));
        assert!(pop.iter().all(|h| h.x_h[7] == h.x_w[3] && h.x_w[9] == h.x_h[5]));
        assert_eq!(pop, synthetic_population(100_000, 3, &PopulationTargets::default(), 2001));
    }

    #[test]
    fn csv_round_trip() {
        let pop = synthetic_population(50, 1, &PopulationTargets::default(), 2001);
        let rh: Vec<i32> = (0..50).map(|i| 50 + i % 21).collect();
        let rw: Vec<i32> = (0..50).map(|i| 70 - i % 21).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hh.csv");
        write_households(std::fs::File::create(&path).unwrap(), &pop, Some((&rh, &rw))).unwrap();
        let (back, plans) = read_households(&path).unwrap();
        assert_eq!(back, pop);
        assert_eq!(plans, Some((rh, rw)));
    }
}
