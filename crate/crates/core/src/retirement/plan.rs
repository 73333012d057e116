use super::{Household, RetirementParams, N_AGES, N_COVARIATES, R_MAX, R_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Member {
    Husband,
    Wife,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RetirementPlan {
    pub r_h: i32,
    pub r_w: i32,
}

impl RetirementPlan {
    /// Calendar year of the husband's retirement minus the wife's.
    pub fn calendar_gap(&self, hh: &Household) -> i32 {
        (hh.cohort_h + self.r_h) - (hh.cohort_w + self.r_w)
    }
}

fn dot(a: &[f64; N_COVARIATES], b: &[f64; N_COVARIATES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `δ(t)`: constant, trend in `t − 25`, and steps at 55, 60 and 65.
fn delta(d: &[f64; 5], t: i32) -> f64 {
    let step = |a: i32| if t >= a { 1.0 } else { 0.0 };
    d[0] + d[1] * f64::from(t - 25) + d[2] * step(55) + d[3] * step(60) + d[4] * step(65)
}

/// Flow utility of retirement over work for `member` at age `t`, when the
/// partner retires in calendar year `partner_retire_calendar`.
pub fn flow_utility(
    member: Member,
    t: i32,
    partner_retire_calendar: i32,
    hh: &Household,
    eps: f64,
    p: &RetirementParams,
) -> f64 {
    let (x, beta, d, cohort) = match member {
        Member::Husband => (&hh.x_h, &p.beta_h, &p.delta_h, hh.cohort_h),
        Member::Wife => (&hh.x_w, &p.beta_w, &p.delta_w, hh.cohort_w),
    };
    let mut u = dot(x, beta) + delta(d, t) + eps;
    if cohort + t >= partner_retire_calendar {
        u += p.gamma;
    }
    if member == Member::Wife && f64::from(t) >= hh.spa_w {
        u += p.alpha_spa;
    }
    u
}

/// Discounted sum of flows from `r_own` to `t_max`, discounted to the current age.
#[allow(clippy::too_many_arguments)]
pub fn plan_value(
    member: Member,
    r_own: i32,
    r_partner: i32,
    hh: &Household,
    eps: f64,
    p: &RetirementParams,
    rho: f64,
    t_max: i32,
) -> f64 {
    let (age, partner_cohort) = match member {
        Member::Husband => (hh.age_h, hh.cohort_w),
        Member::Wife => (hh.age_w, hh.cohort_h),
    };
    (r_own..=t_max)
        .map(|t| rho.powi(t - age) * flow_utility(member, t, partner_cohort + r_partner, hh, eps, p))
        .sum()
}

/// Household optimum of `V_h + V_w` by exhaustive search over the age grid.
/// Ties go to the smallest `r_h`, then the smallest `r_w`.
pub fn optimal_plan(
    hh: &Household,
    eps: (f64, f64),
    p: &RetirementParams,
    rho: f64,
    t_max: i32,
) -> RetirementPlan {
    let mut best = RetirementPlan { r_h: R_MIN, r_w: R_MIN };
    let mut best_v = f64::NEG_INFINITY;
    for r_h in R_MIN..=R_MAX {
        for r_w in R_MIN..=R_MAX {
            let v = plan_value(Member::Husband, r_h, r_w, hh, eps.0, p, rho, t_max)
                + plan_value(Member::Wife, r_w, r_h, hh, eps.1, p, rho, t_max);
            if v > best_v {
                best_v = v;
                best = RetirementPlan { r_h, r_w };
            }
        }
    }
    best
}

/// Fast household optimizer for repeated shock draws at fixed parameters.
///
/// The aggregate value is `a_h(r_h) + a_w(r_w)` plus the joint-leisure
/// terms, with `a` linear in the member's own shock. With `Δ = cohort_w −
/// cohort_h`, the joint terms depend on `r_h` alone when `r_w + Δ ≤ r_h`
/// and on `r_w` alone otherwise, so for each `r_h` the best `r_w` is a
/// prefix maximum of `a_w` or a suffix maximum of `a_w` plus its joint term.
#[derive(Debug, Clone)]
pub struct PlanSolver {
    base_h: [f64; N_AGES],
    disc_h: [f64; N_AGES],
    base_w: [f64; N_AGES],
    disc_w: [f64; N_AGES],
    /// Joint terms when the wife retires no later in calendar time, by `r_h`.
    joint_h: [f64; N_AGES],
    /// Joint terms when she retires later, by `r_w`.
    joint_w: [f64; N_AGES],
    /// Last wife index in the first regime for each `r_h`; `-1` when empty.
    split: [i32; N_AGES],
}

/// Suffix sums of `ρ^{t−age}·flow(t)` and `ρ^{t−age}` over `t = r..=t_max`,
/// for every `r` from `R_MIN` to `t_max + 1`.
fn suffix_sums(flow: impl Fn(i32) -> f64, age: i32, rho: f64, t_max: i32) -> (Vec<f64>, Vec<f64>) {
    let len = (t_max + 2 - R_MIN) as usize;
    let mut base = vec![0.0; len];
    let mut disc = vec![0.0; len];
    for t in (R_MIN..=t_max).rev() {
        let k = (t - R_MIN) as usize;
        let w = rho.powi(t - age);
        base[k] = base[k + 1] + w * flow(t);
        disc[k] = disc[k + 1] + w;
    }
    (base, disc)
}

impl PlanSolver {
    pub fn new(hh: &Household, p: &RetirementParams, rho: f64, t_max: i32) -> Self {
        let xb_h = dot(&hh.x_h, &p.beta_h);
        let xb_w = dot(&hh.x_w, &p.beta_w);
        let (bh, dh) = suffix_sums(|t| xb_h + delta(&p.delta_h, t), hh.age_h, rho, t_max);
        let (bw, dw) = suffix_sums(
            |t| {
                let spa = if f64::from(t) >= hh.spa_w { p.alpha_spa } else { 0.0 };
                xb_w + delta(&p.delta_w, t) + spa
            },
            hh.age_w,
            rho,
            t_max,
        );
        // Discount sums from `age` on; ages past t_max contribute nothing.
        let tail = |d: &[f64], age: i32| d[((age - R_MIN).max(0) as usize).min(d.len() - 1)];
        let shift = hh.cohort_w - hh.cohort_h;
        let mut joint_h = [0.0; N_AGES];
        let mut joint_w = [0.0; N_AGES];
        let mut split = [0; N_AGES];
        for k in 0..N_AGES {
            let r = R_MIN + k as i32;
            joint_h[k] = p.gamma * (dh[k] + tail(&dw, r - shift));
            joint_w[k] = p.gamma * (tail(&dh, r + shift) + dw[k]);
            split[k] = (r - shift - R_MIN).clamp(-1, N_AGES as i32 - 1);
        }
        let head = |v: &[f64]| -> [f64; N_AGES] { v[..N_AGES].try_into().expect("grid length") };
        Self {
            base_h: head(&bh),
            disc_h: head(&dh),
            base_w: head(&bw),
            disc_w: head(&dw),
            joint_h,
            joint_w,
            split,
        }
    }

    /// Same optimum and tie-breaking as [`optimal_plan`].
    pub fn solve(&self, eps_h: f64, eps_w: f64) -> RetirementPlan {
        let mut pre = [(0.0, 0usize); N_AGES];
        let mut suf = [(0.0, 0usize); N_AGES + 1];
        let mut best = (f64::NEG_INFINITY, 0usize);
        for j in 0..N_AGES {
            let a = self.base_w[j] + eps_w * self.disc_w[j];
            if a > best.0 {
                best = (a, j);
            }
            pre[j] = best;
        }
        suf[N_AGES] = (f64::NEG_INFINITY, N_AGES);
        for j in (0..N_AGES).rev() {
            let c = self.base_w[j] + eps_w * self.disc_w[j] + self.joint_w[j];
            // `>=` keeps the smallest index among equal values.
            suf[j] = if c >= suf[j + 1].0 { (c, j) } else { suf[j + 1] };
        }
        let mut plan = (f64::NEG_INFINITY, 0usize, 0usize);
        for i in 0..N_AGES {
            let a_h = self.base_h[i] + eps_h * self.disc_h[i];
            let k = self.split[i];
            let (v, j) = if k < 0 {
                (a_h + suf[0].0, suf[0].1)
            } else {
                let (pa, pj) = pre[k as usize];
                let va = a_h + self.joint_h[i] + pa;
                let (sb, sj) = suf[k as usize + 1];
                let vb = a_h + sb;
                if va >= vb { (va, pj) } else { (vb, sj) }
            };
            if v > plan.0 {
                plan = (v, i, j);
            }
        }
        RetirementPlan {
            r_h: R_MIN + plan.1 as i32,
            r_w: R_MIN + plan.2 as i32,
        }
    }
}

/// Closed-form plan probabilities when the spouses decide independently
/// (`γ = 0`, `σ_hw = 0`). Each member's value is linear in the own shock,
/// `a(r) + ε·d(r)` with `d` decreasing in `r`, so age `r` is chosen on an
/// interval of `ε` and the cells are those of an ordered probit.
pub fn independent_plan_probabilities(
    hh: &Household,
    p: &RetirementParams,
    rho: f64,
    t_max: i32,
) -> crate::error::Result<([f64; N_AGES], [f64; N_AGES])> {
    if p.gamma != 0.0 || p.sigma_hw != 0.0 {
        return Err(crate::error::Error::Invalid(
            "closed-form plan probabilities need gamma = 0 and sigma_hw = 0".into(),
        ));
    }
    p.omega_factor()?;
    let member = |m: Member, sd: f64| {
        let line = |r: i32| {
            let a = plan_value(m, r, R_MIN, hh, 0.0, p, rho, t_max);
            (a, plan_value(m, r, R_MIN, hh, 1.0, p, rho, t_max) - a)
        };
        let lines: Vec<(f64, f64)> = (R_MIN..=R_MAX).map(line).collect();
        let mut out = [0.0; N_AGES];
        for (r, &(a, d)) in lines.iter().enumerate() {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for (s, &(b, e)) in lines.iter().enumerate() {
                if s < r {
                    hi = hi.min((a - b) / (e - d));
                } else if s > r {
                    lo = lo.max((b - a) / (d - e));
                }
            }
            if hi > lo {
                out[r] = crate::normal::cdf(hi / sd) - crate::normal::cdf(lo / sd);
            }
        }
        out
    };
    Ok((member(Member::Husband, 1.0), member(Member::Wife, p.sigma_w2.sqrt())))
}
