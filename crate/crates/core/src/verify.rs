//! Executable checks of the distributional laws, bound dominance and
//! rate-function inequalities, reported as machine-readable pass/fail records.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::bounds::{
    chisq_tail_bound, deviation_bound_a4, deviation_bound_thm32, rate_function_k, rate_function_l,
    ratio_tail_bound, sp_deviation_bound_a5, Side,
};
use crate::criteria::CriterionKind;
use crate::error::{Error, Result};
use crate::oracle::{conditional_residual_variance, unconditional_mspe, DgpSpec, DistributionKind};
use crate::regression::ModelMask;
use crate::simulation::{
    ks_distance_two_sample, mc_deviation_probabilities, mc_tail_probability, mc_verify_prop31,
    run_replication, sample_mspe_pairs, PairSampler, Scale, ScenarioConfig, TailStatistic,
};

/// One check with what was observed and what was required.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub required: String,
}

impl Check {
    pub fn below(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: observed < limit,
            observed,
            required: format!("< {limit}"),
        }
    }

    /// A recorded value with no requirement attached.
    pub fn info(name: impl Into<String>, observed: f64) -> Self {
        Self {
            name: name.into(),
            passed: true,
            observed,
            required: "informational".into(),
        }
    }

    pub fn at_most(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: observed <= limit,
            observed,
            required: format!("<= {limit}"),
        }
    }
}

/// Result of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>, checks: Vec<Check>) -> Self {
        Self {
            suite: suite.into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Named verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Prop31,
    Dominance,
    LemmaA3,
    Robustness,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Prop31, Suite::Dominance, Suite::LemmaA3, Suite::Robustness];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Prop31 => "prop31",
            Suite::Dominance => "dominance",
            Suite::LemmaA3 => "lemmaA3",
            Suite::Robustness => "robustness",
        }
    }

    /// Replications used when none are given: MC draws for `prop31` and per
    /// deviation cell for `dominance`, seeds per combination for `robustness`.
    pub fn default_reps(self) -> usize {
        match self {
            Suite::Prop31 => 20_000,
            Suite::Dominance => 100_000,
            Suite::LemmaA3 => 0,
            Suite::Robustness => 20,
        }
    }

    pub fn run(self, reps: Option<usize>, seed: u64) -> Result<SuiteReport> {
        let reps = reps.unwrap_or(self.default_reps());
        match self {
            Suite::Prop31 => prop31_suite(reps, seed),
            Suite::Dominance => dominance_suite(reps, TAIL_REPS, seed),
            Suite::LemmaA3 => Ok(lemma_a3_suite()),
            Suite::Robustness => robustness_suite(reps, seed),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}` (expected prop31, dominance, lemmaA3 or robustness)")))
    }
}

/// Draws per cell of the chi-squared tail checks.
pub const TAIL_REPS: usize = 1_000_000;

/// Standard errors of slack granted to Monte Carlo estimates in dominance checks.
pub const MC_SLACK_SIGMAS: f64 = 4.0;

/// Gaussian generator with signal beyond the first 20 regressors, so that
/// `σ²(m) > σ²` for the leading-20 model.
pub fn prop31_fixture() -> Result<(DgpSpec, ModelMask)> {
    let beta: Vec<f64> = (1..=30).map(|j| 2.0 / j as f64).collect();
    let dgp = DgpSpec::identity(beta, 1.0, DistributionKind::Normal, DistributionKind::Normal)?;
    Ok((dgp, ModelMask::leading(30, 20)))
}

/// Laws of ρ², RSS and S_p at `n = 60`, `|m| = 20`.
pub fn prop31_suite(reps: usize, seed: u64) -> Result<SuiteReport> {
    let n = 60;
    let (dgp, mask) = prop31_fixture()?;
    let rep = mc_verify_prop31(n, &dgp, &mask, reps, seed)?;
    let df = (n - rep.k) as f64;
    let r = reps as f64;
    let sp_se = rep.r2 * (2.0 / df / r).sqrt();
    Ok(SuiteReport::new(
        "prop31",
        vec![
            Check::below("ks_distance_rho2_vs_F", rep.ks_distance.unwrap_or(0.0), 0.02),
            Check::below(
                "rho2_mean_minus_r2_in_se",
                (rep.rho2_mean - rep.r2).abs() / rep.rho2_mean_se(),
                3.0,
            ),
            Check::below(
                "rss_scaled_mean_minus_df_in_se",
                (rep.rss_scaled_mean - df).abs() / rep.rss_mean_se(),
                3.0,
            ),
            Check::below(
                "rss_scaled_var_relative_error",
                (rep.rss_scaled_var - 2.0 * df).abs() / (2.0 * df),
                0.10,
            ),
            Check::below("sp_mean_minus_r2_in_se", (rep.sp_mean - rep.r2).abs() / sp_se, 3.0),
        ],
    ))
}

/// Chernoff tail bounds against Monte Carlo tail frequencies.
pub fn tail_bound_checks(tail_reps: usize, seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut cell = 0u64;
    for side in [Side::Upper, Side::Lower] {
        for a in [2, 10, 50] {
            for b in [2, 10, 50] {
                for eps in [0.1, 0.5, 1.0] {
                    cell += 1;
                    let est = mc_tail_probability(
                        TailStatistic::ChiSquareRatio { a, b },
                        side,
                        eps,
                        tail_reps,
                        seed.wrapping_add(cell),
                    )?;
                    let bound = ratio_tail_bound(a, b, eps, side)?;
                    checks.push(Check::at_most(
                        format!("ratio_{side:?}_a{a}_b{b}_eps{eps}").to_lowercase(),
                        est.probability - MC_SLACK_SIGMAS * est.std_error,
                        bound,
                    ));
                }
            }
        }
        for b in [5, 20, 100] {
            for eps in [0.2, 0.5, 1.5] {
                cell += 1;
                let est = mc_tail_probability(
                    TailStatistic::ScaledChiSquare { b },
                    side,
                    eps,
                    tail_reps,
                    seed.wrapping_add(cell),
                )?;
                let bound = chisq_tail_bound(b, eps, side)?;
                checks.push(Check::at_most(
                    format!("chisq_{side:?}_b{b}_eps{eps}").to_lowercase(),
                    est.probability - MC_SLACK_SIGMAS * est.std_error,
                    bound,
                ));
            }
        }
    }
    Ok(checks)
}

/// Full-fit and Bartlett draws of `(ρ², RSS)` agree in law (two-sample KS at
/// the 0.1% level) on small Gaussian problems.
pub fn bartlett_agreement_checks(reps: usize, seed: u64) -> Result<Vec<Check>> {
    let n = 50;
    let mut checks = Vec::new();
    for k in [10, 25, 40] {
        let beta: Vec<f64> = (1..=k + 5).map(|j| 1.5 / j as f64).collect();
        let dgp = DgpSpec::identity(beta, 1.0, DistributionKind::Normal, DistributionKind::Normal)?;
        let mask = ModelMask::leading(k + 5, k);
        let sigma2_m = conditional_residual_variance(&dgp, &mask)?;
        let full = sample_mspe_pairs(&PairSampler::FullFit { dgp: &dgp, mask: &mask, n }, reps, seed)?;
        let fast = sample_mspe_pairs(&PairSampler::Bartlett { n, k, sigma2_m }, reps, seed ^ 0x5eed)?;
        let crit = 1.95 * (2.0 / reps as f64).sqrt();
        let col = |v: &[(f64, f64)], i: usize| -> Vec<f64> { v.iter().map(|p| if i == 0 { p.0 } else { p.1 }).collect() };
        checks.push(Check::below(
            format!("bartlett_vs_fit_rho2_ks_n{n}_k{k}"),
            ks_distance_two_sample(&col(&full, 0), &col(&fast, 0)),
            crit,
        ));
        checks.push(Check::below(
            format!("bartlett_vs_fit_rss_ks_n{n}_k{k}"),
            ks_distance_two_sample(&col(&full, 1), &col(&fast, 1)),
            crit,
        ));
    }
    Ok(checks)
}

/// Empirical deviation probabilities against the four-term and two-term sums and the simple bound.
pub fn deviation_dominance_checks(reps: usize, seed: u64) -> Result<Vec<Check>> {
    let sigma2_m = 1.0;
    let eps_list = [0.2, 0.5, 1.0, 2.0].map(|e| e * sigma2_m);
    let mut checks = Vec::new();
    let mut cell = 0u64;
    for n in [50usize, 200] {
        for ratio in [0.2, 0.5, 0.8] {
            cell += 1;
            let k = (ratio * n as f64).round() as usize;
            let sampler = PairSampler::Bartlett { n, k, sigma2_m };
            let est = mc_deviation_probabilities(&sampler, &eps_list, reps, seed.wrapping_add(cell))?;
            for e in est {
                let a4 = deviation_bound_a4(n, k, sigma2_m, e.epsilon)?.sum();
                let a5 = sp_deviation_bound_a5(n, k, sigma2_m, e.epsilon)?.sum();
                let thm = deviation_bound_thm32(n, k, sigma2_m, e.epsilon)?;
                let tag = format!("n{n}_k{k}_eps{}", e.epsilon);
                checks.push(Check::at_most(
                    format!("rho_hat_deviation_vs_a4_{tag}"),
                    e.rho_hat.probability - MC_SLACK_SIGMAS * e.rho_hat.std_error,
                    a4,
                ));
                checks.push(Check::at_most(format!("a4_vs_simple_bound_{tag}"), a4, thm));
                checks.push(Check::at_most(
                    format!("sp_deviation_vs_a5_{tag}"),
                    e.sp.probability - MC_SLACK_SIGMAS * e.sp.std_error,
                    a5,
                ));
            }
        }
    }
    Ok(checks)
}

/// Tail-bound and deviation-bound dominance.
pub fn dominance_suite(reps: usize, tail_reps: usize, seed: u64) -> Result<SuiteReport> {
    let mut checks = tail_bound_checks(tail_reps, seed)?;
    checks.extend(bartlett_agreement_checks(reps.min(20_000), seed)?);
    checks.extend(deviation_dominance_checks(reps, seed)?);
    Ok(SuiteReport::new("dominance", checks))
}

fn grid(start: f64, end: f64, step: f64, include_end: bool) -> Vec<f64> {
    let count = ((end - start) / step + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=count).map(|i| start + i as f64 * step).collect();
    if !include_end {
        v.retain(|&x| x < end - 1e-12);
    }
    v
}

/// Count of grid points violating the three rate-function inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LemmaA3Counts {
    pub part_i_points: usize,
    pub part_i_violations: usize,
    pub part_ii_points: usize,
    pub part_ii_violations: usize,
    pub part_iii_points: usize,
    pub part_iii_violations: usize,
}

/// Evaluate the inequalities on `r ∈ (0, 10]` in steps of 0.05 and `c` in steps of 0.01.
pub fn lemma_a3_counts() -> LemmaA3Counts {
    let rs: Vec<f64> = (1..=200).map(|i| i as f64 * 0.05).collect();
    let k = |r, c| rate_function_k(r, c).expect("grid inside the domain");
    let l = |c| rate_function_l(c).expect("grid inside the domain");
    let mut out = LemmaA3Counts {
        part_i_points: 0,
        part_i_violations: 0,
        part_ii_points: 0,
        part_ii_violations: 0,
        part_iii_points: 0,
        part_iii_violations: 0,
    };

    // (i) K(r, c) <= K(r, -c) for 0 <= c < r; L(c) <= L(-c) for 0 <= c < 1.
    for &r in &rs {
        for c in grid(0.0, r, 0.01, false) {
            out.part_i_points += 1;
            out.part_i_violations += usize::from(k(r, c) > k(r, -c));
        }
    }
    for c in grid(0.0, 1.0, 0.01, false) {
        out.part_i_points += 1;
        out.part_i_violations += usize::from(l(c) > l(-c));
    }

    // (ii) L(c/(r+1+c)) <= K(r, c) for c >= 0.
    let cs = grid(0.0, 10.0, 0.01, true);
    for &r in &rs {
        for &c in &cs {
            out.part_ii_points += 1;
            out.part_ii_violations += usize::from(l(c / (r + 1.0 + c)) > k(r, c));
        }
    }

    // (iii) L increasing on [0, ∞); c²/4 <= L(c) for 0 <= c < 1.
    for w in cs.windows(2) {
        out.part_iii_points += 1;
        out.part_iii_violations += usize::from(l(w[1]) <= l(w[0]));
    }
    for c in grid(0.0, 1.0, 0.01, false) {
        out.part_iii_points += 1;
        out.part_iii_violations += usize::from(c * c / 4.0 > l(c));
    }
    out
}

pub fn lemma_a3_suite() -> SuiteReport {
    let c = lemma_a3_counts();
    SuiteReport::new(
        "lemmaA3",
        vec![
            Check::at_most("part_i_violations", c.part_i_violations as f64, 0.0),
            Check::at_most("part_ii_violations", c.part_ii_violations as f64, 0.0),
            Check::at_most("part_iii_violations", c.part_iii_violations as f64, 0.0),
        ],
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Median over `seeds` replications of `sup_m |GCV - ρ²| / max_m ρ²` on the
/// desk-scale leading-term scenario with the given laws.
pub fn median_relative_gcv_error(
    x_dist: DistributionKind,
    u_dist: DistributionKind,
    seeds: usize,
    seed: u64,
) -> Result<f64> {
    let mut config = ScenarioConfig::defaults(1, Scale::Desk, seed)?;
    config.x_dist = x_dist;
    config.u_dist = u_dist;
    let errors = (0..seeds as u64)
        .map(|r| run_replication(&config, r).map(|res| res.relative_gcv_error()))
        .collect::<Result<Vec<_>>>()?;
    Ok(median(errors))
}

/// Spread of the accuracy metric across all nine regressor/error law pairs.
pub fn robustness_suite(seeds: usize, seed: u64) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut metrics = Vec::new();
    for x in DistributionKind::ALL {
        for u in DistributionKind::ALL {
            let m = median_relative_gcv_error(x, u, seeds, seed)?;
            checks.push(Check::info(format!("median_relative_gcv_error_x_{}_u_{}", x.name(), u.name()), m));
            metrics.push(m);
        }
    }
    let hi = metrics.iter().copied().fold(f64::MIN, f64::max);
    let lo = metrics.iter().copied().fold(f64::MAX, f64::min);
    checks.push(Check::below("max_over_min_ratio", hi / lo, 2.0));
    Ok(SuiteReport::new("robustness", checks))
}

/// Gaussian desk-scale leading-term scenario: GCV accuracy and the bias
/// directions of the classical criteria' gray curves.
pub fn leading_term_regime_suite(seeds: usize, seed: u64) -> Result<SuiteReport> {
    let mut config = ScenarioConfig::defaults(1, Scale::Desk, seed)?;
    config.x_dist = DistributionKind::Normal;
    config.u_dist = DistributionKind::Normal;
    let mut errors = Vec::with_capacity(seeds);
    let mut wrong_direction = 0usize;
    for r in 0..seeds as u64 {
        let res = run_replication(&config, r)?;
        errors.push(res.relative_gcv_error());
        for row in res.rows.iter().filter(|row| row.order >= 2) {
            let aicc_ok = row.gray_aicc.is_none_or(|g| g > row.rho2);
            let ok = row.gray_aic < row.rho2 && row.gray_fpe < row.rho2 && aicc_ok && row.gray_bic > row.rho2;
            wrong_direction += usize::from(!ok);
        }
    }
    Ok(SuiteReport::new(
        "leading_term_regime",
        vec![
            Check::below("median_relative_gcv_error", median(errors), 0.15),
            Check::at_most("gray_curve_direction_violations", wrong_direction as f64, 0.0),
        ],
    ))
}

/// Greedy-path selection by GCV on the desk-scale block scenario.
pub fn greedy_selection_suite(seeds: usize, seed: u64) -> Result<SuiteReport> {
    let config = ScenarioConfig::defaults(2, Scale::Desk, seed)?;
    let mut regret = Vec::with_capacity(seeds);
    let mut estimate_error = Vec::with_capacity(seeds);
    let mut full_sigma2 = 0.0;
    for r in 0..seeds as u64 {
        let res = run_replication(&config, r)?;
        let chosen = res.selected(CriterionKind::Gcv);
        full_sigma2 = res.rows[0].sigma2_m;
        regret.push(chosen.rho2 - res.min_rho2());
        estimate_error.push((chosen.gcv - chosen.rho2).abs() / res.max_rho2);
    }
    Ok(SuiteReport::new(
        "greedy_selection",
        vec![
            Check::below("median_rho2_regret_over_full_sigma2", median(regret) / full_sigma2, 0.1),
            Check::below("median_relative_gcv_error_at_selection", median(estimate_error), 0.1),
        ],
    ))
}

/// `R²(m)` at the `prop31` fixture; the target of the S_p and ρ² means.
pub fn prop31_target() -> Result<f64> {
    let (dgp, mask) = prop31_fixture()?;
    unconditional_mspe(conditional_residual_variance(&dgp, &mask)?, 60, mask.order())
}
