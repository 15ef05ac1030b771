//! Data-generating samplers, the three scenario generators and Monte Carlo drivers.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(seed, stream)`.
//! Replication `r` of an experiment uses stream `r`; scenario coefficients use a
//! separate stream, so changing the replication count never changes `β`.
//! Parallel loops collect results in index order, and integer counts are the
//! only values reduced across chunks, so output does not depend on the number
//! of worker threads.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::bounds::Side;
use crate::criteria::{criterion_value, gray_curve_value, CriterionKind, CriterionRecord};
use crate::error::{Error, Result};
use crate::linalg::ColMatrix;
use crate::oracle::{
    conditional_mspe, conditional_residual_variance, mspe_variance, unconditional_mspe, DgpSpec,
    DistributionKind, OracleRecord,
};
use crate::regression::{check_order, fit_leading_terms, fit_restricted_ls, Dataset, FitResult, ModelMask};
use crate::search::{greedy_block_elimination, leading_term_family, select_best_defined_index, BlockPartition, GreedyPath};

/// Stream reserved for scenario coefficients.
const PARAMETER_STREAM: u64 = u64::MAX;

/// Draws per independently seeded chunk in tail-probability estimates.
const TAIL_CHUNK: usize = 1 << 14;

/// Minimum replication count accepted by [`mc_tail_probability`].
pub const MIN_TAIL_REPS: usize = 10_000;

/// The generator for stream `stream` of `seed`.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One standardized draw (mean 0, variance 1).
#[inline]
pub fn draw_standardized<R: Rng + ?Sized>(kind: DistributionKind, rng: &mut R) -> f64 {
    match kind {
        DistributionKind::Normal => rng.sample(StandardNormal),
        DistributionKind::ExponentialCentered => {
            let e: f64 = rng.sample(Exp1);
            e - 1.0
        }
        DistributionKind::BernoulliCentered => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// `n` i.i.d. rows `(x, y)` with `y = xᵀβ + σu`, drawn row by row from `rng`.
pub fn sample_with_rng<R: Rng + ?Sized>(dgp: &DgpSpec, n: usize, rng: &mut R) -> Result<Dataset> {
    let p = dgp.p();
    let chol = dgp.cholesky_factor();
    let mut x = ColMatrix::zeros(n, p);
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; p];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = draw_standardized(dgp.x_dist(), rng);
        }
        let mut signal = 0.0;
        for j in 0..p {
            let xj = match chol {
                None => z[j],
                Some(l) => l[j * p..j * p + j + 1].iter().zip(&z).map(|(a, b)| a * b).sum(),
            };
            x.set(i, j, xj);
            signal += xj * dgp.beta()[j];
        }
        y[i] = signal + dgp.sigma() * draw_standardized(dgp.u_dist(), rng);
    }
    Dataset::new(x, y)
}

/// One sample of size `n`, drawn from stream 0 of `seed`.
pub fn sample_design_and_response(dgp: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    sample_with_rng(dgp, n, &mut replication_rng(seed, 0))
}

/// Problem size preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scale {
    /// The sizes of the original study.
    Paper,
    /// Reduced sizes that run in seconds.
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            _ => Err(Error::Config(format!("unknown scale `{s}` (expected paper or desk)"))),
        }
    }
}

/// A fully resolved scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario_id: u8,
    pub scale: Scale,
    pub n: usize,
    pub p: usize,
    /// Unused by scenario 1.
    pub block_size: usize,
    pub snr_target: f64,
    pub x_dist: DistributionKind,
    pub u_dist: DistributionKind,
    pub seed: u64,
    pub replications: usize,
}

/// Scenario settings as read from JSON; absent fields take the scale defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub scenario_id: Option<u8>,
    pub scale: Option<Scale>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub block_size: Option<usize>,
    pub snr_target: Option<f64>,
    pub x_dist: Option<DistributionKind>,
    pub u_dist: Option<DistributionKind>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
}

impl ScenarioOverrides {
    /// Apply defaults for the chosen scenario and scale, then validate.
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let id = self
            .scenario_id
            .ok_or_else(|| Error::Config("scenario_id is required".into()))?;
        let mut c = ScenarioConfig::defaults(id, self.scale.unwrap_or(Scale::Desk), self.seed.unwrap_or(0))?;
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.p {
            c.p = v;
        }
        if let Some(v) = self.block_size {
            c.block_size = v;
        }
        if let Some(v) = self.snr_target {
            c.snr_target = v;
        }
        if let Some(v) = self.x_dist {
            c.x_dist = v;
        }
        if let Some(v) = self.u_dist {
            c.u_dist = v;
        }
        if let Some(v) = self.replications {
            c.replications = v;
        }
        c.validate()?;
        Ok(c)
    }
}

impl ScenarioConfig {
    /// Default sizes for a scenario: exponential regressors, normal errors, SNR 5.
    pub fn defaults(scenario_id: u8, scale: Scale, seed: u64) -> Result<Self> {
        let (n, p, block_size) = match (scenario_id, scale) {
            (1, Scale::Paper) => (700, 600, 0),
            (1, Scale::Desk) => (200, 170, 0),
            (2 | 3, Scale::Paper) => (1300, 1000, 50),
            (2 | 3, Scale::Desk) => (260, 200, 20),
            _ => return Err(Error::Config(format!("scenario_id must be 1, 2 or 3, got {scenario_id}"))),
        };
        Ok(Self {
            scenario_id,
            scale,
            n,
            p,
            block_size,
            snr_target: 5.0,
            x_dist: DistributionKind::ExponentialCentered,
            u_dist: DistributionKind::Normal,
            seed,
            replications: 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.scenario_id) {
            return Err(Error::Config(format!(
                "scenario_id must be 1, 2 or 3, got {}",
                self.scenario_id
            )));
        }
        if !(self.snr_target > 0.0 && self.snr_target.is_finite()) {
            return Err(Error::Config(format!("snr_target must be positive, got {}", self.snr_target)));
        }
        if self.p == 0 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        if self.p + 1 >= self.n {
            return Err(Error::Config(format!(
                "the largest candidate model has order {} and needs n > {}, got n = {}",
                self.p,
                self.p + 1,
                self.n
            )));
        }
        if self.scenario_id != 1 && (self.block_size == 0 || !self.p.is_multiple_of(self.block_size)) {
            return Err(Error::Config(format!(
                "block_size {} must be positive and divide p = {}",
                self.block_size, self.p
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of blocks for scenarios 2 and 3.
    pub fn num_blocks(&self) -> usize {
        if self.scenario_id == 1 {
            0
        } else {
            self.p / self.block_size
        }
    }
}

fn rescale_to_snr(beta: &mut [f64], snr: f64) {
    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    for b in beta.iter_mut() {
        *b *= snr / norm;
    }
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Number of large blocks in scenario 2.
pub const LARGE_BLOCKS: usize = 3;

/// Magnitude ratio between large and small blocks in scenario 2.
pub const LARGE_BLOCK_FACTOR: f64 = 10.0;

/// Blocks carrying the large coefficients of scenario 2, in increasing order.
pub fn scenario2_large_blocks(config: &ScenarioConfig) -> Vec<usize> {
    choose_large_blocks(config.num_blocks(), &mut replication_rng(config.seed, PARAMETER_STREAM))
}

fn choose_large_blocks<R: Rng + ?Sized>(nb: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..nb).collect();
    let take = LARGE_BLOCKS.min(nb);
    for i in 0..take {
        let j = rng.random_range(i..nb);
        order.swap(i, j);
    }
    let mut large = order[..take].to_vec();
    large.sort_unstable();
    large
}

/// Regression coefficients of the configured scenario, with `Σ = I`, `σ = 1`
/// and `‖β‖ = snr_target`.
///
/// * Scenario 1: `β_j = j^-0.6 (1 + 0.3 ε_j)`, `ε_j ~ U[-1, 1]`.
/// * Scenario 2: magnitudes `U[0.5, 1.5]`, multiplied by 10 on three blocks, random signs.
/// * Scenario 3: magnitudes `U[0.5, 1.5]` with random signs.
pub fn scenario_parameters(config: &ScenarioConfig) -> Result<DgpSpec> {
    config.validate()?;
    let p = config.p;
    let mut beta = vec![0.0; p];
    match config.scenario_id {
        1 => {
            let mut rng = replication_rng(config.seed, PARAMETER_STREAM);
            for (j, b) in beta.iter_mut().enumerate() {
                let eps: f64 = rng.random_range(-1.0..=1.0);
                *b = ((j + 1) as f64).powf(-0.6) * (1.0 + 0.3 * eps);
            }
        }
        2 => {
            let mut rng = replication_rng(config.seed, PARAMETER_STREAM);
            let large = choose_large_blocks(config.num_blocks(), &mut rng);
            for (j, b) in beta.iter_mut().enumerate() {
                let mag: f64 = rng.random_range(0.5..=1.5);
                let boost = if large.contains(&(j / config.block_size)) {
                    LARGE_BLOCK_FACTOR
                } else {
                    1.0
                };
                *b = random_sign(&mut rng) * mag * boost;
            }
        }
        _ => {
            let mut rng = replication_rng(config.seed, PARAMETER_STREAM);
            for b in beta.iter_mut() {
                let mag: f64 = rng.random_range(0.5..=1.5);
                *b = random_sign(&mut rng) * mag;
            }
        }
    }
    rescale_to_snr(&mut beta, config.snr_target);
    DgpSpec::identity(beta, 1.0, config.x_dist, config.u_dist)
}

/// One row of an experiment: the data-driven criteria of a candidate model
/// next to its true performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub model_id: usize,
    pub order: usize,
    pub rss: f64,
    pub gcv: f64,
    pub sp: f64,
    pub rho_hat2: f64,
    pub aic: f64,
    pub aicc: Option<f64>,
    pub fpe: f64,
    pub bic: f64,
    pub sigma2_m: f64,
    pub rho2: f64,
    pub r2: f64,
    pub gray_aic: f64,
    pub gray_fpe: f64,
    pub gray_aicc: Option<f64>,
    pub gray_bic: f64,
}

impl ExperimentRow {
    pub fn from_records(model_id: usize, crit: &CriterionRecord, oracle: &OracleRecord, n: usize) -> Result<Self> {
        let k = crit.k;
        let need = |kind| crit.get(kind).ok_or(Error::MissingCriterion(kind));
        let gray = |kind: CriterionKind| gray_curve_value(kind, oracle.rho2, n, k);
        Ok(Self {
            model_id,
            order: k,
            rss: crit.rss,
            gcv: need(CriterionKind::Gcv)?,
            sp: need(CriterionKind::Sp)?,
            rho_hat2: need(CriterionKind::RhoHat2)?,
            aic: need(CriterionKind::Aic)?,
            aicc: crit.get(CriterionKind::Aicc),
            fpe: need(CriterionKind::Fpe)?,
            bic: need(CriterionKind::Bic)?,
            sigma2_m: oracle.sigma2_m,
            rho2: oracle.rho2,
            r2: oracle.r2,
            gray_aic: gray(CriterionKind::Aic)?,
            gray_fpe: gray(CriterionKind::Fpe)?,
            gray_aicc: if CriterionKind::Aicc.is_defined(n, k) {
                Some(gray(CriterionKind::Aicc)?)
            } else {
                None
            },
            gray_bic: gray(CriterionKind::Bic)?,
        })
    }

    /// Value of a selection objective in this row.
    pub fn criterion(&self, kind: CriterionKind) -> Option<f64> {
        match kind {
            CriterionKind::Gcv => Some(self.gcv),
            CriterionKind::Sp => Some(self.sp),
            CriterionKind::RhoHat2 => Some(self.rho_hat2),
            CriterionKind::Aic => Some(self.aic),
            CriterionKind::Aicc => self.aicc,
            CriterionKind::Fpe => Some(self.fpe),
            CriterionKind::Bic => Some(self.bic),
        }
    }
}

/// How the `r2` column was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum R2Basis {
    /// Exact for Gaussian regressors and errors.
    Exact,
    /// The Gaussian formula applied to a non-Gaussian generator.
    GaussianFormula,
}

/// One realization of a scenario and everything computed on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ScenarioConfig,
    pub replication: u64,
    pub beta: Vec<f64>,
    pub masks: Vec<ModelMask>,
    pub rows: Vec<ExperimentRow>,
    /// Greedy elimination path for scenarios 2 and 3.
    pub path: Option<GreedyPath>,
    /// Row index of the minimizer of each criterion, plus `"rho2"` for the oracle.
    pub argmins: BTreeMap<String, usize>,
    pub sup_abs_gcv_minus_rho2: f64,
    pub max_rho2: f64,
    pub r2_basis: R2Basis,
}

impl ExperimentResult {
    /// `sup_m |GCV(m) - ρ²(m)| / max_m ρ²(m)`.
    pub fn relative_gcv_error(&self) -> f64 {
        self.sup_abs_gcv_minus_rho2 / self.max_rho2
    }

    /// Smallest ρ² in the family.
    pub fn min_rho2(&self) -> f64 {
        self.rows[self.argmins["rho2"]].rho2
    }

    /// The row selected by `kind`.
    pub fn selected(&self, kind: CriterionKind) -> &ExperimentRow {
        &self.rows[self.argmins[kind.name()]]
    }
}

fn evaluate_family(
    dgp: &DgpSpec,
    n: usize,
    masks: &[ModelMask],
    fits: &[FitResult],
) -> Result<(Vec<CriterionRecord>, Vec<ExperimentRow>)> {
    masks
        .par_iter()
        .zip(fits)
        .enumerate()
        .map(|(i, (mask, fit))| {
            let crit = CriterionRecord::from_rss(mask.clone(), fit.rss, n).map_err(|e| e.at_mask(mask))?;
            let oracle = OracleRecord::evaluate(dgp, mask, &fit.beta_hat, n).map_err(|e| e.at_mask(mask))?;
            let row = ExperimentRow::from_records(i, &crit, &oracle, n)?;
            Ok((crit, row))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

fn rho2_argmin(rows: &[ExperimentRow], masks: &[ModelMask]) -> usize {
    let mut best = 0;
    for i in 1..rows.len() {
        let ord = rows[i]
            .rho2
            .total_cmp(&rows[best].rho2)
            .then(rows[i].order.cmp(&rows[best].order))
            .then_with(|| masks[i].cmp(&masks[best]));
        if ord.is_lt() {
            best = i;
        }
    }
    best
}

/// Run replication `replication` of a scenario on a fresh `(X, Y)` draw.
pub fn run_replication(config: &ScenarioConfig, replication: u64) -> Result<ExperimentResult> {
    let dgp = scenario_parameters(config)?;
    let n = config.n;
    let data = sample_with_rng(&dgp, n, &mut replication_rng(config.seed, replication))?;

    let (masks, fits, path) = if config.scenario_id == 1 {
        let masks = leading_term_family(config.p, config.p);
        let fits = fit_leading_terms(&data, config.p)?;
        (masks, fits, None)
    } else {
        let partition = BlockPartition::contiguous(config.num_blocks(), config.block_size)?;
        let path = greedy_block_elimination(&data, &partition)?;
        let masks = path.masks();
        let fits = masks
            .par_iter()
            .map(|m| fit_restricted_ls(&data, m).map_err(|e| e.at_mask(m)))
            .collect::<Result<Vec<_>>>()?;
        (masks, fits, Some(path))
    };

    let (records, rows) = evaluate_family(&dgp, n, &masks, &fits)?;
    let mut argmins = BTreeMap::new();
    for kind in CriterionKind::ALL {
        argmins.insert(kind.name().to_string(), select_best_defined_index(&records, kind)?);
    }
    argmins.insert("rho2".to_string(), rho2_argmin(&rows, &masks));

    let sup = rows.iter().map(|r| (r.gcv - r.rho2).abs()).fold(0.0, f64::max);
    let max_rho2 = rows.iter().map(|r| r.rho2).fold(0.0, f64::max);
    Ok(ExperimentResult {
        config: config.clone(),
        replication,
        beta: dgp.beta().to_vec(),
        masks,
        rows,
        path,
        argmins,
        sup_abs_gcv_minus_rho2: sup,
        max_rho2,
        r2_basis: if dgp.is_gaussian() {
            R2Basis::Exact
        } else {
            R2Basis::GaussianFormula
        },
    })
}

/// Run the scenario on its single fixed realization (replication 0).
pub fn run_scenario_experiment(config: &ScenarioConfig) -> Result<ExperimentResult> {
    run_replication(config, 0)
}

/// Independent draws `(ρ²(m), RSS(m))` for one model.
#[derive(Debug, Clone, Copy)]
pub enum PairSampler<'a> {
    /// Fit the model on a full sample from `dgp`.
    FullFit { dgp: &'a DgpSpec, mask: &'a ModelMask, n: usize },
    /// Gaussian shortcut for a correctly centered model with `σ²(m)` given.
    ///
    /// With `W` an `n×k` standard normal matrix and `WᵀW = TTᵀ` its Bartlett
    /// factorization, `ρ² = σ²(m)(1 + ‖T⁻¹g‖²)` for `g ~ N(0, I_k)`, and
    /// `RSS = σ²(m) χ²_{n-k}` independently. Costs `O(k²)` per draw instead of
    /// `O(nk²)`.
    Bartlett { n: usize, k: usize, sigma2_m: f64 },
}

impl PairSampler<'_> {
    pub fn n(&self) -> usize {
        match *self {
            PairSampler::FullFit { n, .. } | PairSampler::Bartlett { n, .. } => n,
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            PairSampler::FullFit { mask, .. } => mask.order(),
            PairSampler::Bartlett { k, .. } => k,
        }
    }

    pub fn sigma2_m(&self) -> Result<f64> {
        match *self {
            PairSampler::FullFit { dgp, mask, .. } => conditional_residual_variance(dgp, mask),
            PairSampler::Bartlett { sigma2_m, .. } => Ok(sigma2_m),
        }
    }

    fn validate(&self) -> Result<()> {
        check_order(self.k(), self.n())?;
        match *self {
            PairSampler::FullFit { dgp, mask, .. } => {
                if mask.p() != dgp.p() {
                    return Err(Error::ShapeMismatch {
                        expected: dgp.p(),
                        actual: mask.p(),
                    });
                }
                Ok(())
            }
            PairSampler::Bartlett { sigma2_m, .. } => {
                if sigma2_m >= 0.0 && sigma2_m.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("sigma2_m must be finite and >= 0, got {sigma2_m}")))
                }
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        match *self {
            PairSampler::FullFit { dgp, mask, n } => {
                let data = sample_with_rng(dgp, n, rng)?;
                let fit = fit_restricted_ls(&data, mask)?;
                Ok((conditional_mspe(dgp, &fit.beta_hat)?, fit.rss))
            }
            PairSampler::Bartlett { n, k, sigma2_m } => {
                // Row-major lower-triangular T, solved against g on the fly.
                let mut t = vec![0.0; k * k];
                for i in 0..k {
                    for j in 0..i {
                        t[i * k + j] = rng.sample(StandardNormal);
                    }
                    let chi = ChiSquared::new((n - i) as f64).expect("positive degrees of freedom");
                    t[i * k + i] = chi.sample(rng).sqrt();
                }
                let mut z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..k {
                    let s: f64 = (0..i).map(|j| t[i * k + j] * z[j]).sum();
                    z[i] = (z[i] - s) / t[i * k + i];
                }
                let quad: f64 = z.iter().map(|v| v * v).sum();
                let chi = ChiSquared::new((n - k) as f64).expect("positive degrees of freedom");
                Ok((sigma2_m * (1.0 + quad), sigma2_m * chi.sample(rng)))
            }
        }
    }
}

/// `reps` draws, replication `r` from stream `r` of `seed`.
pub fn sample_mspe_pairs(sampler: &PairSampler<'_>, reps: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    sampler.validate()?;
    (0..reps)
        .into_par_iter()
        .map(|r| sampler.draw(&mut replication_rng(seed, r as u64)))
        .collect()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, var)
}

/// Monte Carlo check of the finite-sample laws of ρ², RSS and S_p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop31Report {
    pub n: usize,
    pub k: usize,
    pub reps: usize,
    pub sigma2_m: f64,
    pub r2: f64,
    /// Exact `Var[ρ²]`, defined for `k < n - 3`.
    pub var_rho2: Option<f64>,
    pub rho2_mean: f64,
    pub rho2_var: f64,
    /// KS distance of `(ρ²/σ²(m) - 1)(n-k+1)/k` from `F_{k, n-k+1}`; absent at `k = 0`.
    pub ks_distance: Option<f64>,
    /// Moments of `RSS/σ²(m)`, which is `χ²_{n-k}`.
    pub rss_scaled_mean: f64,
    pub rss_scaled_var: f64,
    pub sp_mean: f64,
    pub sp_var: f64,
}

impl Prop31Report {
    pub fn from_pairs(n: usize, k: usize, sigma2_m: f64, pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::domain("at least two replications are needed"));
        }
        let rho2: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let rss_scaled: Vec<f64> = pairs.iter().map(|p| p.1 / sigma2_m).collect();
        let sp: Vec<f64> = pairs
            .iter()
            .map(|p| criterion_value(CriterionKind::Sp, p.1, n, k))
            .collect::<Result<_>>()?;
        let ks = if k == 0 {
            None
        } else {
            let d2 = (n - k + 1) as f64;
            let f = FisherSnedecor::new(k as f64, d2).map_err(|e| Error::domain(e.to_string()))?;
            let stat: Vec<f64> = rho2.iter().map(|r| (r / sigma2_m - 1.0) * d2 / k as f64).collect();
            Some(ks_distance(&stat, |x| f.cdf(x)))
        };
        let (rho2_mean, rho2_var) = mean_var(&rho2);
        let (rss_scaled_mean, rss_scaled_var) = mean_var(&rss_scaled);
        let (sp_mean, sp_var) = mean_var(&sp);
        Ok(Self {
            n,
            k,
            reps: pairs.len(),
            sigma2_m,
            r2: unconditional_mspe(sigma2_m, n, k)?,
            var_rho2: mspe_variance(sigma2_m, n, k).ok(),
            rho2_mean,
            rho2_var,
            ks_distance: ks,
            rss_scaled_mean,
            rss_scaled_var,
            sp_mean,
            sp_var,
        })
    }

    /// Monte Carlo standard error of the ρ² mean.
    pub fn rho2_mean_se(&self) -> f64 {
        (self.var_rho2.unwrap_or(self.rho2_var) / self.reps as f64).sqrt()
    }

    /// Monte Carlo standard error of the S_p mean.
    pub fn sp_mean_se(&self) -> f64 {
        (self.sp_var / self.reps as f64).sqrt()
    }

    /// Monte Carlo standard error of the `RSS/σ²(m)` mean.
    pub fn rss_mean_se(&self) -> f64 {
        (2.0 * (self.n - self.k) as f64 / self.reps as f64).sqrt()
    }
}

/// Fit `mask` on `reps` Gaussian samples of size `n` and summarize the laws of
/// ρ², RSS and S_p.
pub fn mc_verify_prop31(n: usize, dgp: &DgpSpec, mask: &ModelMask, reps: usize, seed: u64) -> Result<Prop31Report> {
    if !dgp.is_gaussian() {
        return Err(Error::DistributionNotGaussian);
    }
    let sampler = PairSampler::FullFit { dgp, mask, n };
    let pairs = sample_mspe_pairs(&sampler, reps, seed)?;
    Prop31Report::from_pairs(n, mask.order(), sampler.sigma2_m()?, &pairs)
}

/// Empirical frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub hits: u64,
    pub reps: u64,
}

impl TailEstimate {
    pub fn from_counts(hits: u64, reps: u64) -> Self {
        let p = hits as f64 / reps as f64;
        Self {
            probability: p,
            std_error: (p * (1.0 - p) / reps as f64).sqrt(),
            hits,
            reps,
        }
    }

    /// Whether `bound` is at least the estimate minus `sigmas` standard errors.
    /// With zero hits the standard error is zero, so a one-hit allowance is used.
    pub fn dominated_by(&self, bound: f64, sigmas: f64) -> bool {
        let se = self.std_error.max(1.0 / self.reps as f64);
        self.probability - sigmas * se <= bound
    }
}

/// A statistic built from independent chi-squared draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailStatistic {
    /// `A/B - a/b` with `A ~ χ²_a`, `B ~ χ²_b`.
    ChiSquareRatio { a: usize, b: usize },
    /// `B/b - 1` with `B ~ χ²_b`.
    ScaledChiSquare { b: usize },
}

/// Estimate `P(S > threshold)` from `reps` draws of `sampler`.
///
/// Draws are split into fixed chunks, each with its own stream, so the estimate
/// is the same for any thread count.
pub fn mc_tail_probability_with<F>(sampler: F, threshold: f64, reps: usize, seed: u64) -> Result<TailEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    if reps < MIN_TAIL_REPS {
        return Err(Error::domain(format!(
            "tail estimates need at least {MIN_TAIL_REPS} replications, got {reps}"
        )));
    }
    let chunks = reps.div_ceil(TAIL_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = replication_rng(seed, c as u64);
            let len = TAIL_CHUNK.min(reps - c * TAIL_CHUNK);
            (0..len).filter(|_| sampler(&mut rng) > threshold).count() as u64
        })
        .sum();
    Ok(TailEstimate::from_counts(hits, reps as u64))
}

/// Estimate `P(S > threshold)` for the upper side or `P(S < -threshold)` for
/// the lower side.
pub fn mc_tail_probability(
    statistic: TailStatistic,
    side: Side,
    threshold: f64,
    reps: usize,
    seed: u64,
) -> Result<TailEstimate> {
    let sign = match side {
        Side::Upper => 1.0,
        Side::Lower => -1.0,
    };
    let chi = |df: usize| {
        if df == 0 {
            Err(Error::domain("degrees of freedom must be at least 1"))
        } else {
            Ok(ChiSquared::new(df as f64).expect("positive degrees of freedom"))
        }
    };
    match statistic {
        TailStatistic::ChiSquareRatio { a, b } => {
            let (ca, cb) = (chi(a)?, chi(b)?);
            let r = a as f64 / b as f64;
            mc_tail_probability_with(
                |rng| sign * (ca.sample(rng) / cb.sample(rng) - r),
                threshold,
                reps,
                seed,
            )
        }
        TailStatistic::ScaledChiSquare { b } => {
            let cb = chi(b)?;
            let bf = b as f64;
            mc_tail_probability_with(|rng| sign * (cb.sample(rng) / bf - 1.0), threshold, reps, seed)
        }
    }
}

/// Empirical deviation probabilities of the two MSPE estimators at one ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationEstimate {
    pub epsilon: f64,
    /// `P(|ρ̂² - ρ²| > ε)`.
    pub rho_hat: TailEstimate,
    /// `P(|S_p - R²| > ε)`.
    pub sp: TailEstimate,
}

/// Deviation frequencies of `ρ̂²` around `ρ²` and of `S_p` around `R²`.
pub fn mc_deviation_probabilities(
    sampler: &PairSampler<'_>,
    eps: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<DeviationEstimate>> {
    let (n, k) = (sampler.n(), sampler.k());
    let r2 = unconditional_mspe(sampler.sigma2_m()?, n, k)?;
    let pairs = sample_mspe_pairs(sampler, reps, seed)?;
    let mut rho_hits = vec![0u64; eps.len()];
    let mut sp_hits = vec![0u64; eps.len()];
    for &(rho2, rss) in &pairs {
        let rho_hat = criterion_value(CriterionKind::RhoHat2, rss, n, k)?;
        let sp = criterion_value(CriterionKind::Sp, rss, n, k)?;
        for (i, &e) in eps.iter().enumerate() {
            rho_hits[i] += u64::from((rho_hat - rho2).abs() > e);
            sp_hits[i] += u64::from((sp - r2).abs() > e);
        }
    }
    Ok(eps
        .iter()
        .enumerate()
        .map(|(i, &e)| DeviationEstimate {
            epsilon: e,
            rho_hat: TailEstimate::from_counts(rho_hits[i], reps as u64),
            sp: TailEstimate::from_counts(sp_hits[i], reps as u64),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use DistributionKind::*;

    fn desk(id: u8, seed: u64) -> ScenarioConfig {
        ScenarioConfig::defaults(id, Scale::Desk, seed).unwrap()
    }

    #[test]
    fn zero_signal_and_noise_gives_zero_response() {
        let dgp = DgpSpec::identity(vec![0.0; 4], 0.0, ExponentialCentered, Normal).unwrap();
        let d = sample_design_and_response(&dgp, 20, 3).unwrap();
        assert!(d.y().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardized_draw_moments() {
        let n = 10_000;
        for kind in DistributionKind::ALL {
            let dgp = DgpSpec::identity(vec![0.0; 3], 1.0, kind, kind).unwrap();
            let d = sample_design_and_response(&dgp, n, 17).unwrap();
            let tol_mean = 4.0 / (n as f64).sqrt();
            let tol_var = 6.0 / (n as f64).sqrt();
            for j in 0..3 {
                let (m, v) = mean_var(d.x().col(j));
                assert!(m.abs() < tol_mean, "{kind:?} column {j} mean {m}");
                assert!((v - 1.0).abs() < tol_var, "{kind:?} column {j} var {v}");
            }
            if kind == BernoulliCentered {
                assert!(d.x().as_col_major().iter().all(|&v| v == 1.0 || v == -1.0));
            }
        }
    }

    #[test]
    fn dense_covariance_is_reproduced() {
        let sigma = vec![1.0, 0.6, 0.6, 2.0];
        let dgp = DgpSpec::new(vec![0.0, 0.0], 1.0, Some(sigma), Normal, Normal).unwrap();
        let d = sample_design_and_response(&dgp, 40_000, 5).unwrap();
        let (a, b) = (d.x().col(0), d.x().col(1));
        let cov = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64;
        assert!((cov - 0.6).abs() < 0.05);
        assert!((mean_var(b).1 - 2.0).abs() < 0.08);
    }

    #[test]
    fn sampling_is_deterministic() {
        let dgp = DgpSpec::identity(vec![1.0, -0.5], 1.0, ExponentialCentered, Normal).unwrap();
        let a = sample_design_and_response(&dgp, 50, 9).unwrap();
        let b = sample_design_and_response(&dgp, 50, 9).unwrap();
        let c = sample_design_and_response(&dgp, 50, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn defaults_and_overrides() {
        let p1 = ScenarioConfig::defaults(1, Scale::Paper, 0).unwrap();
        assert_eq!((p1.n, p1.p), (700, 600));
        let p2 = ScenarioConfig::defaults(2, Scale::Paper, 0).unwrap();
        assert_eq!((p2.n, p2.p, p2.block_size, p2.num_blocks()), (1300, 1000, 50, 20));
        let d3 = desk(3, 0);
        assert_eq!((d3.n, d3.p, d3.block_size, d3.num_blocks()), (260, 200, 20, 10));
        assert!(ScenarioConfig::defaults(4, Scale::Desk, 0).is_err());

        let o: ScenarioOverrides =
            serde_json::from_str(r#"{"scenario_id": 1, "seed": 4, "x_dist": "NORMAL", "n": 250}"#).unwrap();
        let c = o.resolve().unwrap();
        assert_eq!((c.n, c.p, c.seed, c.x_dist), (250, 170, 4, Normal));
        let bad: ScenarioOverrides = serde_json::from_str(r#"{"scenario_id": 2, "block_size": 30}"#).unwrap();
        assert!(bad.resolve().is_err());
        assert!(serde_json::from_str::<ScenarioOverrides>(r#"{"scenario_id": 1, "bogus": 1}"#).is_err());
        let neg: ScenarioOverrides = serde_json::from_str(r#"{"scenario_id": 1, "snr_target": -1}"#).unwrap();
        assert!(neg.resolve().is_err());
    }

    #[test]
    fn scenario_coefficients_have_exact_snr() {
        for id in 1..=3 {
            for scale in [Scale::Desk, Scale::Paper] {
                let c = ScenarioConfig::defaults(id, scale, 42).unwrap();
                let dgp = scenario_parameters(&c).unwrap();
                assert_eq!(dgp.p(), c.p);
                assert_eq!(dgp.sigma(), 1.0);
                let ss: f64 = dgp.beta().iter().map(|b| b * b).sum();
                assert_relative_eq!(ss, 25.0, max_relative = 1e-13);
                assert_relative_eq!(dgp.snr(), 5.0, max_relative = 1e-13);
                assert!(dgp.beta().iter().all(|&b| b != 0.0));
            }
        }
    }

    #[test]
    fn scenario1_coefficients_follow_the_decay_envelope() {
        for scale in [Scale::Desk, Scale::Paper] {
            for seed in 0..10 {
                let c = ScenarioConfig::defaults(1, scale, seed).unwrap();
                let beta = scenario_parameters(&c).unwrap().beta().to_vec();
                let trend: Vec<f64> = (1..=c.p).map(|j| (j as f64).powf(-0.6)).collect();
                let ratios: Vec<f64> = beta.iter().zip(&trend).map(|(b, t)| b / t).collect();
                let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
                assert!(lo > 0.0 && hi / lo <= 1.3 / 0.7 + 1e-12);
                // Any coefficient dominates every one at least 2.81 times further out.
                for i in 0..c.p {
                    let far = (((i + 1) as f64 * 2.81).ceil() as usize).max(i + 2);
                    for j in far - 1..c.p {
                        assert!(beta[i] > beta[j], "seed {seed}: beta[{i}] <= beta[{j}]");
                    }
                }
            }
        }
    }

    #[test]
    fn scenario2_has_three_large_blocks() {
        for scale in [Scale::Desk, Scale::Paper] {
            for seed in 0..10 {
                let c = ScenarioConfig::defaults(2, scale, seed).unwrap();
                let beta = scenario_parameters(&c).unwrap().beta().to_vec();
                let large = scenario2_large_blocks(&c);
                assert_eq!(large.len(), 3);
                let means: Vec<f64> = beta
                    .chunks(c.block_size)
                    .map(|b| b.iter().map(|v| v.abs()).sum::<f64>() / b.len() as f64)
                    .collect();
                let small_max = (0..means.len())
                    .filter(|b| !large.contains(b))
                    .map(|b| means[b])
                    .fold(0.0, f64::max);
                for &b in &large {
                    assert!(means[b] > 5.0 * small_max);
                }
            }
        }
    }

    #[test]
    fn scenario3_magnitudes_are_not_sparse() {
        let c = desk(3, 1);
        let beta = scenario_parameters(&c).unwrap().beta().to_vec();
        let (lo, hi) = beta
            .iter()
            .fold((f64::MAX, 0.0f64), |(l, h), b| (l.min(b.abs()), h.max(b.abs())));
        assert!(hi / lo <= 3.0 + 1e-12);
        assert!(beta.iter().any(|&b| b < 0.0) && beta.iter().any(|&b| b > 0.0));
    }

    #[test]
    fn scenario1_experiment_shape() {
        let r = run_scenario_experiment(&desk(1, 7)).unwrap();
        assert_eq!(r.rows.len(), 171);
        assert!(r.path.is_none());
        for w in r.rows.windows(2) {
            assert!(w[1].rss <= w[0].rss * (1.0 + 1e-12));
            assert_eq!(w[1].order, w[0].order + 1);
        }
        assert!(r.sup_abs_gcv_minus_rho2.is_finite());
        assert_eq!(r.r2_basis, R2Basis::GaussianFormula);
        assert_relative_eq!(r.rows[0].sigma2_m, 26.0, max_relative = 1e-14);
        assert!(r.rows.last().unwrap().aicc.is_some());
        assert_eq!(r.argmins.len(), 8);
    }

    #[test]
    fn block_experiments_follow_the_greedy_path() {
        for id in [2, 3] {
            let r = run_scenario_experiment(&desk(id, 3)).unwrap();
            assert_eq!(r.rows.len(), 11);
            let path = r.path.as_ref().unwrap();
            for (row, step) in r.rows.iter().zip(&path.steps) {
                assert_eq!(row.order, step.mask.order());
                assert_relative_eq!(row.rss, step.rss, max_relative = 1e-10);
            }
            assert_relative_eq!(r.rows[0].sigma2_m, 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn experiment_is_reproducible() {
        let c = desk(2, 11);
        assert_eq!(run_scenario_experiment(&c).unwrap(), run_scenario_experiment(&c).unwrap());
        assert_ne!(run_replication(&c, 0).unwrap().rows, run_replication(&c, 1).unwrap().rows);
    }

    #[test]
    fn tail_probability_extremes_and_errors() {
        let s = TailStatistic::ScaledChiSquare { b: 10 };
        assert_eq!(mc_tail_probability(s, Side::Upper, -1.5, 20_000, 1).unwrap().probability, 1.0);
        assert_eq!(mc_tail_probability(s, Side::Lower, 1.0, 20_000, 1).unwrap().probability, 0.0);
        assert!(mc_tail_probability(s, Side::Upper, 0.5, 9_999, 1).is_err());
    }

    #[test]
    fn tail_probability_matches_exact_chi_square_tail() {
        // P(χ²₁₀ > 15), exact: e^{-7.5} Σ_{j<5} 7.5^j / j!.
        let exact = 0.132_061_856_287_720_6;
        let est = mc_tail_probability(TailStatistic::ScaledChiSquare { b: 10 }, Side::Upper, 0.5, 1_000_000, 2).unwrap();
        assert!((est.probability - exact).abs() < 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn ks_distances() {
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_distance(&u, |x| x.clamp(0.0, 1.0)) <= 0.0005 + 1e-12);
        assert_eq!(ks_distance_two_sample(&u, &u), 0.0);
        let shifted: Vec<f64> = u.iter().map(|x| x + 0.25).collect();
        assert_relative_eq!(ks_distance_two_sample(&u, &shifted), 0.25, epsilon = 1.001e-3);
    }

    #[test]
    fn prop31_requires_gaussian_and_handles_empty_model() {
        let dgp = DgpSpec::identity(vec![1.0, 2.0], 1.0, ExponentialCentered, Normal).unwrap();
        let mask = ModelMask::leading(2, 1);
        assert!(matches!(
            mc_verify_prop31(30, &dgp, &mask, 100, 1),
            Err(Error::DistributionNotGaussian)
        ));
        let g = DgpSpec::identity(vec![1.0, 2.0], 1.0, Normal, Normal).unwrap();
        let rep = mc_verify_prop31(30, &g, &ModelMask::empty(2), 200, 1).unwrap();
        assert_eq!(rep.rho2_mean, 6.0);
        assert_eq!(rep.rho2_var, 0.0);
        assert!(rep.ks_distance.is_none());
    }

    #[test]
    fn bartlett_sampler_mean() {
        let s = PairSampler::Bartlett { n: 50, k: 10, sigma2_m: 2.0 };
        let pairs = sample_mspe_pairs(&s, 20_000, 4).unwrap();
        let rep = Prop31Report::from_pairs(50, 10, 2.0, &pairs).unwrap();
        assert!((rep.rho2_mean - rep.r2).abs() < 4.0 * rep.rho2_mean_se());
        assert!((rep.rss_scaled_mean - 40.0).abs() < 4.0 * rep.rss_mean_se());
        assert!(rep.ks_distance.unwrap() < 0.02);
    }
}
