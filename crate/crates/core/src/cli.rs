//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input error,
//! 3 failed verification check.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bounds::{rate_a_n, uniform_bound_cor33, BoundReport};
use crate::criteria::{CriterionKind, CriterionRecord};
use crate::error::Error;
use crate::oracle::DistributionKind;
use crate::regression::Dataset;
use crate::report::{write_bounds_csv, write_experiment_csv, write_path_csv, RunManifest, StagedOutput, MANIFEST_FILE};
use crate::search::{greedy_block_elimination, select_best_defined_index, BlockPartition};
use crate::simulation::{run_scenario_experiment, scenario2_large_blocks, Scale, ScenarioConfig, ScenarioOverrides};
use crate::svg::render_experiment;
use crate::verify::Suite;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "MSPE_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mspe-lab", version, about = "Prediction-error criteria, oracles and bounds for least-squares model selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation scenario on one realization and write per-model results.
    Scenario(ScenarioArgs),
    /// Tabulate the deviation bounds for one model order.
    Bounds(BoundsArgs),
    /// Run a verification suite: prop31, dominance, lemmaA3 or robustness.
    Verify(VerifyArgs),
    /// Greedy block elimination on a CSV dataset.
    Search(SearchArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// JSON file with scenario settings; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario 1, 2 or 3.
    #[arg(long)]
    pub id: Option<u8>,
    #[arg(long)]
    pub scale: Option<Scale>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub x_dist: Option<DistributionKind>,
    #[arg(long)]
    pub u_dist: Option<DistributionKind>,
    /// Also write chart.svg.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub sigma2m: f64,
    /// Deviation levels, comma separated or repeated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub eps: Vec<f64>,
    /// Candidate family size; adds the uniform bound and rate with `r_n = k/n`.
    #[arg(long)]
    pub card: Option<usize>,
    /// Upper bound on `σ²(m)` used by the uniform bound (defaults to --sigma2m).
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub suite: String,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write report.json and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// CSV with header `y,x0,x1,...`.
    #[arg(long)]
    pub data: PathBuf,
    /// Blocks as inclusive column ranges, e.g. `0-1,2-3,4`.
    #[arg(long, conflicts_with = "block_size")]
    pub blocks: Option<String>,
    /// Consecutive blocks of this many columns.
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long, default_value = "gcv")]
    pub criterion: CriterionKind,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// An error together with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_)
            | Error::Domain(_)
            | Error::OrderTooLarge { .. }
            | Error::InvalidData(_)
            | Error::InvalidMask(_)
            | Error::InvalidPartition(_)
            | Error::ShapeMismatch { .. }
            | Error::TooManyBlocks { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::UnsupportedKind(_)
            | Error::MissingCriterion(_)
            | Error::EmptyFamily => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Configure the worker pool from [`THREADS_ENV`]; ignored if unset or invalid.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_threads();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

pub fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Scenario(a) => cmd_scenario(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Search(a) => cmd_search(a),
    }
}

fn resolve_scenario(a: &ScenarioArgs) -> CliResult<ScenarioConfig> {
    let mut o = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<ScenarioOverrides>(&text).map_err(Error::from)?
        }
        None => ScenarioOverrides::default(),
    };
    macro_rules! set {
        ($($field:ident = $flag:expr),*) => { $( if let Some(v) = $flag { o.$field = Some(v); } )* };
    }
    set!(
        scenario_id = a.id,
        scale = a.scale,
        seed = a.seed,
        n = a.n,
        p = a.p,
        block_size = a.block_size,
        snr_target = a.snr,
        x_dist = a.x_dist,
        u_dist = a.u_dist
    );
    if o.scenario_id.is_none() {
        return Err(CliError::usage("scenario id is required (--id or scenario_id in --config)"));
    }
    Ok(o.resolve()?)
}

#[derive(Serialize)]
struct ScenarioSummary<'a> {
    rows: usize,
    argmins: &'a std::collections::BTreeMap<String, usize>,
    sup_abs_gcv_minus_rho2: f64,
    max_rho2: f64,
    relative_gcv_error: f64,
    r2_basis: crate::simulation::R2Basis,
    large_blocks: Option<Vec<usize>>,
    elimination_order: Option<Vec<usize>>,
    beta: &'a [f64],
}

fn cmd_scenario(a: ScenarioArgs) -> CliResult<u8> {
    let start = Instant::now();
    let config = resolve_scenario(&a)?;
    let result = run_scenario_experiment(&config)?;

    let mut stage = StagedOutput::new(&a.out)?;
    stage.write("scenario.csv", |f| write_experiment_csv(f, &result.rows))?;
    if let Some(path) = &result.path {
        stage.write("path.csv", |f| write_path_csv(f, path))?;
    }
    let summary = ScenarioSummary {
        rows: result.rows.len(),
        argmins: &result.argmins,
        sup_abs_gcv_minus_rho2: result.sup_abs_gcv_minus_rho2,
        max_rho2: result.max_rho2,
        relative_gcv_error: result.relative_gcv_error(),
        r2_basis: result.r2_basis,
        large_blocks: (config.scenario_id == 2).then(|| scenario2_large_blocks(&config)),
        elimination_order: result.path.as_ref().map(|p| p.elimination_order()),
        beta: &result.beta,
    };
    stage.write_json("summary.json", &summary)?;
    if a.svg {
        let svg = render_experiment(&result);
        stage.write("chart.svg", |f| Ok(f.write_all(svg.as_bytes())?))?;
    }
    let manifest = finish_manifest(
        RunManifest::new("scenario", serde_json::to_value(&config).map_err(Error::from)?, Some(config.seed)),
        &stage,
        start,
    );
    stage.write_json(MANIFEST_FILE, &manifest)?;
    let out = stage.out_dir().display().to_string();
    stage.commit()?;
    println!("scenario {}: {} models written to {out}", config.scenario_id, result.rows.len());
    Ok(0)
}

fn finish_manifest(mut m: RunManifest, stage: &StagedOutput, start: Instant) -> RunManifest {
    m.artifacts = stage.files().to_vec();
    m.artifacts.push(MANIFEST_FILE.to_string());
    m.wall_time_secs = start.elapsed().as_secs_f64();
    m
}

#[derive(Serialize)]
struct UniformRow {
    epsilon: f64,
    card: usize,
    r_n: f64,
    c: f64,
    cor33: f64,
    a_n: f64,
}

fn cmd_bounds(a: BoundsArgs) -> CliResult<u8> {
    let start = Instant::now();
    if a.eps.is_empty() {
        return Err(CliError::usage("--eps needs at least one value"));
    }
    let reports = a
        .eps
        .iter()
        .map(|&e| BoundReport::evaluate(a.n, a.k, a.sigma2m, e))
        .collect::<crate::Result<Vec<_>>>()?;
    let uniform = match a.card {
        None => None,
        Some(card) => {
            let r_n = a.k as f64 / a.n as f64;
            let c = a.c.unwrap_or(a.sigma2m);
            let a_n = rate_a_n(card, a.n, r_n)?;
            Some(
                a.eps
                    .iter()
                    .map(|&e| {
                        Ok(UniformRow {
                            epsilon: e,
                            card,
                            r_n,
                            c,
                            cor33: uniform_bound_cor33(a.n, r_n, card, c, e)?,
                            a_n,
                        })
                    })
                    .collect::<crate::Result<Vec<_>>>()?,
            )
        }
    };

    let mut stage = StagedOutput::new(&a.out)?;
    stage.write("bounds.csv", |f| write_bounds_csv(f, &reports))?;
    if let Some(rows) = &uniform {
        stage.write("uniform.csv", |f| {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(f);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    let config = serde_json::json!({
        "n": a.n, "k": a.k, "sigma2m": a.sigma2m, "eps": a.eps, "card": a.card, "c": a.c,
    });
    let manifest = finish_manifest(RunManifest::new("bounds", config, None), &stage, start);
    stage.write_json(MANIFEST_FILE, &manifest)?;
    stage.commit()?;
    for r in &reports {
        println!("eps={} thm32={} a4_sum={} a5_sum={}", r.epsilon, r.thm32, r.a4_sum, r.a5_sum);
    }
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> CliResult<u8> {
    let start = Instant::now();
    let suite: Suite = a.suite.parse()?;
    if matches!(a.reps, Some(0)) {
        return Err(CliError::usage("--reps must be positive"));
    }
    let report = suite.run(a.reps, a.seed)?;
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    println!("{json}");
    if let Some(out) = &a.out {
        let mut stage = StagedOutput::new(out)?;
        stage.write_json("report.json", &report)?;
        let config = serde_json::json!({ "suite": suite.name(), "reps": a.reps, "seed": a.seed });
        let manifest = finish_manifest(RunManifest::new("verify", config, Some(a.seed)), &stage, start);
        stage.write_json(MANIFEST_FILE, &manifest)?;
        stage.commit()?;
    }
    for c in report.failures() {
        eprintln!("FAILED {}: observed {} required {}", c.name, c.observed, c.required);
    }
    Ok(if report.passed { 0 } else { 3 })
}

/// Parse `0-1,2-3,4` into blocks of inclusive column ranges.
pub fn parse_blocks(spec: &str) -> crate::Result<Vec<Vec<usize>>> {
    let bad = |part: &str| Error::InvalidPartition(format!("cannot parse block `{part}`"));
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|part| {
            let (lo, hi) = match part.split_once('-') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (part, part),
            };
            let lo: usize = lo.parse().map_err(|_| bad(part))?;
            let hi: usize = hi.parse().map_err(|_| bad(part))?;
            if hi < lo {
                return Err(bad(part));
            }
            Ok((lo..=hi).collect())
        })
        .collect()
}

#[derive(Serialize)]
struct Selection {
    criterion: &'static str,
    step: usize,
    order: usize,
    value: f64,
    columns: Vec<usize>,
    kept_blocks: Vec<usize>,
}

fn cmd_search(a: SearchArgs) -> CliResult<u8> {
    let start = Instant::now();
    let file = fs::File::open(&a.data)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", a.data.display())))?;
    let data = Dataset::from_csv_reader(file)?;
    let p = data.p();
    let partition = match (&a.blocks, a.block_size) {
        (Some(spec), _) => BlockPartition::new(parse_blocks(spec)?)?,
        (None, Some(size)) => {
            if size == 0 || p % size != 0 {
                return Err(CliError::usage(format!("--block-size {size} does not divide p = {p}")));
            }
            BlockPartition::contiguous(p / size, size)?
        }
        (None, None) => return Err(CliError::usage("give --blocks or --block-size")),
    };
    if partition.p_active() != p {
        return Err(CliError::usage(format!(
            "blocks cover {} of the {p} columns; every column must belong to a block",
            partition.p_active()
        )));
    }

    let path = greedy_block_elimination(&data, &partition)?;
    let records = path
        .steps
        .iter()
        .map(|s| CriterionRecord::from_rss(s.mask.clone(), s.rss, data.n()))
        .collect::<crate::Result<Vec<_>>>()?;
    let best = select_best_defined_index(&records, a.criterion)?;
    let removed: Vec<usize> = path.elimination_order()[..best].to_vec();
    let selection = Selection {
        criterion: a.criterion.name(),
        step: best,
        order: records[best].k,
        value: records[best].get(a.criterion).expect("selected among defined records"),
        columns: records[best].mask.indices().to_vec(),
        kept_blocks: (0..partition.num_blocks()).filter(|b| !removed.contains(b)).collect(),
    };

    let mut stage = StagedOutput::new(&a.out)?;
    stage.write("path.csv", |f| write_path_csv(f, &path))?;
    stage.write_json("selection.json", &selection)?;
    let config = serde_json::json!({
        "data": a.data, "blocks": a.blocks, "block_size": a.block_size, "criterion": a.criterion.name(),
    });
    let manifest = finish_manifest(RunManifest::new("search", config, None), &stage, start);
    stage.write_json(MANIFEST_FILE, &manifest)?;
    stage.commit()?;
    println!(
        "selected step {} (order {}, blocks {:?}) with {} = {}",
        selection.step, selection.order, selection.kept_blocks, a.criterion, selection.value
    );
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_spec_parsing() {
        assert_eq!(parse_blocks("0-1, 2-3,4").unwrap(), vec![vec![0, 1], vec![2, 3], vec![4]]);
        assert!(parse_blocks("3-1").is_err());
        assert!(parse_blocks("a-b").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::Config("x".into())).code, 2);
        assert_eq!(CliError::from(Error::RankDeficient { rank: 1, order: 2 }).code, 1);
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
