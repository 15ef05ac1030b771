//! Run a desk-scale scenario and write its table and chart to a directory.
//!
//! `cargo run --example scenario -- 3 /tmp/scenario3`

use std::fs::{self, File};
use std::path::PathBuf;

use mspe_lab::report::write_experiment_csv;
use mspe_lab::simulation::{run_scenario_experiment, Scale, ScenarioConfig};
use mspe_lab::svg::render_experiment;

fn main() -> mspe_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: u8 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "scenario-out".into()));

    let config = ScenarioConfig::defaults(id, Scale::Desk, 1)?;
    let result = run_scenario_experiment(&config)?;
    fs::create_dir_all(&out)?;
    write_experiment_csv(File::create(out.join("scenario.csv"))?, &result.rows)?;
    fs::write(out.join("chart.svg"), render_experiment(&result))?;

    println!("scenario {id}: {} models, n = {}, p = {}", result.rows.len(), config.n, config.p);
    println!("sup |GCV - rho2| / max rho2 = {:.4}", result.relative_gcv_error());
    for (name, i) in &result.argmins {
        println!("{name:>5} -> k = {}", result.rows[*i].order);
    }
    println!("wrote {}", out.display());
    Ok(())
}
