//! Greedy backward elimination over blocks of regressors, with GCV choosing a
//! point on the path.

use mspe_lab::criteria::{CriterionKind, CriterionRecord};
use mspe_lab::search::{greedy_block_elimination, select_best_index, BlockPartition};
use mspe_lab::simulation::{run_replication, scenario_parameters, sample_design_and_response, Scale, ScenarioConfig};

fn main() -> mspe_lab::Result<()> {
    let config = ScenarioConfig::defaults(2, Scale::Desk, 3)?;
    let dgp = scenario_parameters(&config)?;
    let data = sample_design_and_response(&dgp, config.n, config.seed)?;
    let partition = BlockPartition::contiguous(config.num_blocks(), config.block_size)?;

    let path = greedy_block_elimination(&data, &partition)?;
    let records = path
        .steps
        .iter()
        .map(|s| CriterionRecord::from_rss(s.mask.clone(), s.rss, data.n()))
        .collect::<mspe_lab::Result<Vec<_>>>()?;
    for (step, r) in path.steps.iter().zip(&records) {
        let dropped = step.eliminated_block.map_or("-".to_string(), |b| b.to_string());
        println!("drop {dropped:>2}  k = {:>3}  rss = {:>9.2}  gcv = {:.4}", r.k, r.rss, r.values[&CriterionKind::Gcv]);
    }
    let best = select_best_index(&records, CriterionKind::Gcv)?;
    println!("GCV stops after {best} eliminations (k = {})", records[best].k);

    let result = run_replication(&config, 0)?;
    let chosen = result.selected(CriterionKind::Gcv);
    println!("replication 0: GCV k = {}, rho2 = {:.4}, min rho2 = {:.4}", chosen.order, chosen.rho2, result.min_rho2());
    Ok(())
}
