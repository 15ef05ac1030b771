//! Evaluate every selection criterion along the leading-term family of a
//! simulated dataset and report each criterion's choice.

use mspe_lab::criteria::{evaluate_models, CriterionKind};
use mspe_lab::oracle::{DgpSpec, DistributionKind};
use mspe_lab::search::{leading_term_family, select_best};
use mspe_lab::simulation::sample_design_and_response;

fn main() -> mspe_lab::Result<()> {
    let beta: Vec<f64> = (1..=40).map(|j| 3.0 / j as f64).collect();
    let dgp = DgpSpec::identity(beta, 1.0, DistributionKind::Normal, DistributionKind::Normal)?;
    let data = sample_design_and_response(&dgp, 120, 42)?;
    let records = evaluate_models(&data, &leading_term_family(40, 40))?;

    println!("{:>3} {:>10} {:>10} {:>10}", "k", "rss", "gcv", "bic");
    for r in records.iter().step_by(5) {
        println!("{:>3} {:>10.3} {:>10.4} {:>10.4}", r.k, r.rss, r.values[&CriterionKind::Gcv], r.values[&CriterionKind::Bic]);
    }
    for kind in CriterionKind::ALL {
        let best = select_best(&records, kind)?;
        println!("{:>5} selects k = {}", kind.name(), best.order());
    }
    Ok(())
}
