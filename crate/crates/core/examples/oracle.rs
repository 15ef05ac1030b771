//! True prediction error of fitted submodels under a known generator, compared
//! with its unconditional expectation and the GCV estimate.

use mspe_lab::criteria::{criterion_value, CriterionKind};
use mspe_lab::oracle::{conditional_mspe, conditional_residual_variance, unconditional_mspe, DgpSpec, DistributionKind};
use mspe_lab::regression::fit_restricted_ls;
use mspe_lab::simulation::sample_design_and_response;
use mspe_lab::ModelMask;

fn main() -> mspe_lab::Result<()> {
    let beta: Vec<f64> = (1..=20).map(|j| (j as f64).powf(-0.8) * 2.0).collect();
    let dgp = DgpSpec::identity(beta, 1.0, DistributionKind::Normal, DistributionKind::Normal)?;
    let n = 80;
    let data = sample_design_and_response(&dgp, n, 7)?;

    println!("{:>3} {:>10} {:>10} {:>10} {:>10}", "k", "sigma2(m)", "E rho2", "rho2", "gcv");
    for k in [0, 2, 5, 10, 15, 20] {
        let mask = ModelMask::leading(20, k);
        let fit = fit_restricted_ls(&data, &mask)?;
        let s2 = conditional_residual_variance(&dgp, &mask)?;
        println!(
            "{k:>3} {s2:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            unconditional_mspe(s2, n, k)?,
            conditional_mspe(&dgp, &fit.beta_hat)?,
            criterion_value(CriterionKind::Gcv, fit.rss, n, k)?,
        );
    }
    Ok(())
}
