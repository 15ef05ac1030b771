//! Monte Carlo checks: the law of rho2 for a fixed model, and a chi-squared
//! tail probability against its Chernoff bound.

use mspe_lab::bounds::{chisq_tail_bound, Side};
use mspe_lab::oracle::{DgpSpec, DistributionKind};
use mspe_lab::simulation::{mc_tail_probability, mc_verify_prop31, TailStatistic};
use mspe_lab::ModelMask;

fn main() -> mspe_lab::Result<()> {
    let beta: Vec<f64> = (1..=30).map(|j| 2.0 / j as f64).collect();
    let dgp = DgpSpec::identity(beta, 1.0, DistributionKind::Normal, DistributionKind::Normal)?;
    let mask = ModelMask::leading(30, 20);
    let rep = mc_verify_prop31(60, &dgp, &mask, 5_000, 1)?;
    println!("R^2 = {:.4}", rep.r2);
    println!("mean rho2 = {:.4} +- {:.4}", rep.rho2_mean, rep.rho2_mean_se());
    println!("mean S_p  = {:.4} +- {:.4}", rep.sp_mean, rep.sp_mean_se());
    if let Some(ks) = rep.ks_distance {
        println!("KS distance to scaled F = {ks:.4}");
    }

    let (b, eps) = (20, 0.5);
    let mc = mc_tail_probability(TailStatistic::ScaledChiSquare { b }, Side::Upper, eps, 200_000, 2)?;
    let bound = chisq_tail_bound(b, eps, Side::Upper)?;
    println!("P(chi2_{b}/{b} - 1 > {eps}) = {:.5} +- {:.5}, bound {bound:.5}", mc.probability, mc.std_error);
    Ok(())
}
