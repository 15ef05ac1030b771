//! Finite-sample deviation bounds for |GCV - rho2| across a range of model
//! sizes, and the union bound over a family of candidate models.

use mspe_lab::bounds::{deviation_bound_a4, deviation_bound_thm32, rate_a_n, uniform_bound_cor33};

fn main() -> mspe_lab::Result<()> {
    let n = 400;
    println!("{:>4} {:>6} {:>12} {:>12}", "k", "eps", "four-term", "simple");
    for k in [20, 100, 200, 300] {
        for eps in [0.25, 0.5, 1.0] {
            let a4 = deviation_bound_a4(n, k, 1.0, eps)?.sum();
            let simple = deviation_bound_thm32(n, k, 1.0, eps)?;
            println!("{k:>4} {eps:>6} {a4:>12.4e} {simple:>12.4e}");
        }
    }

    let (card, r_n) = (601, 0.5);
    println!("a_n = {:.4}", rate_a_n(card, n, r_n)?);
    for eps in [0.5, 1.0, 2.0] {
        println!("uniform bound, eps = {eps}: {:.4e}", uniform_bound_cor33(n, r_n, card, 1.0, eps)?);
    }
    Ok(())
}
