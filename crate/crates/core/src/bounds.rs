//! Finite-sample tail bounds for ratios of chi-squared variables and for the
//! deviation of the MSPE estimators from their targets.
//!
//! The Chernoff rate functions are
//!
//! ```text
//! K(r, c) = (1 + r) log((1 + r + c)/(1 + r)) - r log((r + c)/r)    r > 0, c > -r
//! L(c)    = c - log(1 + c)                                          c > -1
//! Ψ(x)    = (x/(x + 1))² / 8                                        x ≥ 0
//! ```
//!
//! For independent `A ~ χ²_a`, `B ~ χ²_b`, `P(A/B - a/b > ε) ≤ exp(-(b/2) K(a/b, ε))`
//! and `P(B/b - 1 > ε) ≤ exp(-(b/2) L(ε))`, with the lower tails using `-ε`.
//! The deviation bounds for `|ρ̂² - ρ²|` and `|S_p - R²|` are built from these.
//! Bounds larger than one are returned unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::check_order;

/// Which tail a bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Side {
    Upper,
    Lower,
}

/// Chernoff rate for the ratio of independent chi-squared variables.
pub fn rate_function_k(r: f64, c: f64) -> Result<f64> {
    if !(r > 0.0) || !(c > -r) || !r.is_finite() || !c.is_finite() {
        return Err(Error::domain(format!("K(r, c) needs r > 0 and c > -r, got r={r}, c={c}")));
    }
    Ok(k_unchecked(r, c))
}

#[inline]
fn k_unchecked(r: f64, c: f64) -> f64 {
    // log1p keeps precision for small |c|, where both terms nearly cancel.
    let v = (1.0 + r) * (c / (1.0 + r)).ln_1p() - r * (c / r).ln_1p();
    v.max(0.0)
}

/// Limit of `K(r, c)` as `r -> 0` for `c > 0`: `log(1 + c)`.
#[inline]
fn k_at_zero_ratio(c: f64) -> f64 {
    c.ln_1p()
}

/// Chernoff rate for a scaled chi-squared variable.
pub fn rate_function_l(c: f64) -> Result<f64> {
    if !(c > -1.0) || !c.is_finite() {
        return Err(Error::domain(format!("L(c) needs c > -1, got {c}")));
    }
    Ok(l_unchecked(c))
}

#[inline]
fn l_unchecked(c: f64) -> f64 {
    (c - c.ln_1p()).max(0.0)
}

/// `Ψ(x) = (x/(x+1))²/8`.
pub fn psi(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("Ψ(x) needs x >= 0, got {x}")));
    }
    Ok(psi_unchecked(x))
}

#[inline]
fn psi_unchecked(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.125;
    }
    let t = x / (x + 1.0);
    t * t / 8.0
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("epsilon must be positive and finite, got {eps}")))
    }
}

/// Bound on `P(A/B - a/b > eps)` (upper) or `P(A/B - a/b < -eps)` (lower),
/// for independent `A ~ χ²_a`, `B ~ χ²_b`.
pub fn ratio_tail_bound(a: usize, b: usize, eps: f64, side: Side) -> Result<f64> {
    if a == 0 || b == 0 {
        return Err(Error::domain("degrees of freedom must be at least 1"));
    }
    check_eps(eps)?;
    let r = a as f64 / b as f64;
    let half_b = b as f64 / 2.0;
    Ok(match side {
        Side::Upper => (-half_b * k_unchecked(r, eps)).exp(),
        Side::Lower if eps < r => (-half_b * k_unchecked(r, -eps)).exp(),
        Side::Lower => 0.0,
    })
}

/// Bound on `P(B/b - 1 > eps)` (upper) or `P(B/b - 1 < -eps)` (lower), `B ~ χ²_b`.
pub fn chisq_tail_bound(b: usize, eps: f64, side: Side) -> Result<f64> {
    if b == 0 {
        return Err(Error::domain("degrees of freedom must be at least 1"));
    }
    check_eps(eps)?;
    let half_b = b as f64 / 2.0;
    Ok(match side {
        Side::Upper => (-half_b * l_unchecked(eps)).exp(),
        Side::Lower if eps < 1.0 => (-half_b * l_unchecked(-eps)).exp(),
        Side::Lower => 0.0,
    })
}

fn check_sigma2(sigma2_m: f64) -> Result<()> {
    if sigma2_m >= 0.0 && sigma2_m.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("sigma2_m must be finite and >= 0, got {sigma2_m}")))
    }
}

/// Simple bound on `P(|ρ̂²(m) - ρ²(m)| > eps)`:
/// `4 exp[-n(1 - k/n) Ψ((eps/(2σ²(m)))(1 - k/n))]`, zero when `σ²(m) = 0`.
pub fn deviation_bound_thm32(n: usize, k: usize, sigma2_m: f64, eps: f64) -> Result<f64> {
    check_order(k, n)?;
    check_sigma2(sigma2_m)?;
    check_eps(eps)?;
    if sigma2_m == 0.0 {
        return Ok(0.0);
    }
    let (nf, kf) = (n as f64, k as f64);
    let shrink = 1.0 - kf / nf;
    let x = eps / (2.0 * sigma2_m) * shrink;
    Ok(4.0 * (-nf * shrink * psi_unchecked(x)).exp())
}

/// The four terms of the sharper bound on `P(|ρ̂²(m) - ρ²(m)| > eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A4Terms {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
}

impl A4Terms {
    pub fn sum(&self) -> f64 {
        self.b1 + self.b2 + self.b3 + self.b4
    }
}

/// `B1..B4`: B1/B3 bound the two tails of the `χ²_k/χ²_{n+1-k}` ratio part,
/// B2/B4 the two tails of the `χ²_{n-k}` residual part.
///
/// At `k = 0` the ratio part is degenerate; B1 uses the `r -> 0` limit
/// `K(0, c) = log(1 + c)` and B3 is zero.
pub fn deviation_bound_a4(n: usize, k: usize, sigma2_m: f64, eps: f64) -> Result<A4Terms> {
    check_order(k, n)?;
    check_sigma2(sigma2_m)?;
    check_eps(eps)?;
    if sigma2_m == 0.0 {
        return Ok(A4Terms {
            b1: 0.0,
            b2: 0.0,
            b3: 0.0,
            b4: 0.0,
        });
    }
    let (nf, kf) = (n as f64, k as f64);
    let c = eps / (2.0 * sigma2_m);
    let ratio_df = nf + 1.0 - kf;
    let r = kf / ratio_df;
    let resid_df = nf - kf;
    let x = c * ratio_df / (nf + 1.0);

    let b1 = if k == 0 {
        (-ratio_df / 2.0 * k_at_zero_ratio(c)).exp()
    } else {
        (-ratio_df / 2.0 * k_unchecked(r, c)).exp()
    };
    let b3 = if c >= r {
        0.0
    } else {
        (-ratio_df / 2.0 * k_unchecked(r, -c)).exp()
    };
    let b2 = (-resid_df / 2.0 * l_unchecked(x)).exp();
    // x < 1 exactly when c < (n+1)/(n+1-k).
    let b4 = if x >= 1.0 {
        0.0
    } else {
        (-resid_df / 2.0 * l_unchecked(-x)).exp()
    };
    Ok(A4Terms { b1, b2, b3, b4 })
}

/// Terms of the bound on `P(|S_p(m) - R²(m)| > eps)` and its Ψ-form majorant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A5Terms {
    pub c1: f64,
    pub c2: f64,
    /// `2 exp[-(n-k) Ψ((eps/σ²(m))(1 - k/(n-1)))]`.
    pub psi_form: f64,
}

impl A5Terms {
    pub fn sum(&self) -> f64 {
        self.c1 + self.c2
    }
}

pub fn sp_deviation_bound_a5(n: usize, k: usize, sigma2_m: f64, eps: f64) -> Result<A5Terms> {
    check_order(k, n)?;
    check_sigma2(sigma2_m)?;
    check_eps(eps)?;
    if sigma2_m == 0.0 {
        return Ok(A5Terms {
            c1: 0.0,
            c2: 0.0,
            psi_form: 0.0,
        });
    }
    let (nf, kf) = (n as f64, k as f64);
    let resid_df = nf - kf;
    let x = eps / sigma2_m * (nf - 1.0 - kf) / (nf - 1.0);
    let c1 = (-resid_df / 2.0 * l_unchecked(x)).exp();
    let c2 = if x >= 1.0 {
        0.0
    } else {
        (-resid_df / 2.0 * l_unchecked(-x)).exp()
    };
    let psi_form = 2.0 * (-resid_df * psi_unchecked(eps / sigma2_m * (1.0 - kf / (nf - 1.0)))).exp();
    Ok(A5Terms { c1, c2, psi_form })
}

fn check_ratio(r_n: f64) -> Result<()> {
    if (0.0..1.0).contains(&r_n) {
        Ok(())
    } else {
        Err(Error::domain(format!("r_n must lie in [0, 1), got {r_n}")))
    }
}

/// Bonferroni bound on `P(sup_m |ρ̂²(m) - ρ²(m)| > eps)` over `card` models of
/// order at most `r_n·n`, uniformly over generators with `Var[y] <= c`.
pub fn uniform_bound_cor33(n: usize, r_n: f64, card: usize, c: f64, eps: f64) -> Result<f64> {
    check_ratio(r_n)?;
    check_eps(eps)?;
    if card == 0 {
        return Err(Error::domain("family cardinality must be at least 1"));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("c must be positive and finite, got {c}")));
    }
    let nf = n as f64;
    let shrink = 1.0 - r_n;
    Ok(4.0 * card as f64 * (-nf * shrink * psi_unchecked(eps / (2.0 * c) * shrink)).exp())
}

/// Uniform estimation-error rate `sqrt(log(card + 1) / (n (1 - r_n)³))`.
pub fn rate_a_n(card: usize, n: usize, r_n: f64) -> Result<f64> {
    check_ratio(r_n)?;
    if card == 0 || n == 0 {
        return Err(Error::domain("card and n must be at least 1"));
    }
    Ok(((card as f64 + 1.0).ln() / (n as f64 * (1.0 - r_n).powi(3))).sqrt())
}

/// Every deviation bound evaluated at one `(n, k, σ²(m), ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub k: usize,
    pub sigma2_m: f64,
    pub epsilon: f64,
    pub thm32: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub a4_sum: f64,
    pub c1: f64,
    pub c2: f64,
    pub a5_sum: f64,
    pub a5_psi_form: f64,
}

impl BoundReport {
    pub fn evaluate(n: usize, k: usize, sigma2_m: f64, epsilon: f64) -> Result<Self> {
        let thm32 = deviation_bound_thm32(n, k, sigma2_m, epsilon)?;
        let a4 = deviation_bound_a4(n, k, sigma2_m, epsilon)?;
        let a5 = sp_deviation_bound_a5(n, k, sigma2_m, epsilon)?;
        Ok(Self {
            n,
            k,
            sigma2_m,
            epsilon,
            thm32,
            b1: a4.b1,
            b2: a4.b2,
            b3: a4.b3,
            b4: a4.b4,
            a4_sum: a4.sum(),
            c1: a5.c1,
            c2: a5.c2,
            a5_sum: a5.sum(),
            a5_psi_form: a5.psi_form,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Reference values below were evaluated with 40-digit arithmetic.

    #[test]
    fn rate_function_values() {
        for r in [0.1, 1.0, 7.5] {
            assert_eq!(rate_function_k(r, 0.0).unwrap(), 0.0);
        }
        assert_relative_eq!(rate_function_k(1.0, 1.0).unwrap(), 0.117_783_035_656_383_45, epsilon = 1e-15);
        let below = rate_function_k(0.5, -0.25).unwrap();
        assert_relative_eq!(below, 0.073_091_255_089_040_72, epsilon = 1e-15);
        assert_relative_eq!(rate_function_k(0.5, 0.25).unwrap(), 0.028_493_465_686_805_265, epsilon = 1e-15);
        assert!(below > rate_function_k(0.5, 0.25).unwrap());

        assert_eq!(rate_function_l(0.0).unwrap(), 0.0);
        assert_relative_eq!(rate_function_l(1.0).unwrap(), 0.306_852_819_440_054_7, epsilon = 1e-15);
        assert_relative_eq!(rate_function_l(-0.5).unwrap(), 0.193_147_180_559_945_3, epsilon = 1e-15);

        assert_eq!(psi(0.0).unwrap(), 0.0);
        assert_eq!(psi(1.0).unwrap(), 0.031_25);
        assert!(psi(1e6).unwrap() < 0.125);
        assert_eq!(psi(f64::INFINITY).unwrap(), 0.125);
    }

    #[test]
    fn domains() {
        assert!(rate_function_k(0.0, 1.0).is_err());
        assert!(rate_function_k(1.0, -1.0).is_err());
        assert!(rate_function_l(-1.0).is_err());
        assert!(psi(-0.1).is_err());
        assert!(ratio_tail_bound(0, 3, 0.1, Side::Upper).is_err());
        assert!(chisq_tail_bound(3, 0.0, Side::Upper).is_err());
        assert!(uniform_bound_cor33(10, 1.0, 1, 1.0, 1.0).is_err());
        assert!(rate_a_n(0, 10, 0.1).is_err());
        assert!(deviation_bound_thm32(10, 9, 1.0, 1.0).is_err());
    }

    #[test]
    fn tail_bound_values() {
        assert_eq!(ratio_tail_bound(2, 10, 0.2, Side::Lower).unwrap(), 0.0);
        assert_eq!(ratio_tail_bound(2, 10, 0.3, Side::Lower).unwrap(), 0.0);
        assert!(ratio_tail_bound(2, 10, 0.1, Side::Lower).unwrap() > 0.0);
        assert_relative_eq!(
            ratio_tail_bound(10, 10, 1.0, Side::Upper).unwrap(),
            0.554_928_957_306_643_6,
            epsilon = 1e-15
        );
        assert_eq!(chisq_tail_bound(5, 1.0, Side::Lower).unwrap(), 0.0);
        assert_eq!(chisq_tail_bound(5, 1.5, Side::Lower).unwrap(), 0.0);
        assert_relative_eq!(
            chisq_tail_bound(20, 1.0, Side::Upper).unwrap(),
            0.046_489_528_076_784_49,
            epsilon = 1e-15
        );
    }

    #[test]
    fn thm32_values() {
        assert_eq!(deviation_bound_thm32(100, 50, 0.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(
            deviation_bound_thm32(100, 50, 1.0, 1.0).unwrap(),
            3.115_203_132_285_619_5,
            epsilon = 1e-14
        );
        let a = deviation_bound_thm32(100, 30, 1.0, 0.5).unwrap();
        assert!(deviation_bound_thm32(100, 30, 1.0, 0.6).unwrap() < a);
        assert!(deviation_bound_thm32(100, 31, 1.0, 0.5).unwrap() > a);
    }

    #[test]
    fn a4_values() {
        let t = deviation_bound_a4(100, 50, 1.0, 1.0).unwrap();
        assert_relative_eq!(t.b1, 0.344_414_573_635_824_7, epsilon = 1e-14);
        assert_relative_eq!(t.b2, 0.504_677_127_854_949_1, epsilon = 1e-14);
        assert_relative_eq!(t.b3, 0.043_332_158_143_428_04, epsilon = 1e-14);
        assert_relative_eq!(t.b4, 0.381_816_433_465_599_8, epsilon = 1e-14);
        assert_relative_eq!(t.sum(), 1.274_240_293_099_801_7, epsilon = 1e-14);

        let z = deviation_bound_a4(100, 50, 0.0, 1.0).unwrap();
        assert_eq!(z.sum(), 0.0);

        // 2σ²·max(k/(n+1-k), (n+1)/(n+1-k)) = 2·101/51 ≈ 3.96
        let big = deviation_bound_a4(100, 50, 1.0, 4.0).unwrap();
        assert_eq!((big.b3, big.b4), (0.0, 0.0));
        assert!(big.b1 > 0.0 && big.b2 > 0.0);
    }

    #[test]
    fn a5_values() {
        let t = sp_deviation_bound_a5(100, 50, 1.0, 1.0).unwrap();
        assert_relative_eq!(t.c1, 0.098_133_470_503_837_5, epsilon = 1e-14);
        assert_relative_eq!(t.c2, 0.009_061_834_065_546_877, epsilon = 1e-14);
        assert_relative_eq!(t.psi_form, 1.008_087_948_660_771, epsilon = 1e-14);
        let z = sp_deviation_bound_a5(100, 50, 0.0, 1.0).unwrap();
        assert_eq!((z.c1, z.c2, z.psi_form), (0.0, 0.0, 0.0));
        // eps/σ² >= (n-1)/(n-1-k) = 99/49
        assert_eq!(sp_deviation_bound_a5(100, 50, 1.0, 99.0 / 49.0).unwrap().c2, 0.0);
    }

    #[test]
    fn bound_chain_on_grid() {
        for n in [50usize, 100, 500] {
            for frac in [0.1, 0.5, 0.9] {
                let k = (frac * n as f64) as usize;
                for s2 in [0.3, 1.0, 4.0] {
                    for e in [0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 5.0] {
                        let eps = e * s2;
                        let r = BoundReport::evaluate(n, k, s2, eps).unwrap();
                        assert!(r.a4_sum <= r.thm32 * (1.0 + 1e-12), "{r:?}");
                        assert!(r.thm32 <= 4.0);
                        assert!(r.a5_sum <= r.a5_psi_form * (1.0 + 1e-12), "{r:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn cor33_and_rate() {
        let b = deviation_bound_thm32(100, 30, 2.0, 0.7).unwrap();
        assert_relative_eq!(uniform_bound_cor33(100, 0.3, 1, 2.0, 0.7).unwrap(), b, epsilon = 1e-15);
        assert_relative_eq!(
            uniform_bound_cor33(100, 0.3, 2, 2.0, 0.7).unwrap(),
            2.0 * b,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            uniform_bound_cor33(700, 6.0 / 7.0, 601, 26.0, 2.0).unwrap(),
            2_403.102_857_878_320_6,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            rate_a_n(601, 700, 6.0 / 7.0).unwrap(),
            1.770_911_106_803_874,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            rate_a_n(10, 400, 0.25).unwrap() / rate_a_n(10, 1600, 0.25).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        let big_n = 1usize << 40;
        assert_relative_eq!(
            rate_a_n(1, big_n, 0.0).unwrap(),
            (2f64.ln() / big_n as f64).sqrt(),
            max_relative = 1e-14
        );
    }

    proptest! {
        #[test]
        fn k_and_l_are_nonnegative_and_vanish_only_at_zero(r in 1e-3f64..50.0, u in -0.999f64..20.0) {
            let c = u * r;
            let k = rate_function_k(r, c).unwrap();
            prop_assert!(k >= 0.0);
            if c.abs() > 1e-3 { prop_assert!(k > 0.0); }
            let l = rate_function_l(u).unwrap();
            prop_assert!(l >= 0.0);
            if u.abs() > 1e-4 { prop_assert!(l > 0.0); }
        }

        #[test]
        fn psi_is_increasing_and_bounded(a in 0.0f64..1e3, d in 1e-3f64..1e3) {
            let p = psi(a).unwrap();
            prop_assert!(p < psi(a + d).unwrap());
            prop_assert!(p < 0.125);
        }
    }
}
