//! Model-selection objective functions.
//!
//! GCV, S_p and the auxiliary ρ̂² are rescalings of `RSS/(n-k)`; AIC, AICc, FPE
//! and BIC are kept on the exponential scale so that every criterion is a
//! positive multiple of RSS and argmins compare directly. Each of the last four
//! equals GCV times a deterministic factor in `(n, k)`, and the same factor
//! applied to ρ² gives the "gray curve" that criterion effectively tracks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{check_order, fit_restricted_ls, Dataset, ModelMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CriterionKind {
    Gcv,
    Sp,
    RhoHat2,
    Aic,
    Aicc,
    Fpe,
    Bic,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 7] = [
        CriterionKind::Gcv,
        CriterionKind::Sp,
        CriterionKind::RhoHat2,
        CriterionKind::Aic,
        CriterionKind::Aicc,
        CriterionKind::Fpe,
        CriterionKind::Bic,
    ];

    /// The four criteria that carry a nontrivial gray curve.
    pub const CLASSICAL: [CriterionKind; 4] = [
        CriterionKind::Aic,
        CriterionKind::Aicc,
        CriterionKind::Fpe,
        CriterionKind::Bic,
    ];

    /// Lower-case identifier used on the command line and in CSV headers.
    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::Gcv => "gcv",
            CriterionKind::Sp => "sp",
            CriterionKind::RhoHat2 => "rho_hat2",
            CriterionKind::Aic => "aic",
            CriterionKind::Aicc => "aicc",
            CriterionKind::Fpe => "fpe",
            CriterionKind::Bic => "bic",
        }
    }

    /// Largest admissible order is `n - 2 - slack` with slack 1 for AICc.
    fn order_slack(self) -> usize {
        match self {
            CriterionKind::Aicc => 1,
            _ => 0,
        }
    }

    /// Whether `k` is a valid order for this criterion at sample size `n`.
    pub fn is_defined(self, n: usize, k: usize) -> bool {
        k + 2 + self.order_slack() <= n
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CriterionKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown criterion `{s}`")))
    }
}

fn check_kind_order(kind: CriterionKind, n: usize, k: usize) -> Result<()> {
    if kind.is_defined(n, k) {
        Ok(())
    } else {
        Err(Error::OrderTooLarge {
            order: k,
            n,
            limit: n - 1 - kind.order_slack(),
        })
    }
}

/// Value of the selection objective `kind` for a model of order `k` with
/// residual sum of squares `rss` on `n` observations.
pub fn criterion_value(kind: CriterionKind, rss: f64, n: usize, k: usize) -> Result<f64> {
    check_kind_order(kind, n, k)?;
    if !(rss >= 0.0) {
        return Err(Error::domain(format!("rss must be nonnegative, got {rss}")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let per_df = rss / (nf - kf);
    let mean_rss = rss / nf;
    Ok(match kind {
        CriterionKind::Gcv => per_df * (nf / (nf - kf)),
        CriterionKind::Sp => per_df * ((nf - 1.0) / (nf - 1.0 - kf)),
        CriterionKind::RhoHat2 => per_df * ((nf + 1.0) / (nf + 1.0 - kf)),
        CriterionKind::Aic => mean_rss * (2.0 * kf / nf).exp(),
        CriterionKind::Aicc => mean_rss * (2.0 * (kf + 1.0) / (nf - kf - 2.0)).exp(),
        CriterionKind::Fpe => mean_rss * (1.0 + kf / nf) / (1.0 - kf / nf),
        CriterionKind::Bic => mean_rss * nf.powf(kf / nf),
    })
}

/// Multiplier turning ρ² into the gray curve tracked by `kind`.
pub fn gray_curve_factor(kind: CriterionKind, n: usize, k: usize) -> Result<f64> {
    check_kind_order(kind, n, k)?;
    let (nf, kf) = (n as f64, k as f64);
    let shrink = (1.0 - kf / nf).powi(2);
    match kind {
        CriterionKind::Aic => Ok((2.0 * kf / nf).exp() * shrink),
        CriterionKind::Fpe => Ok((1.0 + kf / nf) * (1.0 - kf / nf)),
        CriterionKind::Aicc => Ok((2.0 * (kf + 1.0) / (nf - kf - 2.0)).exp() * shrink),
        CriterionKind::Bic => Ok(nf.powf(kf / nf) * shrink),
        other => Err(Error::UnsupportedKind(other)),
    }
}

/// The gray-curve value: `rho2` times [`gray_curve_factor`].
pub fn gray_curve_value(kind: CriterionKind, rho2: f64, n: usize, k: usize) -> Result<f64> {
    if !(rho2 >= 0.0) {
        return Err(Error::domain(format!("rho2 must be nonnegative, got {rho2}")));
    }
    Ok(rho2 * gray_curve_factor(kind, n, k)?)
}

/// Criterion values of one fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionRecord {
    pub mask: ModelMask,
    pub k: usize,
    pub rss: f64,
    /// AICc is absent when `k >= n - 2`.
    pub values: BTreeMap<CriterionKind, f64>,
    /// Set at `k = n - 3`, where the AICc exponent is `2(n - 2)`.
    pub aicc_at_boundary: bool,
}

impl CriterionRecord {
    /// Evaluate every criterion defined at this order.
    pub fn from_rss(mask: ModelMask, rss: f64, n: usize) -> Result<Self> {
        let k = mask.order();
        check_order(k, n)?;
        let mut values = BTreeMap::new();
        for kind in CriterionKind::ALL {
            if kind.is_defined(n, k) {
                values.insert(kind, criterion_value(kind, rss, n, k)?);
            }
        }
        Ok(Self {
            mask,
            k,
            rss,
            values,
            aicc_at_boundary: k + 3 == n,
        })
    }

    pub fn get(&self, kind: CriterionKind) -> Option<f64> {
        self.values.get(&kind).copied()
    }
}

/// Fit each mask and evaluate all criteria, preserving input order.
pub fn evaluate_models(data: &Dataset, family: &[ModelMask]) -> Result<Vec<CriterionRecord>> {
    family
        .par_iter()
        .map(|mask| {
            let fit = fit_restricted_ls(data, mask).map_err(|e| e.at_mask(mask))?;
            CriterionRecord::from_rss(mask.clone(), fit.rss, data.n())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ColMatrix;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use CriterionKind::*;

    #[test]
    fn all_rescalings_agree_at_order_zero() {
        for kind in [Gcv, Sp, RhoHat2] {
            assert_eq!(criterion_value(kind, 10.0, 10, 0).unwrap(), 1.0);
        }
    }

    #[test]
    fn hand_evaluated_values() {
        assert_relative_eq!(criterion_value(Gcv, 8.0, 10, 2).unwrap(), 1.25, epsilon = 1e-15);
        assert_relative_eq!(criterion_value(Sp, 8.0, 10, 2).unwrap(), 9.0 / 7.0, epsilon = 1e-15);
        assert_relative_eq!(
            criterion_value(RhoHat2, 8.0, 10, 2).unwrap(),
            11.0 / 9.0,
            epsilon = 1e-15
        );
        // 0.8·e^0.4 evaluated to 40 digits.
        assert_relative_eq!(
            criterion_value(Aic, 8.0, 10, 2).unwrap(),
            1.193_459_758_113_016_3,
            epsilon = 1e-14
        );
    }

    #[test]
    fn gray_curve_hand_values() {
        assert_eq!(gray_curve_value(Aic, 1.0, 10, 0).unwrap(), 1.0);
        assert_relative_eq!(gray_curve_value(Fpe, 2.0, 10, 5).unwrap(), 1.5, epsilon = 1e-15);
        // 100^0.1 · 0.81 evaluated to 40 digits.
        assert_relative_eq!(
            gray_curve_value(Bic, 1.0, 100, 10).unwrap(),
            1.283_763_485_893_502,
            epsilon = 1e-14
        );
        assert!(matches!(gray_curve_value(Gcv, 1.0, 10, 2), Err(Error::UnsupportedKind(Gcv))));
    }

    #[test]
    fn order_preconditions() {
        assert!(criterion_value(Gcv, 1.0, 10, 8).is_ok());
        assert!(matches!(
            criterion_value(Gcv, 1.0, 10, 9),
            Err(Error::OrderTooLarge { .. })
        ));
        assert!(criterion_value(Aicc, 1.0, 10, 7).is_ok());
        assert!(criterion_value(Aicc, 1.0, 10, 8).is_err());
        assert!(criterion_value(Gcv, -1.0, 10, 1).is_err());
    }

    #[test]
    fn record_drops_aicc_near_the_limit() {
        let r = CriterionRecord::from_rss(ModelMask::leading(10, 8), 1.0, 10).unwrap();
        assert!(r.get(Aicc).is_none());
        assert!(r.get(Gcv).is_some());
        let r = CriterionRecord::from_rss(ModelMask::leading(10, 7), 1.0, 10).unwrap();
        assert!(r.aicc_at_boundary);
        assert!(r.get(Aicc).unwrap().is_finite());
    }

    #[test]
    fn parsing_names() {
        assert_eq!("GCV".parse::<CriterionKind>().unwrap(), Gcv);
        assert_eq!("rho_hat2".parse::<CriterionKind>().unwrap(), RhoHat2);
        assert!("cp".parse::<CriterionKind>().is_err());
    }

    #[test]
    fn factor_bias_directions_on_grid() {
        for n in 8..=200usize {
            for k in 2..=n - 3 {
                let x = k as f64 / n as f64;
                assert!(gray_curve_factor(Aic, n, k).unwrap() < 1.0, "aic n={n} k={k}");
                assert!(gray_curve_factor(Fpe, n, k).unwrap() < 1.0, "fpe n={n} k={k}");
                assert!(gray_curve_factor(Aicc, n, k).unwrap() > 1.0, "aicc n={n} k={k}");
                // The BIC factor exceeds one only while k/n·ln n + 2 ln(1 - k/n) > 0;
                // for large k/n the (1 - k/n)² shrinkage wins.
                let bic_above = x * (n as f64).ln() + 2.0 * (1.0 - x).ln() > 0.0;
                assert_eq!(gray_curve_factor(Bic, n, k).unwrap() > 1.0, bic_above, "bic n={n} k={k}");
            }
        }
        assert!(gray_curve_factor(Bic, 8, 2).unwrap() < 1.0);
        assert!(gray_curve_factor(Bic, 200, 190).unwrap() < 1.0);
        assert!(gray_curve_factor(Bic, 200, 170).unwrap() > 1.0);
    }

    #[test]
    fn evaluate_models_composes_fit_and_criteria() {
        let n = 12;
        let x: Vec<f64> = (0..n * 5).map(|i| ((i * 37 % 17) as f64 - 8.0) / 5.0).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i * 13 % 7) as f64) - 3.0).collect();
        let d = Dataset::new(ColMatrix::from_col_major(n, 5, x), y.clone()).unwrap();
        let family: Vec<_> = (0..=5).map(|k| ModelMask::leading(5, k)).collect();
        let recs = evaluate_models(&d, &family).unwrap();
        let ysq: f64 = y.iter().map(|v| v * v).sum();
        for kind in [Gcv, Sp, RhoHat2] {
            assert_relative_eq!(recs[0].get(kind).unwrap(), ysq / n as f64, max_relative = 1e-14);
        }
        for w in recs.windows(2) {
            assert!(w[1].rss <= w[0].rss * (1.0 + 1e-12));
        }
        for (r, m) in recs.iter().zip(&family) {
            let rss = fit_restricted_ls(&d, m).unwrap().rss;
            assert_eq!(r.rss, rss);
            for kind in CriterionKind::ALL {
                assert_eq!(r.get(kind), Some(criterion_value(kind, rss, n, m.order()).unwrap()));
            }
        }
    }

    #[test]
    fn evaluate_models_tags_failing_mask() {
        let n = 6;
        let mut x = vec![0.0; n * 2];
        for i in 0..n {
            x[i] = i as f64;
            x[n + i] = 2.0 * i as f64;
        }
        let d = Dataset::new(ColMatrix::from_col_major(n, 2, x), vec![1.0; n]).unwrap();
        let err = evaluate_models(&d, &[ModelMask::leading(2, 1), ModelMask::full(2)]).unwrap_err();
        match err {
            Error::Fit { mask, source } => {
                assert_eq!(mask.0, "{0..=1}/2");
                assert!(matches!(*source, Error::RankDeficient { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn rescalings_are_strictly_ordered(rss in 1e-6f64..1e6, n in 5usize..400, frac in 0.0f64..1.0) {
            let k = 1 + ((n - 3) as f64 * frac) as usize;
            prop_assume!(k + 2 <= n);
            let g = criterion_value(Gcv, rss, n, k).unwrap();
            let s = criterion_value(Sp, rss, n, k).unwrap();
            let r = criterion_value(RhoHat2, rss, n, k).unwrap();
            prop_assert!(r < g && g < s);
        }

        #[test]
        fn classical_criteria_are_gcv_times_gray_factor(rss in 0.0f64..1e4, rho2 in 1e-3f64..1e3, n in 8usize..500, frac in 0.0f64..1.0) {
            let k = ((n - 4) as f64 * frac) as usize;
            let gcv = criterion_value(Gcv, rss, n, k).unwrap();
            for kind in CriterionKind::CLASSICAL {
                let c = criterion_value(kind, rss, n, k).unwrap();
                let f = gray_curve_factor(kind, n, k).unwrap();
                prop_assert!((c - gcv * f).abs() <= 1e-12 * c.abs().max(1e-300));
                let gray = gray_curve_value(kind, rho2, n, k).unwrap();
                prop_assert!((gray / rho2 - f).abs() <= 1e-12 * f);
            }
        }

        #[test]
        fn fpe_dominates_aic(rss in 1e-3f64..1e4, n in 3usize..500, frac in 0.0f64..1.0) {
            let k = ((n - 2) as f64 * frac) as usize;
            let aic = criterion_value(Aic, rss, n, k).unwrap();
            let fpe = criterion_value(Fpe, rss, n, k).unwrap();
            if k == 0 {
                prop_assert_eq!(aic, fpe);
            } else {
                prop_assert!(fpe > aic);
            }
        }

        #[test]
        fn criteria_increase_in_rss(rss in 1e-3f64..1e4, bump in 1e-6f64..1.0, n in 6usize..300, frac in 0.0f64..1.0) {
            let k = ((n - 3) as f64 * frac) as usize;
            for kind in CriterionKind::ALL {
                let a = criterion_value(kind, rss, n, k).unwrap();
                let b = criterion_value(kind, rss * (1.0 + bump), n, k).unwrap();
                prop_assert!(b > a);
                prop_assert!(a >= 0.0);
            }
        }
    }
}
