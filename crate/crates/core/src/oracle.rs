//! Ground-truth performance of a fitted submodel under a known generating process.
//!
//! With mean-zero regressors the conditional prediction error of `x'b` is
//! `σ² + (β - b)ᵀΣ(β - b)`, so everything here is a quadratic form in the
//! generator's parameters. The regressor sequence is truncated at `p`; the
//! scenario generators have no signal beyond that, so the truncation is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, forward_substitute};
use crate::regression::{check_order, ModelMask};

/// Marginal law of each regressor or error draw, standardized to mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DistributionKind {
    /// Standard normal.
    Normal,
    /// `Exp(1) - 1`.
    ExponentialCentered,
    /// `±1` with probability one half each.
    BernoulliCentered,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 3] = [
        DistributionKind::Normal,
        DistributionKind::ExponentialCentered,
        DistributionKind::BernoulliCentered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::Normal => "normal",
            DistributionKind::ExponentialCentered => "exponential",
            DistributionKind::BernoulliCentered => "bernoulli",
        }
    }
}

impl std::str::FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(DistributionKind::Normal),
            "exponential" | "exponential_centered" | "exp" => {
                Ok(DistributionKind::ExponentialCentered)
            }
            "bernoulli" | "bernoulli_centered" => Ok(DistributionKind::BernoulliCentered),
            _ => Err(Error::Config(format!("unknown distribution `{s}`"))),
        }
    }
}

/// Regressor covariance `Σ`: either the identity or an explicit SPD matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Identity,
    /// Row-major `p×p` matrix together with its lower Cholesky factor.
    Dense { matrix: Vec<f64>, chol: Vec<f64> },
}

/// Ground-truth generator `y = xᵀβ + σ·u` with `Cov(x) = Σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DgpSpecRepr", into = "DgpSpecRepr")]
pub struct DgpSpec {
    beta: Vec<f64>,
    sigma: f64,
    sigma_mat: Covariance,
    x_dist: DistributionKind,
    u_dist: DistributionKind,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaMatRepr {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

#[derive(Serialize, Deserialize)]
struct DgpSpecRepr {
    beta: Vec<f64>,
    sigma: f64,
    sigma_mat: SigmaMatRepr,
    x_dist: DistributionKind,
    u_dist: DistributionKind,
}

impl TryFrom<DgpSpecRepr> for DgpSpec {
    type Error = Error;

    fn try_from(r: DgpSpecRepr) -> Result<Self> {
        let p = r.beta.len();
        let matrix = match r.sigma_mat {
            SigmaMatRepr::Named(s) if s.eq_ignore_ascii_case("identity") => None,
            SigmaMatRepr::Named(s) => {
                return Err(Error::Config(format!(
                    "sigma_mat must be \"identity\" or a matrix, got \"{s}\""
                )))
            }
            SigmaMatRepr::Rows(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::Config(format!("sigma_mat must be {p}×{p}")));
                }
                Some(rows.concat())
            }
        };
        DgpSpec::new(r.beta, r.sigma, matrix, r.x_dist, r.u_dist)
    }
}

impl From<DgpSpec> for DgpSpecRepr {
    fn from(d: DgpSpec) -> Self {
        let p = d.beta.len();
        let sigma_mat = match &d.sigma_mat {
            Covariance::Identity => SigmaMatRepr::Named("identity".into()),
            Covariance::Dense { matrix, .. } => {
                SigmaMatRepr::Rows(matrix.chunks(p.max(1)).map(<[f64]>::to_vec).collect())
            }
        };
        DgpSpecRepr {
            beta: d.beta,
            sigma: d.sigma,
            sigma_mat,
            x_dist: d.x_dist,
            u_dist: d.u_dist,
        }
    }
}

impl DgpSpec {
    /// `sigma_mat = None` selects the identity covariance.
    pub fn new(
        beta: Vec<f64>,
        sigma: f64,
        sigma_mat: Option<Vec<f64>>,
        x_dist: DistributionKind,
        u_dist: DistributionKind,
    ) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if !beta.iter().all(|b| b.is_finite()) {
            return Err(Error::Config("beta has non-finite entries".into()));
        }
        let p = beta.len();
        let sigma_mat = match sigma_mat {
            None => Covariance::Identity,
            Some(matrix) => {
                if matrix.len() != p * p {
                    return Err(Error::ShapeMismatch {
                        expected: p * p,
                        actual: matrix.len(),
                    });
                }
                for i in 0..p {
                    for j in 0..i {
                        let (a, b) = (matrix[i * p + j], matrix[j * p + i]);
                        if (a - b).abs() > 1e-12 * (a.abs() + b.abs()).max(1.0) {
                            return Err(Error::Config("sigma_mat is not symmetric".into()));
                        }
                    }
                }
                let chol = cholesky(&matrix, p)
                    .ok_or_else(|| Error::Config("sigma_mat is not positive definite".into()))?;
                Covariance::Dense { matrix, chol }
            }
        };
        let spec = Self {
            beta,
            sigma,
            sigma_mat,
            x_dist,
            u_dist,
        };
        if !spec.var_y().is_finite() {
            return Err(Error::Config("Var[y] is not finite".into()));
        }
        Ok(spec)
    }

    pub fn identity(beta: Vec<f64>, sigma: f64, x_dist: DistributionKind, u_dist: DistributionKind) -> Result<Self> {
        Self::new(beta, sigma, None, x_dist, u_dist)
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &Covariance {
        &self.sigma_mat
    }

    pub fn x_dist(&self) -> DistributionKind {
        self.x_dist
    }

    pub fn u_dist(&self) -> DistributionKind {
        self.u_dist
    }

    pub fn is_gaussian(&self) -> bool {
        self.x_dist == DistributionKind::Normal && self.u_dist == DistributionKind::Normal
    }

    /// Lower Cholesky factor of `Σ`, or `None` for the identity.
    pub(crate) fn cholesky_factor(&self) -> Option<&[f64]> {
        match &self.sigma_mat {
            Covariance::Identity => None,
            Covariance::Dense { chol, .. } => Some(chol),
        }
    }

    /// `Σ v`.
    fn sigma_times(&self, v: &[f64]) -> Vec<f64> {
        match &self.sigma_mat {
            Covariance::Identity => v.to_vec(),
            Covariance::Dense { matrix, .. } => {
                let p = self.p();
                (0..p)
                    .map(|i| matrix[i * p..(i + 1) * p].iter().zip(v).map(|(a, b)| a * b).sum())
                    .collect()
            }
        }
    }

    fn quad_form(&self, v: &[f64]) -> f64 {
        self.sigma_times(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// `Var[y] = σ² + βᵀΣβ`.
    pub fn var_y(&self) -> f64 {
        self.sigma * self.sigma + self.quad_form(&self.beta)
    }

    /// Signal-to-noise ratio `(Var[y] - σ²)^{1/2} / σ`.
    pub fn snr(&self) -> f64 {
        self.quad_form(&self.beta).sqrt() / self.sigma
    }
}

/// Residual variance of `y` after projecting on the regressors in `mask`.
///
/// Under a Gaussian generator this is the conditional variance σ²(m); otherwise
/// it is the linear-projection residual variance given by the same formula.
pub fn conditional_residual_variance(dgp: &DgpSpec, mask: &ModelMask) -> Result<f64> {
    if mask.p() != dgp.p() {
        return Err(Error::ShapeMismatch {
            expected: dgp.p(),
            actual: mask.p(),
        });
    }
    let s2 = dgp.sigma * dgp.sigma;
    let value = match &dgp.sigma_mat {
        Covariance::Identity => {
            let omitted: f64 = dgp
                .beta
                .iter()
                .enumerate()
                .filter(|(j, _)| !mask.contains(*j))
                .map(|(_, b)| b * b)
                .sum();
            s2 + omitted
        }
        Covariance::Dense { matrix, .. } => {
            let p = dgp.p();
            let idx = mask.indices();
            let k = idx.len();
            let sb = dgp.sigma_times(&dgp.beta);
            let mut sub = vec![0.0; k * k];
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    sub[a * k + b] = matrix[i * p + j];
                }
            }
            let chol = cholesky(&sub, k).ok_or(Error::SingularSubmatrix)?;
            let mut c: Vec<f64> = idx.iter().map(|&i| sb[i]).collect();
            forward_substitute(&chol, k, &mut c);
            let explained: f64 = c.iter().map(|v| v * v).sum();
            s2 + dgp.quad_form(&dgp.beta) - explained
        }
    };
    Ok(value.max(s2))
}

/// Conditional mean squared prediction error ρ² of the predictor `xᵀ beta_hat`.
pub fn conditional_mspe(dgp: &DgpSpec, beta_hat: &[f64]) -> Result<f64> {
    if beta_hat.len() != dgp.p() {
        return Err(Error::ShapeMismatch {
            expected: dgp.p(),
            actual: beta_hat.len(),
        });
    }
    let d: Vec<f64> = dgp.beta.iter().zip(beta_hat).map(|(b, h)| b - h).collect();
    Ok(dgp.sigma * dgp.sigma + dgp.quad_form(&d))
}

/// Unconditional MSPE `R² = σ²(m)(n-1)/(n-1-k)` for a Gaussian sample.
pub fn unconditional_mspe(sigma2_m: f64, n: usize, k: usize) -> Result<f64> {
    check_order(k, n)?;
    let (nf, kf) = (n as f64, k as f64);
    Ok(sigma2_m * (nf - 1.0) / (nf - 1.0 - kf))
}

/// Exact variance of ρ² for a Gaussian sample, defined for `k < n - 3`.
pub fn mspe_variance(sigma2_m: f64, n: usize, k: usize) -> Result<f64> {
    if k + 3 >= n {
        return Err(Error::OrderTooLarge {
            order: k,
            n,
            limit: n.saturating_sub(3),
        });
    }
    let (nf, kf) = (n as f64, k as f64);
    let d = nf - kf - 1.0;
    Ok(2.0 * sigma2_m * sigma2_m * kf * (nf - 1.0) / (d * d * (nf - kf - 3.0)))
}

/// Large-n approximation `(2/n)σ⁴(m)(k/n)/(1-k/n)³` to [`mspe_variance`].
pub fn mspe_variance_approx(sigma2_m: f64, n: usize, k: usize) -> f64 {
    let (nf, r) = (n as f64, k as f64 / n as f64);
    2.0 / nf * sigma2_m * sigma2_m * r / (1.0 - r).powi(3)
}

/// Sample variance with `n - 1` denominator, the plug-in for an unknown `Var[y]`.
pub fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// True performance quantities of one fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRecord {
    pub mask: ModelMask,
    pub sigma2_m: f64,
    pub rho2: f64,
    pub r2: f64,
    /// Absent when `|m| >= n - 3`.
    pub var_rho2: Option<f64>,
}

impl OracleRecord {
    pub fn evaluate(dgp: &DgpSpec, mask: &ModelMask, beta_hat: &[f64], n: usize) -> Result<Self> {
        let k = mask.order();
        let sigma2_m = conditional_residual_variance(dgp, mask)?;
        Ok(Self {
            mask: mask.clone(),
            sigma2_m,
            rho2: conditional_mspe(dgp, beta_hat)?,
            r2: unconditional_mspe(sigma2_m, n, k)?,
            var_rho2: mspe_variance(sigma2_m, n, k).ok(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use DistributionKind::Normal;

    fn ar1(p: usize, rho: f64) -> Vec<f64> {
        let mut m = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                m[i * p + j] = rho.powi((i as i32 - j as i32).abs());
            }
        }
        m
    }

    #[test]
    fn covering_all_signal_leaves_noise() {
        let dgp = DgpSpec::identity(vec![1.0, -2.0, 0.0, 0.0], 0.5, Normal, Normal).unwrap();
        let m = ModelMask::new(4, [0, 1]).unwrap();
        assert_relative_eq!(conditional_residual_variance(&dgp, &m).unwrap(), 0.25);
        let dense = DgpSpec::new(vec![1.0, -2.0, 0.0, 0.0], 0.5, Some(ar1(4, 0.6)), Normal, Normal).unwrap();
        assert_relative_eq!(conditional_residual_variance(&dense, &m).unwrap(), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn identity_closed_form_and_empty_mask() {
        let dgp = DgpSpec::identity(vec![1.0, 1.0, 0.0], 1.0, Normal, Normal).unwrap();
        let m0 = ModelMask::new(3, [0]).unwrap();
        assert_eq!(conditional_residual_variance(&dgp, &m0).unwrap(), 2.0);
        let e = ModelMask::empty(3);
        assert_eq!(conditional_residual_variance(&dgp, &e).unwrap(), dgp.var_y());
        assert_eq!(dgp.var_y(), 3.0);

        let dense = DgpSpec::new(vec![1.0, 0.5, -1.0], 1.0, Some(ar1(3, 0.4)), Normal, Normal).unwrap();
        assert_relative_eq!(
            conditional_residual_variance(&dense, &ModelMask::empty(3)).unwrap(),
            dense.var_y(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn dense_sigma_two_regressors_by_hand() {
        // Σ = [[1, r], [r, 1]], β = (0, 1), m = {0}: Var[y | x0] = σ² + 1 - r².
        let r = 0.6;
        let dgp = DgpSpec::new(vec![0.0, 1.0], 1.0, Some(vec![1.0, r, r, 1.0]), Normal, Normal).unwrap();
        let m = ModelMask::new(2, [0]).unwrap();
        assert_relative_eq!(conditional_residual_variance(&dgp, &m).unwrap(), 2.0 - r * r, epsilon = 1e-14);
    }

    #[test]
    fn mspe_quadratic_form() {
        let dgp = DgpSpec::identity(vec![1.0, 0.0], 1.0, Normal, Normal).unwrap();
        assert_eq!(conditional_mspe(&dgp, &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(conditional_mspe(&dgp, &[0.0, 0.0]).unwrap(), 2.0);
        assert_relative_eq!(conditional_mspe(&dgp, &[0.5, 0.5]).unwrap(), 1.5);
        assert!(matches!(
            conditional_mspe(&dgp, &[0.0]),
            Err(Error::ShapeMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn unconditional_and_variance_formulas() {
        assert_relative_eq!(unconditional_mspe(3.7, 20, 0).unwrap(), 3.7, max_relative = 1e-15);
        assert_relative_eq!(unconditional_mspe(2.0, 11, 5).unwrap(), 4.0);
        assert!(unconditional_mspe(1.0, 11, 10).is_err());
        assert_eq!(mspe_variance(1.0, 20, 0).unwrap(), 0.0);
        assert_relative_eq!(mspe_variance(1.0, 20, 4).unwrap(), 152.0 / 2925.0, epsilon = 1e-15);
        assert!(mspe_variance(1.0, 20, 17).is_err());
        assert!(mspe_variance(1.0, 20, 16).is_ok());
        let exact = mspe_variance(1.0, 10_000, 2_000).unwrap();
        let approx = mspe_variance_approx(1.0, 10_000, 2_000);
        assert_relative_eq!(exact, approx, max_relative = 2e-3);
    }

    #[test]
    fn rejects_bad_covariance() {
        assert!(DgpSpec::new(vec![1.0, 1.0], 1.0, Some(vec![1.0, 2.0, 2.0, 1.0]), Normal, Normal).is_err());
        assert!(DgpSpec::new(vec![1.0, 1.0], 1.0, Some(vec![1.0, 0.1, 0.2, 1.0]), Normal, Normal).is_err());
        assert!(DgpSpec::new(vec![1.0], -1.0, None, Normal, Normal).is_err());
    }

    #[test]
    fn json_forms() {
        let text = r#"{"beta":[1.0,2.0],"sigma":1.0,"sigma_mat":"identity","x_dist":"EXPONENTIAL_CENTERED","u_dist":"NORMAL"}"#;
        let d: DgpSpec = serde_json::from_str(text).unwrap();
        assert_eq!(d.covariance(), &Covariance::Identity);
        assert_eq!(d.x_dist(), DistributionKind::ExponentialCentered);
        assert_eq!(serde_json::to_string(&d).unwrap(), text);

        let text = r#"{"beta":[1.0,2.0],"sigma":0.5,"sigma_mat":[[1.0,0.3],[0.3,1.0]],"x_dist":"NORMAL","u_dist":"BERNOULLI_CENTERED"}"#;
        let d: DgpSpec = serde_json::from_str(text).unwrap();
        assert!(matches!(d.covariance(), Covariance::Dense { .. }));
        let back: DgpSpec = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);

        let bad = r#"{"beta":[1.0],"sigma":1.0,"sigma_mat":"diag","x_dist":"NORMAL","u_dist":"NORMAL"}"#;
        assert!(serde_json::from_str::<DgpSpec>(bad).is_err());
    }

    #[test]
    fn sample_variance_uses_n_minus_one() {
        assert_relative_eq!(sample_variance(&[1.0, 2.0, 3.0, 4.0]), 5.0 / 3.0);
    }

    proptest! {
        #[test]
        fn conditioning_on_more_never_increases_residual_variance(
            beta in proptest::collection::vec(-2.0f64..2.0, 5),
            rho in -0.8f64..0.8,
            picks in proptest::collection::btree_set(0usize..5, 0..4),
            extra in 0usize..5,
        ) {
            let dgp = DgpSpec::new(beta, 0.7, Some(ar1(5, rho)), Normal, Normal).unwrap();
            let small = ModelMask::new(5, picks.iter().copied()).unwrap();
            let mut bigger: Vec<usize> = picks.iter().copied().collect();
            if !bigger.contains(&extra) { bigger.push(extra); }
            let big = ModelMask::new(5, bigger).unwrap();
            let s_small = conditional_residual_variance(&dgp, &small).unwrap();
            let s_big = conditional_residual_variance(&dgp, &big).unwrap();
            prop_assert!(s_big <= s_small + 1e-12);
            prop_assert!(s_small <= dgp.var_y() + 1e-12);
            prop_assert!(s_big >= 0.49 - 1e-12);
        }
    }
}
