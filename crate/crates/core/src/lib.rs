//! Estimating out-of-sample prediction error for least-squares model selection.
//!
//! The crate evaluates data-driven criteria (GCV, `S_p`, `ρ̂²` and the classical
//! AIC, AICc, FPE and BIC) for candidate submodels, computes the true conditional
//! mean squared prediction error `ρ²(m)` under a known generator, and provides
//! finite-sample concentration bounds for the gap between the two.
//!
//! ```
//! use mspe_lab::{criteria::evaluate_models, search::leading_term_family};
//! use mspe_lab::oracle::{DgpSpec, DistributionKind::Normal};
//! use mspe_lab::simulation::sample_design_and_response;
//!
//! let dgp = DgpSpec::identity(vec![2.0, 1.0, 0.5, 0.0], 1.0, Normal, Normal)?;
//! let data = sample_design_and_response(&dgp, 50, 1)?;
//! let records = evaluate_models(&data, &leading_term_family(4, 4))?;
//! assert_eq!(records.len(), 5);
//! # Ok::<(), mspe_lab::Error>(())
//! ```

pub mod bounds;
pub mod cli;
pub mod criteria;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod regression;
pub mod report;
pub mod search;
pub mod simulation;
pub mod svg;
pub mod verify;

pub use error::{Error, Result};
pub use regression::{Dataset, FitResult, ModelMask};
