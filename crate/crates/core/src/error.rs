use std::fmt;

use thiserror::Error;

use crate::criteria::CriterionKind;

/// Errors raised by fitting, criterion evaluation, bounds and search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model order {order} is too large for n = {n} (requires order < {limit})")]
    OrderTooLarge { order: usize, n: usize, limit: usize },

    #[error("selected columns are numerically collinear: rank {rank} of {order}")]
    RankDeficient { rank: usize, order: usize },

    #[error("covariance submatrix on the mask is singular")]
    SingularSubmatrix,

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("criterion {0} has no gray-curve transform")]
    UnsupportedKind(CriterionKind),

    #[error("candidate family is empty")]
    EmptyFamily,

    #[error("criterion {0} is missing from at least one record")]
    MissingCriterion(CriterionKind),

    #[error("{blocks} blocks exceed the exhaustive-enumeration limit of {max}")]
    TooManyBlocks { blocks: usize, max: usize },

    #[error("distributional law checks require NORMAL regressors and errors")]
    DistributionNotGaussian,

    #[error("invalid model mask: {0}")]
    InvalidMask(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid block partition: {0}")]
    InvalidPartition(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("fit failed for model {mask}: {source}")]
    Fit {
        mask: MaskLabel,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Tag a fit error with the mask it came from.
    pub(crate) fn at_mask(self, mask: &crate::regression::ModelMask) -> Self {
        Error::Fit {
            mask: MaskLabel::from(mask),
            source: Box::new(self),
        }
    }
}

/// Compact printable description of a mask, carried inside errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskLabel(pub String);

impl From<&crate::regression::ModelMask> for MaskLabel {
    fn from(mask: &crate::regression::ModelMask) -> Self {
        MaskLabel(mask.to_string())
    }
}

impl fmt::Display for MaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
