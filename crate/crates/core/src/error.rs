use crate::money::Money;

/// Errors produced by model construction and evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    /// A field failed an invariant check.
    #[error("{field}: {reason}")]
    Validation { field: String, reason: String },

    /// A year index fell outside the operating horizon.
    #[error("year {year} is outside the operating horizon 1..={horizon}")]
    YearOutOfHorizon { year: u32, horizon: u32 },

    /// Discount rates must stay above -100%.
    #[error("discount rate must be greater than -1, got {rate}")]
    RateBelowFloor { rate: f64 },

    /// A cash-flow series with no sign change has no internal rate of return.
    #[error("cash-flow series has no sign change, IRR is undefined")]
    NoSignChange,

    /// A sign change exists but no root lies in the solver's (-0.999, 10] range.
    #[error("no IRR root bracketed in (-0.999, 10]")]
    IrrNotBracketed,

    /// A positive pool cannot be paid out over zero allocated shares.
    #[error("cannot distribute {pool} across a ledger with no allocated shares")]
    UndistributablePool { pool: Money },

    /// Ledger or application CSV could not be read.
    #[error("csv: {0}")]
    Csv(String),
}

impl ModelError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ModelError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
