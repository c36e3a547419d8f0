use thiserror::Error;

/// Failures mapped onto process exit codes.
#[derive(Debug, Error, PartialEq)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Budget(_) => 3,
            AppError::Assertion(_) => 4,
        }
    }
}

impl From<weyl_core::census::CensusError> for AppError {
    fn from(e: weyl_core::census::CensusError) -> Self {
        use weyl_core::census::CensusError as C;
        match e {
            C::BudgetExceeded { .. } => AppError::Budget(e.to_string()),
            C::MarkovViolated { .. } | C::ProjectionExceedsBound { .. } => AppError::Assertion(e.to_string()),
            other => AppError::Config(other.to_string()),
        }
    }
}

impl From<weyl_core::expsum::ExpSumError> for AppError {
    fn from(e: weyl_core::expsum::ExpSumError) -> Self {
        use weyl_core::expsum::ExpSumError as E;
        match e {
            E::BudgetExceeded { .. } => AppError::Budget(e.to_string()),
            other => AppError::Config(other.to_string()),
        }
    }
}

impl From<weyl_core::discrepancy::DiscrepancyError> for AppError {
    fn from(e: weyl_core::discrepancy::DiscrepancyError) -> Self {
        use weyl_core::discrepancy::DiscrepancyError as D;
        match e {
            D::BudgetExceeded { .. } => AppError::Budget(e.to_string()),
            other => AppError::Config(other.to_string()),
        }
    }
}

impl From<weyl_core::exponents::ExponentError> for AppError {
    fn from(e: weyl_core::exponents::ExponentError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<weyl_core::polyfam::FamilyError> for AppError {
    fn from(e: weyl_core::polyfam::FamilyError) -> Self {
        AppError::Config(e.to_string())
    }
}
