use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),
    #[error("subsystem selection must not be empty")]
    EmptySelection,
    #[error("invalid subsystem partition: {0}")]
    InvalidPartition(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("not a valid density operator: {0}")]
    InvalidState(String),
    #[error("not unitary: defect {0:e}")]
    NotUnitary(f64),
    #[error("matrix is singular or ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("incomplete measurement: elements sum to identity only within {0:e}")]
    IncompleteMeasurement(f64),
    #[error("state is not classical on `{0}`")]
    NotClassical(String),
    #[error("budget exceeded: {required} elements required, budget is {budget} (log2 size bound {log2_bound:.3})")]
    BudgetExceeded {
        required: f64,
        budget: usize,
        log2_bound: f64,
    },
    #[error("side condition violated: {0}")]
    SideCondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
