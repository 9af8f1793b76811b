use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("negative concentration c[{index}] = {value}")]
    NegativeConcentration { index: usize, value: f64 },

    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("steady-state residual {residual:e} exceeds tolerance {tol:e}")]
    SteadyStateResidual { residual: f64, tol: f64 },

    #[error("inconsistent rank: {0}")]
    InconsistentRank(String),

    #[error("indeterminate sign of {which}: |value| = {value:e} inside deadband {deadband:e}")]
    IndeterminateSign {
        which: &'static str,
        value: f64,
        deadband: f64,
    },

    #[error("matrix is numerically singular: |det| = {det:e} < {threshold:e}")]
    NearSingular { det: f64, threshold: f64 },

    #[error("marginal eigenvalue {re:e}{im:+e}i inside the zero dead zone")]
    MarginalEigenvalue { re: f64, im: f64 },

    #[error("instability condition not satisfied (margin {0:e})")]
    ConditionNotSatisfied(f64),

    #[error("no positive root: {0}")]
    NoPositiveRoot(String),

    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("bracket not found: {0}")]
    BracketNotFound(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("positivity violation: {0}")]
    Positivity(String),

    #[error("growth window not found: {0}")]
    WindowNotFound(String),

    #[error("parse error: {0}")]
    Parse(String),
}
