use thiserror::Error;

/// Errors raised by the expression, flow, bisubmersion, kernel and operator layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("trajectory left the chart box at t={t:.6} (state {point:?})")]
    DomainEscape { t: f64, point: Vec<f64> },

    #[error("integrator exceeded {0} steps")]
    StepLimit(usize),

    #[error("base mismatch: {0}")]
    BaseMismatch(String),

    #[error("not a bisection: {0}")]
    NotABisection(String),

    #[error("translate has empty domain")]
    EmptyTranslate,

    #[error("coefficient not supported in the bisection image: {0}")]
    SupportViolation(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("side mismatch: {0}")]
    SideMismatch(String),

    #[error("host mismatch: {0}")]
    HostMismatch(String),

    #[error("not transverse: {0}")]
    NotTransverse(String),

    #[error("generators do not commute: |[X{i},X{j}]| = {residual:.3e} at {point:?}")]
    BracketNotZero {
        i: usize,
        j: usize,
        residual: f64,
        point: Vec<f64>,
    },

    #[error("leaf sampling too coarse: nearest sample at distance {distance:.3e} (reach {reach:.3e})")]
    InsufficientLeafSampling { distance: f64, reach: f64 },

    #[error("convolution nesting deeper than {0}")]
    NestingLimit(usize),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
