use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate field pair: {0}")]
    DegenerateFields(String),

    #[error("chart is not realizable by a real state: {0}")]
    ConjugacyViolation(String),

    #[error("point outside the coordinate domain x1*x2 != 0 (|x1 x2| = {0:e})")]
    OutsideDomain(f64),

    #[error("separation constant m must be nonzero")]
    ZeroM,

    #[error("L is undefined at this state (radicand {0:e})")]
    UndefinedL(f64),

    #[error("negative radicand {value:e} in {what}")]
    NegativeRadicand { what: &'static str, value: f64 },

    #[error("point is not admissible: {0}")]
    Inadmissible(String),

    #[error("vanishing denominator in reconstruction: {0}")]
    VanishingDenominator(&'static str),

    #[error("interval is unbounded: {0}")]
    UnboundedInterval(String),

    #[error("degenerate oscillation interval at s = {0}")]
    DegenerateInterval(f64),

    #[error("invalid domain for elliptic integral: {0}")]
    EllipticDomain(String),

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
