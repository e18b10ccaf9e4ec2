use thiserror::Error;

use crate::gdiff::Failure;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("derivator decreases at {at}: {detail}")]
    MonotonicityViolation { at: f64, detail: String },
    #[error("segments disagree with the declared jump at {at}: expected right value {expected}, found {found}")]
    LeftContinuityViolation { at: f64, expected: f64, found: f64 },
    #[error("endpoint hypothesis violated: {0}")]
    EndpointHypothesisViolation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{t} lies outside [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("domains differ: [{a0}, {b0}] vs [{a1}, {b1}]")]
    DomainMismatch { a0: f64, b0: f64, a1: f64, b1: f64 },
    #[error("integrand is not finite near {at}")]
    UnboundedIntegrand { at: f64 },
    #[error("integration failed: {0}")]
    IntegrationFailure(String),
    #[error("g-derivative does not exist at {at}: {failure}")]
    DerivativeFailure { at: f64, failure: Failure },
    #[error("denominator vanishes at {at}")]
    DenominatorVanishes { at: f64 },
    #[error("cannot decide local constancy of f to the right of {at}")]
    CaseUndetermined { at: f64 },
    #[error("dominance hypothesis fails at {at}: |f'| = {f_deriv} > h' = {h_deriv}")]
    HypothesisFailed { at: f64, f_deriv: f64, h_deriv: f64 },
    #[error("g(b) = g(a); mean slope undefined")]
    DegenerateDenominator,
    #[error("closure condition on the jump set fails")]
    ClosureConditionFailed,
    #[error("kernel element is not right-continuous at jump {at}")]
    RightContinuityViolation { at: f64 },
    #[error("1 + p*dg vanishes at {at}")]
    RegressivityViolation { at: f64 },
    #[error("f(t*) vanishes at {at}")]
    ZeroDenominator { at: f64 },
    #[error("not a kernel element (first failure at {at:?})")]
    KernelViolation { at: Option<f64> },
    #[error("initial value mismatch: expected {expected}, found {found}")]
    InitialValueMismatch { expected: f64, found: f64 },
    #[error("residual {residual} exceeds tolerance {tol}")]
    ResidualTooLarge { residual: f64, tol: f64 },
}
