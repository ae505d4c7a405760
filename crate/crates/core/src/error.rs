use thiserror::Error;

use crate::bundle::FlowRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),

    #[error("central charge vanishes on this model; phase is undefined")]
    ZeroCharge,

    #[error("unknown name `{0}`")]
    NameError(String),

    #[error("metric is not positive definite at {count} grid points (first offenders: {first:?})")]
    NotPositive { count: usize, first: Vec<usize> },

    #[error("no Hamiltonian action: {0}")]
    NoHamiltonianAction(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(
        "flow did not converge after {iterations} iterations (residual sup-norm {residual:e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<FlowRecord>,
    },

    #[error("central charge crossed zero along the flow")]
    PhaseCollapse,

    #[error("invalid input: {0}")]
    Invalid(String),
}
