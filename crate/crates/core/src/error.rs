use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A function was evaluated outside the region where it is defined.
    #[error("domain error in {what}: {detail}")]
    Domain { what: String, detail: String },

    /// The radial distance fell below the guard of an inverse-power potential.
    #[error("singularity in {what}: r = {r:e} is below the guard {guard:e}")]
    Singularity { what: String, r: f64, guard: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite component in {0}")]
    NonFinite(String),

    #[error("trajectory parameter must increase strictly: {next} after {last}")]
    NonMonotone { last: f64, next: f64 },

    #[error("integration exceeded max_steps = {0}")]
    MaxSteps(usize),

    #[error("adaptive step size underflow at parameter {0}")]
    StepUnderflow(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("generator Jacobian is not invertible at q = {0:?}")]
    NonInvertible(Vec<f64>),

    /// An invariant failed the conservation gate when it was admitted.
    #[error("{name} is not conserved: max |[He, I]| = {max:e} exceeds {tol:e}")]
    NotConserved { name: String, max: f64, tol: f64 },
}

impl Error {
    pub fn domain(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::Domain {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::Singularity { .. }
                | Error::NonFinite(_)
                | Error::MaxSteps(_)
                | Error::StepUnderflow(_)
                | Error::NonInvertible(_)
        )
    }
}
