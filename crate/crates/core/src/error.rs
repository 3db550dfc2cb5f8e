use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error(
        "matrix is not skew-symmetric (asymmetry {asymmetry:.3e}); attitude state is corrupted"
    )]
    NotSkewSymmetric { asymmetry: f64 },

    #[error("rotation block is not orthonormal (|R^T R - I|_F = {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("geometric controller singularity: {0}")]
    ControllerSingularity(&'static str),

    #[error("trajectory speed vanishes at t = {t}; heading is undefined")]
    SingularHeading { t: f64 },

    #[error("rollout diverged at step {step}: non-finite state")]
    Diverged { step: usize },

    #[error("tuning aborted at iteration {iteration}: {source}")]
    TuneAborted {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("adaptive integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("incomplete rollout record: {0}")]
    IncompleteRecord(&'static str),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn dim(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
