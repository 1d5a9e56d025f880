use thiserror::Error;

use crate::lpsolver::LpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied something outside an operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid config: {0}")]
    Config(String),

    /// Simplex finished without an optimal vertex.
    #[error("linear program did not reach an optimum (status {0:?})")]
    Lp(LpStatus),

    #[error("no variables selected; lower ς or λ_p")]
    EmptySelection,

    #[error("selected design is rank deficient: {0}")]
    RankDeficient(String),

    #[error("instrument V explains Z completely; identifiability condition violated")]
    SingularSn,

    #[error("no complement; nothing to correct")]
    EmptyComplement,

    #[error("bandwidth too small for sample spread{}", .0.map(|r| format!(" (query row {})", r + 1)).unwrap_or_default())]
    KernelUnderflow(Option<usize>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("too many failed repetitions: {failed} of {reps}; first failure: {first}")]
    TooManyFailures {
        failed: usize,
        reps: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors that stem from user input or configuration rather than
    /// from numerical breakdown during a fit.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Dimension(_) | Error::Config(_) | Error::Csv(_) | Error::Io(_)
        )
    }
}
