use thiserror::Error;

/// Errors raised by the solvers and validators in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structurally invalid argument (misaligned vectors, bad grid, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A modelling assumption required by the solver does not hold.
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// No allocation can satisfy the buyer-mass constraint.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("solver error: {0}")]
    Solver(String),

    /// The price-function certificate for a binary design did not verify.
    #[error("certificate failed (envelope={a_envelope}, support={b_support}, mean={c_mean}, worst violation {worst_violation:e})")]
    CertificateFailed {
        a_envelope: bool,
        b_support: bool,
        c_mean: bool,
        worst_violation: f64,
    },

    /// The requested operation is not available for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Problem size exceeds what the exhaustive routines accept.
    #[error("size error: {0}")]
    Size(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    /// Short machine-readable code for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Assumption(_) => "assumption",
            Error::Infeasible(_) => "infeasible",
            Error::Solver(_) => "solver",
            Error::CertificateFailed { .. } => "certificate_failed",
            Error::Unsupported(_) => "unsupported",
            Error::Size(_) => "size",
        }
    }
}
