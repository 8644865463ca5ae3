use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no admissible solution: {0}")]
    NoSolution(String),

    #[error("under-resolved field: spectral tail {tail:.3e} exceeds {limit:.1e}")]
    Resolution { tail: f64, limit: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("eigensolver failed to converge for eigenvalue {index} after {iterations} iterations")]
    EigenNoConvergence { index: usize, iterations: usize },

    #[error("blow-up at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        last_finite: Box<crate::evolution::SBState>,
    },

    #[error("Jacobian numerically singular (pivot ratio {pivot_ratio:.3e}) at omega = {omega}")]
    Degenerate { omega: f64, pivot_ratio: f64 },

    #[error("Newton iteration diverged at omega = {omega}; residual history {history:?}")]
    Divergence { omega: f64, history: Vec<f64> },

    #[error("lattice truncation: {0}")]
    Truncation(String),

    #[error("conservation check failed: {0}")]
    Conservation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NoSolution(_) => "no_solution",
            Error::Resolution { .. } => "resolution",
            Error::Usage(_) => "usage",
            Error::EigenNoConvergence { .. } => "eigen_no_convergence",
            Error::BlowUp { .. } => "blow_up",
            Error::Degenerate { .. } => "degenerate",
            Error::Divergence { .. } => "divergence",
            Error::Truncation(_) => "truncation",
            Error::Conservation(_) => "conservation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Numeric failures (blow-up, non-convergence, degeneracy) as opposed to
    /// invalid input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::EigenNoConvergence { .. }
                | Error::BlowUp { .. }
                | Error::Degenerate { .. }
                | Error::Divergence { .. }
                | Error::Conservation(_)
                | Error::Resolution { .. }
                | Error::Truncation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
