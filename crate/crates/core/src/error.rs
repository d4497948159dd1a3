use thiserror::Error;

/// Error type shared by the numerics layer and the engines.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments, bad configuration, malformed input data.
    #[error("validation: {0}")]
    Validation(String),

    /// Gaussian elimination hit a pivot below the singularity threshold.
    #[error("singular matrix: pivot {pivot:e} below 1e-14 at column {col}")]
    Singular { col: usize, pivot: f64 },

    /// Linear solve finished but the residual check failed; the system is
    /// too ill-conditioned for the stated accuracy contract.
    #[error("linear solve residual {residual:e} exceeds bound {bound:e}")]
    IllConditioned { residual: f64, bound: f64 },

    /// Root bracketing failed: no sign change over [a, b].
    #[error("no sign change over [{a}, {b}]: f(a)={fa:e}, f(b)={fb:e}")]
    NoBracket { a: f64, b: f64, fa: f64, fb: f64 },

    /// An iteration cap was hit before the convergence test passed.
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    /// Adaptive step control drove the step below the minimum; the problem
    /// is too stiff for this integrator at the requested tolerance.
    #[error("step size underflow at t={t}: required dt below {dt_min:e}")]
    StepUnderflow { t: f64, dt_min: f64 },

    /// A state component left the finite range mid-computation.
    #[error("numerical blowup at {where_}: {detail}")]
    Blowup { where_: String, detail: String },

    /// A fit or estimate was requested outside its regime of validity.
    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors that indicate a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::IllConditioned { .. }
                | Error::NoBracket { .. }
                | Error::NonConvergence { .. }
                | Error::StepUnderflow { .. }
                | Error::Blowup { .. }
                | Error::NotConverged(_)
        )
    }
}
