//! Error types shared across the library.

/// Errors produced by constructors, propagators, and inference routines.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Operands built over incompatible Hilbert-space dimension lists.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// A truncated Fock basis lost more weight than the contract allows.
    #[error("truncation too aggressive: {context} (deficit {deficit:.3e})")]
    Truncation { context: String, deficit: f64 },

    /// A matrix required to be Hermitian deviates beyond tolerance.
    #[error("matrix not Hermitian: max deviation {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    /// A density matrix trace deviates from one beyond tolerance.
    #[error("trace deviates from one by {deviation:.3e}")]
    TraceDeviation { deviation: f64 },

    /// A state has an eigenvalue below the negativity tolerance.
    #[error("state not positive semidefinite: eigenvalue {eigenvalue:.3e}")]
    Positivity { eigenvalue: f64 },

    /// A probability vector fails normalization or nonnegativity.
    #[error("invalid probability distribution: {context}")]
    Normalization { context: String },

    /// Adaptive integration could not proceed (step underflow / step budget).
    #[error("integration failed at t = {t:.6}: {context}")]
    Integration { t: f64, context: String },

    /// Bayesian update conditioned on an outcome of zero prior probability.
    #[error("outcome has zero probability under the prior")]
    DegenerateEvidence,

    /// Root finding was asked to bisect an unbracketed interval.
    #[error("root not bracketed on [{lo}, {hi}]")]
    RootBracket { lo: f64, hi: f64 },

    /// A mathematical invariant the type guarantees failed to hold.
    #[error("invariant violation: {context}")]
    InvariantViolation { context: String },
}

pub type Result<T> = std::result::Result<T, Error>;
