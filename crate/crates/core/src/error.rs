use thiserror::Error;

/// Everything that can go wrong across the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A numeric argument was NaN (or infinite where only finite values make sense).
    #[error("non-finite input to {context}: {value}")]
    NonFinite { context: &'static str, value: f64 },

    /// A probability argument fell outside [0, 1] by more than the clamp window.
    #[error("value {value} is not a probability")]
    InvalidProbability { value: f64 },

    /// Quantile asked at p = 0 or p = 1.
    #[error("quantile undefined at p = {p}")]
    QuantileDomain { p: f64 },

    /// A truncation interval collapsed, so the conditional distribution carries no mass.
    /// On a genuine selection event this indicates a mis-specified selection or a
    /// broken covariance, never a valid state.
    #[error("degenerate truncation interval [{lo}, {hi}]")]
    DegenerateTruncation { lo: f64, hi: f64 },

    /// Model construction failed; every violated invariant is listed.
    #[error("invalid model: {}", violations.join("; "))]
    InvalidModel { violations: Vec<String> },

    /// An exact tie at the selection boundary makes the top-k event ill-defined.
    #[error("tie at the top-{k} boundary (value {value})")]
    BoundaryTie { k: usize, value: f64 },

    /// k outside [1, n-1].
    #[error("k = {k} is not in [1, {}] for n = {n}", n - 1)]
    InvalidK { k: usize, n: usize },

    /// A pair statistic was requested with indices on the wrong side of the selection.
    #[error("pair ({i}, {j}) does not straddle the selection boundary")]
    WrongSide { i: usize, j: usize },

    /// Cholesky factorization failed even after the diagonal jitter retry.
    #[error("covariance is not positive semi-definite (pivot {pivot} at index {index})")]
    NotPsd { index: usize, pivot: f64 },

    /// A precomputed quantile was paired with a model it was not computed for.
    #[error("covariance checksum mismatch: quantile was computed for a different matrix")]
    SigmaMismatch,

    /// A precomputed quantile was paired with a different level.
    #[error("level mismatch: quantile was computed at alpha = {expected}, got {got}")]
    AlphaMismatch { expected: f64, got: f64 },

    /// Too few Monte Carlo draws landed on the conditioning event.
    #[error(
        "only {events} of {reps} draws hit the conditioning event (rate {rate:.2e}); need at least {needed}"
    )]
    InsufficientConditioning {
        events: usize,
        reps: usize,
        rate: f64,
        needed: usize,
    },

    /// A simulation configuration contradicts its estimand.
    #[error("invalid scenario: {reason}")]
    InvalidScenario { reason: String },

    /// Monte Carlo replication count below the supported minimum.
    #[error("reps = {reps} is below the minimum of {min}")]
    TooFewReps { reps: usize, min: usize },

    /// Multinomial ingestion: a category with zero observed count.
    #[error("count for category {index} is zero; the Gaussian approximation degenerates")]
    ZeroCount { index: usize },

    /// Multinomial ingestion: counts do not sum to the stated number of trials.
    #[error("counts sum to {sum} but trials = {t}")]
    CountMismatch { sum: u64, t: u64 },

    /// Sample covariance needs at least two rows.
    #[error("sample covariance needs at least 2 rows, got {m}")]
    TooFewRows { m: usize },

    /// Sample covariance over a constant column has a zero diagonal entry.
    #[error("column {col} is constant; its sample variance is zero")]
    ConstantColumn { col: usize },

    /// Correlation parameter outside the range the construction supports.
    #[error("rho = {rho} outside ({lo}, {hi})")]
    RhoOutOfRange { rho: f64, lo: f64, hi: f64 },

    /// Root-finding tolerance must be strictly positive and finite.
    #[error("tolerance {tol} is not a positive finite number")]
    InvalidTolerance { tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
