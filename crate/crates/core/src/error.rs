//! Shared error type for model construction, decomposition, selection,
//! simulation, and piecewise solving.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector shapes are inconsistent with the declared dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix, vector, or parameter contains a NaN or infinity.
    #[error("non-finite entry: {0}")]
    NonFiniteEntry(String),

    /// A parameter value violates its documented domain.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Model structure is invalid beyond pure shape problems (e.g. duplicate
    /// variable names).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Underlying file I/O failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Input text could not be parsed; the message names the offending field.
    #[error("parse error: {0}")]
    Parse(String),

    /// A model file declares an unsupported schema version.
    #[error("schema version mismatch: found {found}, expected {expected}")]
    SchemaVersionMismatch { found: u64, expected: u64 },

    /// The pencil (A0, A1) is singular: some diagonal pair of the triangular
    /// factors vanishes jointly, so eigenvalues are not well defined.
    #[error("singular pencil: diagonal pair {index} is numerically (0, 0)")]
    SingularPencil { index: usize },

    /// The QZ iteration did not reach triangular form within its sweep budget.
    #[error("QZ iteration failed to converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    /// Both members of a diagonal pair are numerically zero: regularity
    /// violation at this position.
    #[error("degenerate eigenvalue pair at position {index}: alpha and beta both ~ 0")]
    DegeneratePair { index: usize },

    /// An adjacent eigenvalue swap failed its post-check: the reordered
    /// factors no longer reproduce the eigenvalue rays to tolerance.
    #[error("eigenvalue swap at position {index} is ill-conditioned (residual {residual:.3e})")]
    SwapIllConditioned { index: usize, residual: f64 },

    /// The stable-block state partition is numerically rank deficient.
    #[error("rank condition failed: cond(Z11) = {cond:.3e} exceeds {threshold:.1e}")]
    RankConditionFailed { cond: f64, threshold: f64 },

    /// An eigenvalue lies inside the unit-circle tolerance band, so the
    /// stable/unstable split is not well defined.
    #[error("eigenvalue with modulus {modulus} lies within {tol} of the unit circle")]
    UnitRootDetected { modulus: f64, tol: f64 },

    /// Splitting the stable block would separate a complex-conjugate pair,
    /// leaving a complex-valued policy function.
    #[error("stable-column selection splits a complex-conjugate eigenvalue pair")]
    ConjugatePairSplit,

    /// The square linear system defining the shock impact matrix is singular.
    #[error("shock impact construction failed: {0}")]
    ImpactConstructionFailed(String),

    /// A required variable role (e.g. inflation or policy rate) is missing.
    #[error("missing variable role: {0}")]
    MissingVariableRole(String),

    /// The state transition has spectral radius >= 1; no stationary moments.
    #[error("state transition is not stationary (spectral radius {radius})")]
    NotStationary { radius: f64 },

    /// Two path tables share no variables or no overlapping time span.
    #[error("paths have no overlap: {0}")]
    NoOverlap(String),

    /// A piecewise solve was asked for a path that does not end in the
    /// reference regime.
    #[error("terminal period is not slack: regime sequence must end in the reference regime")]
    TerminalNotSlack,

    /// A step of the backward piecewise recursion produced a singular system.
    #[error("singular recursion step at period {t}")]
    SingularRecursionStep { t: usize },

    /// The guess-and-verify iteration revisited an earlier regime sequence:
    /// a cycle of the given period, indicating multiple piecewise equilibria.
    #[error("regime iteration cycled with period {period}")]
    CycleDetected { period: usize },

    /// The guess-and-verify iteration hit its iteration budget.
    #[error("regime iteration did not converge within {max_iter} iterations")]
    MaxIterations { max_iter: usize },

    /// The constraint still binds too close to the end of the horizon for the
    /// terminal condition to be trusted.
    #[error("constraint binds within the last {window} periods of the horizon; extend the horizon")]
    BindingNearHorizonEnd { window: usize },
}
