//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the arithmetic and solver layers.
///
/// Precision exhaustion is deliberately *not* an error: solvers report it
/// through explicit `exhausted` flags on their results. `PrecisionTooLow`
/// is reserved for inputs that do not carry enough precision to start a
/// computation at all.
#[derive(Debug, Error)]
pub enum Error {
    /// Division by zero in a field or ring operation.
    #[error("division by zero")]
    DivisionByZero,

    /// Inversion of a non-unit in a local ring.
    #[error("element is not a unit")]
    NotAUnit,

    /// Operands belong to incompatible coefficient rings.
    #[error("coefficient ring mismatch: {0}")]
    RingMismatch(String),

    /// Input data is malformed or violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Input precision is insufficient for the requested computation.
    #[error("precision too low: {0}")]
    PrecisionTooLow(String),

    /// A Newton polygon could not be formed (fewer than two finite points).
    #[error("degenerate Newton polygon: {0}")]
    DegeneratePolygon(String),

    /// Solution set handed to a recurrence builder is linearly dependent
    /// modulo p.
    #[error("solutions are linearly dependent modulo p")]
    DependentSolutions,

    /// The requested operation does not apply to this input (for example a
    /// twist-recurrence whose lowest coefficient is not a unit).
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// Parse failure for one of the textual element formats.
    #[error("parse error: {0}")]
    Parse(String),

    /// An internal consistency check failed; indicates a bug, not bad input.
    #[error("internal check failed: {0}")]
    Internal(String),
}
