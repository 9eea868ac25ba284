//! Exact arithmetic for truncated generalized power series and their
//! mixed-characteristic analogues.
//!
//! The crate is organised bottom-up:
//!
//! * [`gfield`] — a monotone tower of finite fields `F_{p^d}` with
//!   deterministic defining polynomials, compatible embeddings, Frobenius,
//!   and polynomial root extraction over the tower;
//! * [`galois`] — Galois rings `W_m(F_{p^d})` (truncated Witt vectors) with
//!   Teichmüller lifts, digit/Witt-coordinate decompositions and the
//!   Frobenius automorphism;
//! * [`hahn`] — truncated generalized power series (finite sorted term lists
//!   with rational exponents plus an absolute precision cutoff) over a
//!   pluggable coefficient ring;
//! * [`newton`] — Newton polygons, residual polynomials and the branching
//!   finite-budget Newton root solver over series fields;
//! * [`padic`] — canonical Teichmüller-digit series (the `t -> p`
//!   specialization), carry normalization, and the mixed-characteristic
//!   root solver;
//! * [`twistrec`] — twist-recurrences `d_0 c_n + d_1 c_{n+1}^σ + ... = 0`
//!   over Galois rings: semilinear Hensel solving, recurrences from solution
//!   sets, sum/product combination, Witt-component splitting, and support
//!   analysis (`S_{a,b}` membership, digit periodicity);
//! * [`format`] — the textual element formats and JSON encodings shared with
//!   the command line tool.

pub mod error;
pub mod exponent;
pub mod format;
pub mod gfield;
pub mod galois;
pub mod hahn;
pub mod newton;
pub mod padic;
pub mod twistrec;

pub use error::{Error, Result};
pub use exponent::Exp;
