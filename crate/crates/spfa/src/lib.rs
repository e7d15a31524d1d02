//! Factor analysis with score-predictor extraction.
//!
//! The crate implements two least-squares extraction methods for
//! exploratory factor analysis: classical Minres, which minimizes the
//! off-diagonal residuals of `S - ΛΛ'`, and score predictor factor
//! analysis (SPFA), which minimizes the off-diagonal residuals of the
//! matrix reproduced from the factor score predictors,
//! `S - Λ(Λ'S⁻¹Λ)⁻¹Λ'`. On top of extraction it provides
//! gradient-projection rotation (Varimax, Parsimax, Infomax, Target),
//! five factor score predictors with validity diagnostics, and a Monte
//! Carlo harness for single-item-indicator identification studies.

pub mod error;
pub mod extraction;
pub mod fmt;
pub mod linalg;
pub mod rng;
pub mod rotation;
pub mod scores;
pub mod simulation;
pub mod table2;

pub use error::{Error, Result};
