//! Formal solutions: Taylor recurrences, reduction along a known prefix,
//! lattice recurrences for generalized series, and conjugators.

mod conjugate;
mod lattice;
mod taylor;

use serde::Serialize;
use thiserror::Error;

use crate::equation_model::EquationError;
use crate::exponent_lattice::LatticeError;
use crate::gps_core::SeriesError;
use crate::scalar::CxJson;

pub use conjugate::{
    compose_taylor, invert_taylor, solve_boettcher, solve_schroeder, taylor_coeffs, taylor_series,
    transform_general_equation, CompositionMap, TransformedEquation,
};
pub use lattice::{
    exponent_support, extend_solution, prepare, reduce_equation, solution_prefix, ReducedEquation, UnknownSet,
};
pub use taylor::solve_taylor;

pub(crate) use lattice::compositions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("resonance at {exponent:?}: divisor vanishes while the right-hand side is {rhs:e}")]
    ResonanceBlocked { exponent: Vec<i64>, rhs: f64 },
    #[error("degenerate equation: {0}")]
    DegenerateEquation(String),
    #[error("prefix too short: {0}")]
    PrefixTooShort(String),
    #[error("prefix does not start a solution: {0}")]
    InconsistentPrefix(String),
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),
    #[error("root of unity of order {order}: the map is not linearizable")]
    NonLinearizable { order: usize },
    #[error("small divisor at k = {k}: |q^k - 1| = {value:e}")]
    SmallDivisorBreakdown { k: usize, value: f64 },
    #[error("conjugator unavailable: {0}")]
    ConjugatorUnavailable(String),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientStatus {
    Determined,
    Free,
    Injected,
}

/// One solved coefficient.
#[derive(Clone, Debug, Serialize)]
pub struct TranscriptEntry {
    pub coords: Vec<i64>,
    pub exponent: CxJson,
    /// The recurrence divisor; for coupled unknowns the elimination pivot.
    pub divisor: CxJson,
    pub coupled: bool,
    pub status: CoefficientStatus,
    pub value: CxJson,
}

/// Record of a solver run, in solving order.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveTranscript {
    pub entries: Vec<TranscriptEntry>,
    pub resonances: Vec<Vec<i64>>,
    pub free_parameters: Vec<Vec<i64>>,
    pub notes: Vec<String>,
}

impl SolveTranscript {
    pub fn entry(&self, coords: &[i64]) -> Option<&TranscriptEntry> {
        self.entries.iter().find(|e| e.coords == coords)
    }
}
