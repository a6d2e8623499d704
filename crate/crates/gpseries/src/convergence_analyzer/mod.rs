//! Convergence analysis: majorant series, small-divisor weights,
//! arithmetic conditions on q and the certificates built from them.

mod arithmetic;
mod certify;
mod majorant;
mod roots;

use thiserror::Error;

use crate::equation_model::EquationError;
use crate::exponent_lattice::LatticeError;
use crate::formal_solver::SolverError;
use crate::gps_core::SeriesError;

pub use arithmetic::{
    bruno_check, diophantine_check, fast_growth_number, fit_gamma, siegel_check, ArithVerdict, ArithmeticReport,
    ConditionKind, Witness,
};
pub use certify::{
    certify, classify_case, growth_fit, CaseReport, CertifyConfig, ConvergenceCertificate, EvaluationEvidence,
    Evidence, GrowthFit, Position, Verdict,
};
pub use majorant::{
    delta_table, mahler_alpha, majorant, DeltaEntry, DeltaTable, MajorantRun, Variant, MAX_DELTA_DEPTH,
};
pub use roots::{alpha_bound, poly_roots, AlphaBound};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyzerError {
    #[error("L(lambda_N + rho) vanishes at rho = {re} + {im}i in the closed right half-plane")]
    RootInHalfPlane { re: f64, im: f64 },
    #[error("degenerate polynomial: {0}")]
    DegenerateL(String),
    #[error("alpha does not certify monotonicity: {0}")]
    AlphaUncertified(String),
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),
    #[error("rational input: the continued fraction ends after {terms} quotients")]
    RationalInput { terms: usize },
    #[error("missing data: {0}")]
    MissingData(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}
