//! Generalized power series with complex exponents: arithmetic, formal
//! solutions of functional equations and convergence certificates.

pub mod convergence_analyzer;
pub mod equation_model;
pub mod exponent_lattice;
pub mod formal_solver;
pub mod gps_core;
pub mod scalar;

pub use scalar::{Cx, CxJson, DEFAULT_PREC};
