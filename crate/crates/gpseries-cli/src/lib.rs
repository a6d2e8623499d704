//! Equation language, command implementations and the example corpus
//! behind the `gpseries` command-line tool.

pub mod commands;
pub mod corpus;
pub mod dsl;
pub mod source;
