//! Combinatorial model of iterated blowups over genus-two tropical boundary strata.

pub mod blowup;
pub mod diag;
pub mod error;
pub mod graph;
pub mod modular;
pub mod report;
pub mod vocab;

pub use error::{Error, Result};
