//! Adaptive attacks that break linear sketches for the l0 gap-norm problem,
//! over the integers (fingerprinting scores), over prime fields (column
//! independence testing), and over the reals (leverage scores), together with
//! the hard query-distribution family, sketch pre-processing analysis, victim
//! sketches to attack, and a seeded experiment harness.

pub mod attack;
pub mod error;
pub mod family;
pub mod harness;
pub mod linalg;
pub mod preprocess;
pub mod victim;

pub use error::{Error, Result};
