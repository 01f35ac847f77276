// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod modes;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{Grid, Parity, ScalarModeField, WeightedNormSpec};
