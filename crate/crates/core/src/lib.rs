// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bounded;
pub mod error;
pub mod experiments;
pub mod gating;
pub mod laplace;
pub mod pbs;
pub mod physio;
pub mod series;

pub use error::{Error, Result};
pub use series::TimeSeries;
