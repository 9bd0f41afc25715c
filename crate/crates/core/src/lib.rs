#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod isotonic;
pub mod matrix;
pub mod models;
pub mod observation;
pub mod oracle;
pub mod plot;

pub use error::{Error, Result};
