// Negated comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod covsmooth;
pub mod curves;
pub mod error;
pub mod gaussproc;
pub mod linalg;
pub mod mean;
pub mod simulate;
pub mod warping;

pub use error::{Error, Result};
