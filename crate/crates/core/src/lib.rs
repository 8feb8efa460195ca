// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod fem;
pub mod matching;
pub mod mesh;
pub mod sparse;
pub mod spectral;
pub mod surgery;

pub use error::{Error, Result};
