// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod noise;
pub mod oracle;
pub mod priors;
pub mod quadrature;
pub mod scenarios;

pub use error::{Error, Result};
