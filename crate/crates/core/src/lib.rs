// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod baselines;
pub mod dual;
pub mod env;
pub mod error;
pub mod gridworld;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod sf;

pub use error::{Error, Result};
