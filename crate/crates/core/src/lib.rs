//! Learning from demonstrations with an actor-critic trained on a combined
//! behavior-cloning and 1-step Q-learning loss, plus the lander environment,
//! baselines and experiment harness around it.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod baselines;
pub mod error;
pub mod expert;
pub mod harness;
pub mod lander;
pub mod nn;
pub mod policy;
pub mod replay;
pub mod training;

pub use error::{Error, Result};
