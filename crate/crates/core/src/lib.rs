//! Photon budgets for cavity-coupled color centers, cost minimization for
//! tree-encoded one-way quantum repeaters, and Gaussian-process surrogate
//! tooling (Bayesian optimization, Monte Carlo uncertainty propagation).

// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes_opt;
pub mod emitter;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod mc;
pub mod optim;
pub mod repeater;
pub mod resonance;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
