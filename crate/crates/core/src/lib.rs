//! Multitask representation learning for linear MDPs under a generative
//! model.
//!
//! The crate learns a shared low-rank linear representation from many source
//! tasks by backward least-squares value iteration ([`representation`]),
//! reuses it to solve a new task from few samples ([`transfer`]), and ships
//! the noisy grid-world testbed ([`gridworld`]), sampling designs and the
//! least-activated-feature criterion κ ([`sampling`]), exact dynamic
//! programming oracles ([`evaluation`]) and a reproducible experiment driver
//! ([`experiment`]).

pub mod error;
pub mod evaluation;
pub mod exec;
pub mod experiment;
pub mod gridworld;
pub mod linalg;
pub mod linear_mdp;
pub mod persist;
pub mod representation;
pub mod sampling;
pub mod seed;
pub mod transfer;

pub use error::{Error, Result};
pub use exec::Execution;
pub use linalg::Matrix;
