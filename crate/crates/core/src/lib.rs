//! Mean-field type games between a tagged crowd, whose dynamics run backward
//! from a prescribed terminal law, and an ordinary crowd moving forward.
//!
//! The solver works on Monte-Carlo path ensembles: forward Euler for the
//! ordinary crowd and adjoints, least-squares regression for conditional
//! expectations in the backward equations, and a damped Picard iteration for
//! the coupled optimality system.

pub mod brownian;
pub mod ensemble;
pub mod error;
pub mod game;
pub mod grid;
pub mod law;
pub mod lq;
pub mod lsmc;
pub mod paths;
pub mod reduce;
pub mod rng;
pub mod scenarios;
pub mod solve;

pub use error::{Error, Result};
