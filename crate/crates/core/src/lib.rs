pub mod analytic;
pub mod domain;
pub mod error;
pub mod fock;
pub mod harness;
pub mod model;
pub mod particle;
pub mod rates;
pub mod rng;
pub mod spde;
pub mod stats;

pub use error::{Error, Result};
