//! Group secret-key generation over state-dependent broadcast channels.

pub mod erasure;
pub mod gauss;
pub mod det;
pub mod error;
pub mod gf;
pub mod kkt;
pub mod rng;
pub mod scenarios;
pub mod secure_coding;
pub mod state;

pub use error::{Error, Result};
