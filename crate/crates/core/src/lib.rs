//! Grant-free massive access through a reconfigurable intelligent surface:
//! channel simulator, joint activity detection and channel estimation by
//! approximate message passing, baselines, metrics and a Monte-Carlo harness.

pub mod amp;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
