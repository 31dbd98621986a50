pub mod archive;
pub mod channel;
pub mod control;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod learning;
pub mod metrics;
pub mod mobility;
pub mod multilateration;
pub mod par;
pub mod protocol;
pub mod pseudotri;
pub mod ranging;
pub mod rng;

pub use error::{Error, Result};
