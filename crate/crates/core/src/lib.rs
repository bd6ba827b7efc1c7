//! Optimal constant-envelope, phase-quantized precoding for the multiuser
//! MIMO downlink with PSK data, plus baselines and a Monte Carlo harness.

pub mod alphabet;
pub mod error;
pub mod geometry;
pub mod lpsolve;
pub mod model;
pub mod precoders;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
