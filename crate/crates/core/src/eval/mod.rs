//! Metrics and analytic verification oracles.

pub mod metrics;
pub mod oracles;
pub mod toys;
pub mod verify;
