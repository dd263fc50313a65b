//! Simulation laboratory for the Hammersley-Aldous-Diaconis process with
//! sources and sinks.
//!
//! * [`randgen`]: label-derived random streams and Poisson point processes.
//! * [`had_engine`]: the event-driven particle system in a box.
//! * [`lpp_oracle`]: last-passage values used to cross-check the engine.
//! * [`shock_coupling`]: the second-class particle, the `N(t)` functional and
//!   the flux between coupled stationary processes.
//! * [`stats`]: mergeable moments and goodness-of-fit tests.
//! * [`experiments`]: named Monte Carlo studies with CSV and JSON output.

pub mod error;
pub mod experiments;
pub mod had_engine;
pub mod lpp_oracle;
pub mod randgen;
pub mod shock_coupling;
pub mod stats;

pub use error::{Error, Result};
