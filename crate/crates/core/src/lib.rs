//! Analytics for server-room inlet-temperature setpoints.
//!
//! The crate is organised as a pipeline:
//!
//! * [`telemetry`] ingests per-sensor CSV files, cleans glitches, resamples
//!   to a uniform grid and aggregates sensors into room-level virtual sensors.
//! * [`changepoint`] finds sustained setpoint changes with two adjacent
//!   rolling windows.
//! * [`stats`] measures how power consumption responds to each change.
//! * [`physics`] models server fans, chillers, economizers and PUE.
//! * [`simulator`] produces synthetic telemetry through the physics model and
//!   exposes the analytic sensitivity used as a test oracle.
//! * [`optimizer`] searches for the inlet temperature that minimises total
//!   building power over a load and weather profile.

pub mod changepoint;
pub mod error;
pub mod optimizer;
pub mod physics;
pub mod simulator;
pub mod stats;
pub mod telemetry;
pub mod timefmt;

pub use error::{Error, Result};
