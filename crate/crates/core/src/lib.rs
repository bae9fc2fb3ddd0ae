//! Joint cell association and communication/sensing power allocation for
//! base stations that serve cooperative UAVs while tracking another one.
//!
//! The crate models dual-function base stations serving cooperative UAVs and
//! localizing one non-cooperative UAV. Space is discretized by a seeded
//! Monte-Carlo point cloud drawn from the UAV density; cell association is a
//! semi-discrete optimal-transport partition of that cloud and power
//! allocation is solved through the Kantorovich dual of each station's
//! budget. [`aibot::run_aibot`] alternates the two; [`aibot::run_baseline`]
//! is the weighted-Voronoi plus water-filling benchmark.
//!
//! Module map:
//! - [`scenario`]: geometry, spatial density, sample clouds, configuration.
//! - [`channel`]: antenna responses, estimated channels, SNR and sum rate.
//! - [`sensing`]: composite gains, CRB proxies and localization QoS.
//! - [`instance`]: one time slot of a scenario (UAV draw, link table).
//! - [`objective`]: the weighted objective, constraints and projection.
//! - [`association`]: the cell-association iteration and Voronoi baseline.
//! - [`power`]: dual power allocation, water-filling and grid oracle.
//! - [`aibot`]: the alternating outer loop.
//! - [`harness`]: experiments, CSV/JSON persistence.

// `!(x > 0.0)` is used on purpose so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aibot;
pub mod association;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod instance;
pub mod numeric;
pub mod objective;
pub mod power;
pub mod scenario;
pub mod sensing;

pub use error::{Error, Result};
