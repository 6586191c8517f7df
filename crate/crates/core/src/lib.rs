//! Multi-sensor target re-identification and handover.
//!
//! The crate is layered the same way the runtime is:
//!
//! - [`imaging`]: frames, the `MLF1` lossless frame codec, HSV / CIELab conversions.
//! - [`features`]: pyramid stripe colour histograms and cosine similarity.
//! - [`detection`]: detection-head box math and a scripted detector for simulation.
//! - [`tracking`]: centroid ID assignment and a correlation filter tracker.
//! - [`reid`]: galleries, one-way and two-way re-identification scoring.
//! - [`protocol`]: message vocabulary, length-prefixed framing, transports, Apdex.
//! - [`sim`]: geodesic heading, scenarios, rendering, actors and the deterministic runner.
//! - [`service`]: a request/response back-end used for latency benchmarking.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.
pub mod detection;
pub mod features;
pub mod imaging;
pub mod protocol;
pub mod reid;
pub mod rng;
pub mod service;
pub mod sim;
pub mod tracking;
pub mod types;
pub mod wire;

pub use detection::{BoundingBox, Detection};
pub use features::{FeatureConfig, FeatureVector};
pub use imaging::{ColorModel, Frame};
pub use protocol::{Message, Payload};
pub use types::{ObjectId, SensorId};
