//! Deterministic multi-sensor simulation.
//!
//! A flat world of moving targets observed by sensors with rectangular
//! fields of view. One sensor starts as the tracker; the others assist when
//! asked. A coordinator actor collects two-way re-identification scores and
//! runs the handover. Geodesic positions exist only for heading math and
//! telemetry.

mod actors;
mod compare;
pub mod geo;
mod log;
mod pipeline;
mod render;
mod runner;
mod scenario;
mod suite;

pub use actors::{HandoverRecord, Phase};
pub use compare::{compare_reid, load_suite, ComparisonReport, ScenarioResult};
pub use geo::{bearing, heading_to, to_quad_angle, GeoPoint};
pub use log::{Event, EventKind, EventLog, CSV_HEADER};
pub use pipeline::{PipelineBench, PipelineStats};
pub use render::render_sensor_view;
pub use runner::{run_scenario, DecisionSnapshot, QuiescentState, RunOutcome};
pub use scenario::{
    demo_scenario, Appearance, HandoverConfig, LightingZone, LinkKind, LinkSpec, Role, Scenario, Segment, SensorSpec,
    TargetSpec,
};
pub use suite::{
    generate_scenario, generate_suite, SuiteKind, BUNDLED_ADVERSARIAL_COUNT, BUNDLED_CLEAN_COUNT, BUNDLED_SUITE_SEED,
};

pub use crate::protocol::TelemetryRecord;

use thiserror::Error;

use crate::detection::DetectionError;
use crate::protocol::ProtocolError;
use crate::reid::ReidError;
use crate::tracking::TrackingError;
use crate::types::SensorId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("scenario invalid: {0}")]
    ScenarioInvalid(String),
    #[error("scenario not readable: {0}")]
    ScenarioMissing(String),
    #[error("unknown sensor {0}")]
    UnknownSensor(SensorId),
    #[error("bearing between coincident points")]
    CoincidentPoints,
    #[error("deadlock at frame {frame}: {reason}")]
    Deadlock { frame: u64, reason: String },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Reid(#[from] ReidError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
}

impl From<DetectionError> for SimError {
    fn from(e: DetectionError) -> Self {
        match e {
            DetectionError::UnknownSensor(s) => SimError::UnknownSensor(s),
            other => SimError::ProtocolViolation(other.to_string()),
        }
    }
}
