//! Centroid ID assignment and a single-target correlation filter tracker.

mod assignment;
mod centroid;
mod dcf;
mod fft2d;

pub use assignment::{min_cost_assignment, AssignStrategy};
pub use centroid::{assign_ids, assign_ids_with, Track, TrackState};
pub use dcf::{
    dcf_init, gaussian_label, gaussian_sigma, hann_window, ChannelExtractor, DcfHyper, DcfModel, GrayIntensity,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackingError {
    #[error("box does not intersect the frame")]
    EmptyIntersection,
    #[error("target lost: peak response {response:.4} below threshold {threshold}")]
    TargetLost { response: f64, threshold: f64 },
    #[error("invalid tracker parameters: {0}")]
    InvalidHyper(String),
}
