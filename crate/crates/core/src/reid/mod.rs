//! Galleries and two-way re-identification scoring.
//!
//! Forward pass: an assistant compares the received probe against its own
//! gallery and forwards candidates scoring at least the threshold. Backward
//! pass: the tracking sensor ranks each candidate against its own gallery,
//! counts how often the tracked object lands in the top `k` (`z`) and how
//! often the candidate was received (`t`), and reports `phi = z * t * cos`.

mod gallery;
mod score;

pub use gallery::{assistant_filter, gallery_add, rank_gallery, FilterHit, Gallery, GalleryEntry, RankedEntry};
pub use score::{
    decide_handover, one_way_decide, topk_update, weighted_score, EvidenceBook, HandoverScore, MatchEvidence,
    HANDOVER_SCORE_WIRE_LEN,
};

use thiserror::Error;

use crate::features::FeatureError;

/// Candidates below this cosine are not forwarded.
pub const DEFAULT_THRESHOLD: f64 = 0.60;
/// Rank cut-off for the top-k evidence counter.
pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReidError {
    #[error("feature config mismatch: gallery {gallery}, feature {feature}")]
    ConfigMismatch { gallery: u16, feature: u16 },
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}
