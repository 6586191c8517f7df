//! Pyramid stripe colour histograms.
//!
//! A crop is split into horizontal stripes at several pyramid levels
//! (3, 5 and 7 stripes by default). Every stripe contributes four
//! histograms: hue and saturation from HSV, a* and b* from CIELab. The
//! concatenation is passed through a signed power law and L2-normalised.

mod histogram;
mod vector;

pub use histogram::{split_stripes, stripe_bounds, stripe_histograms, StripeHistograms};
pub use vector::{cosine_similarity, FeatureVector};

use thiserror::Error;

use crate::imaging::{rgb_to_hsv, rgb_to_lab, Frame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("frame height {height} is smaller than stripe count {stripes}")]
    TooShort { height: u32, stripes: usize },
    #[error("feature is all zero")]
    DegenerateFeature,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("config mismatch: {0} vs {1}")]
    ConfigMismatch(u16, u16),
    #[error("zero vector")]
    ZeroVector,
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("malformed feature bytes")]
    Malformed,
}

/// Number of histogram channels per stripe (H, S, a*, b*).
pub const CHANNELS_PER_STRIPE: usize = 4;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureConfig {
    pub pyramid_stripes: Vec<usize>,
    pub bins_per_channel: usize,
    pub power_exponent: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            pyramid_stripes: vec![3, 5, 7],
            bins_per_channel: 16,
            power_exponent: 0.5,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.pyramid_stripes.is_empty() || self.pyramid_stripes.contains(&0) {
            return Err(FeatureError::InvalidConfig("stripe counts must be >= 1".into()));
        }
        if self.bins_per_channel < 2 {
            return Err(FeatureError::InvalidConfig("bins must be >= 2".into()));
        }
        if !(self.power_exponent > 0.0 && self.power_exponent <= 1.0) {
            return Err(FeatureError::InvalidConfig("power exponent must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.pyramid_stripes.iter().sum::<usize>() * CHANNELS_PER_STRIPE * self.bins_per_channel
    }

    pub fn max_stripes(&self) -> usize {
        self.pyramid_stripes.iter().copied().max().unwrap_or(1)
    }

    /// 16-bit fingerprint of the config (FNV-1a folded). Equal configs share an id.
    pub fn id(&self) -> u16 {
        let mut h: u32 = 0x811c_9dc5;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u32;
                h = h.wrapping_mul(0x0100_0193);
            }
        };
        for &s in &self.pyramid_stripes {
            feed(&(s as u64).to_be_bytes());
        }
        feed(&[0xff]);
        feed(&(self.bins_per_channel as u64).to_be_bytes());
        feed(&self.power_exponent.to_bits().to_be_bytes());
        ((h >> 16) ^ (h & 0xffff)) as u16
    }
}

/// Per-pixel bin indices for the four channels.
fn pixel_bins(rgb: [u8; 3], bins: usize) -> [usize; 4] {
    let hsv = rgb_to_hsv(rgb[0], rgb[1], rgb[2]);
    let lab = rgb_to_lab(rgb[0], rgb[1], rgb[2]);
    let bin = |v: f64, lo: f64, hi: f64| -> usize {
        let t = ((v - lo) / (hi - lo) * bins as f64).floor();
        (t.max(0.0) as usize).min(bins - 1)
    };
    [
        bin(hsv.h, 0.0, 360.0),
        bin(hsv.s, 0.0, 1.0),
        bin(lab.a, -128.0, 128.0),
        bin(lab.b, -128.0, 128.0),
    ]
}

/// Extracts the normalised descriptor of `frame`.
///
/// Pyramid levels re-stripe the same crop; no resampling happens between
/// levels. Layout is level-major, then stripe, then channel (H, S, a*, b*).
pub fn extract_feature(frame: &Frame, cfg: &FeatureConfig) -> Result<FeatureVector, FeatureError> {
    cfg.validate()?;
    let height = frame.height() as usize;
    let width = frame.width() as usize;
    if height < cfg.max_stripes() {
        return Err(FeatureError::TooShort {
            height: frame.height(),
            stripes: cfg.max_stripes(),
        });
    }
    let bins = cfg.bins_per_channel;
    let row_len = CHANNELS_PER_STRIPE * bins;

    // Cumulative per-row histograms so every stripe is a difference of two rows.
    let mut cumulative = vec![0u32; (height + 1) * row_len];
    let mut pixels = frame.rgb_pixels();
    for y in 0..height {
        let (done, rest) = cumulative.split_at_mut((y + 1) * row_len);
        let current = &mut rest[..row_len];
        current.copy_from_slice(&done[y * row_len..]);
        for _ in 0..width {
            let rgb = pixels.next().expect("pixel count matches dimensions");
            for (c, b) in pixel_bins(rgb, bins).into_iter().enumerate() {
                current[c * bins + b] += 1;
            }
        }
    }

    let mut values = Vec::with_capacity(cfg.dimension());
    for &n in &cfg.pyramid_stripes {
        for range in stripe_bounds(height, n) {
            let lo = &cumulative[range.start * row_len..(range.start + 1) * row_len];
            let hi = &cumulative[range.end * row_len..(range.end + 1) * row_len];
            values.extend(hi.iter().zip(lo).map(|(h, l)| (h - l) as f64));
        }
    }
    FeatureVector::from_histograms(values, cfg)
}
