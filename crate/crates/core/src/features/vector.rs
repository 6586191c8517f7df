use super::{FeatureConfig, FeatureError};
use crate::wire::{put_f64, put_u16, put_u32, Reader};

/// Appearance descriptor tagged with the id of the config that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    config_id: u16,
    values: Vec<f64>,
}

impl FeatureVector {
    /// Wraps raw values without normalising them.
    pub fn new(config_id: u16, values: Vec<f64>) -> Self {
        FeatureVector { config_id, values }
    }

    /// Applies `v -> sign(v) |v|^alpha` and divides by the L2 norm.
    pub fn from_histograms(mut values: Vec<f64>, cfg: &FeatureConfig) -> Result<Self, FeatureError> {
        let alpha = cfg.power_exponent;
        for v in values.iter_mut() {
            *v = v.signum() * v.abs().powf(alpha);
        }
        let norm = l2_norm(&values);
        if norm == 0.0 {
            return Err(FeatureError::DegenerateFeature);
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(FeatureVector {
            config_id: cfg.id(),
            values,
        })
    }

    pub fn config_id(&self) -> u16 {
        self.config_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    /// `config_id` (u16), dimension (u32), then values as big-endian f64.
    pub fn write_wire(&self, out: &mut Vec<u8>) {
        out.reserve(6 + 8 * self.values.len());
        put_u16(out, self.config_id);
        put_u32(out, self.values.len() as u32);
        for &v in &self.values {
            put_f64(out, v);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_wire(&mut out);
        out
    }

    pub fn read_wire(r: &mut Reader<'_>) -> Option<FeatureVector> {
        let config_id = r.u16()?;
        let dim = r.u32()? as usize;
        if r.remaining() < dim.checked_mul(8)? {
            return None;
        }
        let values = (0..dim).map(|_| r.f64()).collect::<Option<Vec<_>>>()?;
        Some(FeatureVector { config_id, values })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FeatureError> {
        let mut r = Reader::new(bytes);
        let f = Self::read_wire(&mut r).ok_or(FeatureError::Malformed)?;
        if r.remaining() != 0 {
            return Err(FeatureError::Malformed);
        }
        Ok(f)
    }
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `x.y / (|x| |y|)`.
pub fn cosine_similarity(x: &FeatureVector, y: &FeatureVector) -> Result<f64, FeatureError> {
    if x.config_id != y.config_id {
        return Err(FeatureError::ConfigMismatch(x.config_id, y.config_id));
    }
    if x.dim() != y.dim() {
        return Err(FeatureError::DimensionMismatch(x.dim(), y.dim()));
    }
    let nx = x.norm();
    let ny = y.norm();
    if nx == 0.0 || ny == 0.0 {
        return Err(FeatureError::ZeroVector);
    }
    let dot: f64 = x.values.iter().zip(&y.values).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}
