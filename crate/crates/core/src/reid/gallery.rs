use std::collections::{BTreeMap, BTreeSet};

use super::ReidError;
use crate::features::{cosine_similarity, FeatureVector};
use crate::types::{ObjectId, SensorId};

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub object_id: ObjectId,
    pub feature: FeatureVector,
    pub frame_index: u64,
}

/// Insertion-ordered feature store owned by one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    owner: SensorId,
    config_id: u16,
    entries: Vec<GalleryEntry>,
    keys: BTreeSet<(ObjectId, u64)>,
}

impl Gallery {
    pub fn new(owner: SensorId, config_id: u16) -> Self {
        Gallery {
            owner,
            config_id,
            entries: Vec::new(),
            keys: BTreeSet::new(),
        }
    }

    pub fn owner(&self) -> SensorId {
        self.owner
    }

    pub fn config_id(&self) -> u16 {
        self.config_id
    }

    pub fn entries(&self) -> &[GalleryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct object ids in order of first appearance.
    pub fn object_ids(&self) -> Vec<ObjectId> {
        let mut seen = BTreeSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.object_id))
            .map(|e| e.object_id)
            .collect()
    }

    fn check(&self, feature: &FeatureVector) -> Result<(), ReidError> {
        if feature.config_id() != self.config_id {
            return Err(ReidError::ConfigMismatch {
                gallery: self.config_id,
                feature: feature.config_id(),
            });
        }
        Ok(())
    }
}

/// Appends an entry. Returns `false` when `(object_id, frame_index)` is
/// already present; the gallery is then unchanged.
pub fn gallery_add(
    g: &mut Gallery,
    object_id: ObjectId,
    feature: FeatureVector,
    frame_index: u64,
) -> Result<bool, ReidError> {
    g.check(&feature)?;
    if !g.keys.insert((object_id, frame_index)) {
        return Ok(false);
    }
    g.entries.push(GalleryEntry {
        object_id,
        feature,
        frame_index,
    });
    Ok(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub object_id: ObjectId,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterHit {
    pub object_id: ObjectId,
    pub feature: FeatureVector,
    pub cosine: f64,
}

/// Best entry per object as `(entry index, cosine)`, sorted by descending
/// cosine; equal cosines keep gallery order.
fn best_per_object(probe: &FeatureVector, g: &Gallery) -> Result<Vec<(usize, f64)>, ReidError> {
    g.check(probe)?;
    let mut best: BTreeMap<ObjectId, (usize, f64)> = BTreeMap::new();
    for (i, e) in g.entries.iter().enumerate() {
        let c = cosine_similarity(probe, &e.feature)?;
        match best.get(&e.object_id) {
            Some(&(_, b)) if b >= c => {}
            _ => {
                best.insert(e.object_id, (i, c));
            }
        }
    }
    let mut out: Vec<(usize, f64)> = best.into_values().collect();
    out.sort_by_key(|&(i, _)| i);
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(out)
}

/// Objects whose best cosine with `probe` is at least `threshold`, best first.
///
/// Each object appears once with its best-matching entry, so the result is
/// always a prefix of [`rank_gallery`].
pub fn assistant_filter(probe: &FeatureVector, g: &Gallery, threshold: f64) -> Result<Vec<FilterHit>, ReidError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ReidError::InvalidThreshold(threshold));
    }
    Ok(best_per_object(probe, g)?
        .into_iter()
        .take_while(|&(_, c)| c >= threshold)
        .map(|(i, cosine)| FilterHit {
            object_id: g.entries[i].object_id,
            feature: g.entries[i].feature.clone(),
            cosine,
        })
        .collect())
}

/// Every object ranked by its best cosine with `probe`, descending.
pub fn rank_gallery(probe: &FeatureVector, g: &Gallery) -> Result<Vec<RankedEntry>, ReidError> {
    if g.is_empty() {
        return Err(ReidError::EmptyGallery);
    }
    Ok(best_per_object(probe, g)?
        .into_iter()
        .map(|(i, cosine)| RankedEntry {
            object_id: g.entries[i].object_id,
            cosine,
        })
        .collect())
}
