use std::collections::BTreeMap;

use super::gallery::{assistant_filter, Gallery, RankedEntry};
use super::ReidError;
use crate::features::{cosine_similarity, FeatureVector};
use crate::types::{ObjectId, SensorId};
use crate::wire::{put_f64, put_u16, put_u32, Reader};

/// Top-k hits `z` and receipts `t` for one (assistant, object) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MatchEvidence {
    pub z: u32,
    pub t: u32,
}

/// Counts one receipt; counts a hit when `target_id` is within the first `k`
/// ranks. `k = 0` never counts a hit.
pub fn topk_update(ranked: &[RankedEntry], target_id: ObjectId, k: usize, ev: MatchEvidence) -> MatchEvidence {
    let hit = ranked.iter().take(k).any(|r| r.object_id == target_id);
    MatchEvidence {
        z: ev.z + hit as u32,
        t: ev.t + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HandoverScore {
    pub assistant: SensorId,
    pub object_id: ObjectId,
    pub phi: f64,
    pub cosine: f64,
}

/// Serialized size of a [`HandoverScore`].
pub const HANDOVER_SCORE_WIRE_LEN: usize = 2 + 4 + 8 + 8;

impl HandoverScore {
    pub fn write_wire(&self, out: &mut Vec<u8>) {
        put_u16(out, self.assistant.0);
        put_u32(out, self.object_id);
        put_f64(out, self.phi);
        put_f64(out, self.cosine);
    }

    pub fn read_wire(r: &mut Reader<'_>) -> Option<HandoverScore> {
        Some(HandoverScore {
            assistant: SensorId(r.u16()?),
            object_id: r.u32()?,
            phi: r.f64()?,
            cosine: r.f64()?,
        })
    }
}

/// `phi = z * t * cos(x, y)`.
pub fn weighted_score(
    assistant: SensorId,
    object_id: ObjectId,
    x: &FeatureVector,
    y: &FeatureVector,
    ev: MatchEvidence,
) -> Result<HandoverScore, ReidError> {
    let cosine = cosine_similarity(x, y)?;
    Ok(HandoverScore {
        assistant,
        object_id,
        phi: ev.z as f64 * ev.t as f64 * cosine,
        cosine,
    })
}

/// Assistant of the largest positive `phi`; ties go to the lowest sensor id.
pub fn decide_handover(scores: &[HandoverScore]) -> Option<SensorId> {
    scores
        .iter()
        .filter(|s| s.phi > 0.0)
        .fold(None::<&HandoverScore>, |best, s| match best {
            Some(b) if b.phi > s.phi || (b.phi == s.phi && b.assistant <= s.assistant) => Some(b),
            _ => Some(s),
        })
        .map(|s| s.assistant)
}

/// Baseline without back-matching: the assistant holding the single best
/// cosine at or above `threshold` wins. Ties go to the lowest sensor id.
pub fn one_way_decide(
    probe: &FeatureVector,
    galleries: &BTreeMap<SensorId, Gallery>,
    threshold: f64,
) -> Result<Option<SensorId>, ReidError> {
    let mut best: Option<(SensorId, f64)> = None;
    for (&sensor, g) in galleries {
        if g.is_empty() {
            continue;
        }
        if let Some(top) = assistant_filter(probe, g, threshold)?.first() {
            if best.is_none_or(|(_, c)| top.cosine > c) {
                best = Some((sensor, top.cosine));
            }
        }
    }
    Ok(best.map(|(s, _)| s))
}

/// Evidence for one handover episode, keyed by (assistant, object).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvidenceBook {
    evidence: BTreeMap<(SensorId, ObjectId), MatchEvidence>,
}

impl EvidenceBook {
    pub fn get(&self, assistant: SensorId, object_id: ObjectId) -> MatchEvidence {
        self.evidence.get(&(assistant, object_id)).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(SensorId, ObjectId), &MatchEvidence)> {
        self.evidence.iter()
    }

    pub fn clear(&mut self) {
        self.evidence.clear();
    }

    /// Backward match of one received candidate.
    ///
    /// Ranks `candidate` against the tracking sensor's `gallery`, updates the
    /// pair's counters and scores the candidate against `probe`.
    #[allow(clippy::too_many_arguments)]
    pub fn receive(
        &mut self,
        assistant: SensorId,
        object_id: ObjectId,
        candidate: &FeatureVector,
        probe: &FeatureVector,
        gallery: &Gallery,
        target_id: ObjectId,
        k: usize,
    ) -> Result<HandoverScore, ReidError> {
        let ranked = super::rank_gallery(candidate, gallery)?;
        let ev = self.get(assistant, object_id);
        let ev = topk_update(&ranked, target_id, k, ev);
        self.evidence.insert((assistant, object_id), ev);
        weighted_score(assistant, object_id, probe, candidate, ev)
    }
}

#[cfg(test)]
mod tests {
    use super::super::gallery::tests::{at_cosine, fv, CFG};
    use super::super::gallery_add;
    use super::*;
    use proptest::prelude::*;

    fn ranked(ids: &[u32]) -> Vec<RankedEntry> {
        ids.iter()
            .enumerate()
            .map(|(i, &id)| RankedEntry {
                object_id: id,
                cosine: 1.0 - i as f64 * 0.01,
            })
            .collect()
    }

    fn score(a: u16, phi: f64) -> HandoverScore {
        HandoverScore {
            assistant: SensorId(a),
            object_id: 1,
            phi,
            cosine: 0.5,
        }
    }

    #[test]
    fn topk_boundaries() {
        let ids: Vec<u32> = (1..=30).collect();
        let r = ranked(&ids);
        assert_eq!(
            topk_update(&r, 1, 20, MatchEvidence::default()),
            MatchEvidence { z: 1, t: 1 }
        );
        assert_eq!(
            topk_update(&r, 20, 20, MatchEvidence::default()),
            MatchEvidence { z: 1, t: 1 }
        );
        assert_eq!(
            topk_update(&r, 21, 20, MatchEvidence::default()),
            MatchEvidence { z: 0, t: 1 }
        );
    }

    #[test]
    fn topk_counting() {
        let mut ev = MatchEvidence::default();
        for i in 0..10u32 {
            // The target is at rank 1 seven times and at rank 25 three times.
            let order: Vec<u32> = if i % 3 == 2 && i < 9 {
                (100..124).chain([7]).collect()
            } else {
                std::iter::once(7).chain(100..124).collect()
            };
            ev = topk_update(&ranked(&order), 7, 20, ev);
        }
        assert_eq!(ev, MatchEvidence { z: 7, t: 10 });
    }

    #[test]
    fn weighted_score_arithmetic() {
        let x = fv(&[1.0, 0.0]);
        let s = weighted_score(SensorId(2), 4, &x, &at_cosine(0.9), MatchEvidence { z: 0, t: 9 }).unwrap();
        assert_eq!(s.phi, 0.0);
        let s = weighted_score(SensorId(2), 4, &x, &at_cosine(0.5), MatchEvidence { z: 3, t: 2 }).unwrap();
        assert!((s.phi - 3.0).abs() < 1e-12);
        let s = weighted_score(SensorId(2), 4, &x, &at_cosine(0.91), MatchEvidence { z: 5, t: 8 }).unwrap();
        assert!((s.phi - 36.4).abs() < 1e-12);
        assert!((s.phi - 5.0 * 8.0 * s.cosine).abs() < 1e-12);
    }

    #[test]
    fn weighted_score_config_mismatch() {
        let err = weighted_score(
            SensorId(2),
            4,
            &fv(&[1.0]),
            &FeatureVector::new(CFG + 1, vec![1.0]),
            MatchEvidence { z: 1, t: 1 },
        );
        assert!(err.is_err());
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide_handover(&[]), None);
        assert_eq!(decide_handover(&[score(1, 2.0), score(2, 3.5)]), Some(SensorId(2)));
        assert_eq!(decide_handover(&[score(2, 1.0), score(1, 1.0)]), Some(SensorId(1)));
        assert_eq!(decide_handover(&[score(1, 0.0), score(2, 0.0)]), None);
    }

    #[test]
    fn score_wire_layout() {
        let s = HandoverScore {
            assistant: SensorId(0x0102),
            object_id: 0x0304_0506,
            phi: 1.0,
            cosine: 0.5,
        };
        let mut buf = Vec::new();
        s.write_wire(&mut buf);
        assert_eq!(buf.len(), HANDOVER_SCORE_WIRE_LEN);
        assert_eq!(&buf[..6], &[1, 2, 3, 4, 5, 6]);
        assert_eq!(&buf[6..14], &1.0f64.to_be_bytes());
        assert_eq!(&buf[14..], &0.5f64.to_be_bytes());
        assert_eq!(HandoverScore::read_wire(&mut Reader::new(&buf)), Some(s));
    }

    fn gallery_with(owner: u16, items: &[(u32, f64)]) -> Gallery {
        let mut g = Gallery::new(SensorId(owner), CFG);
        for &(id, c) in items {
            gallery_add(&mut g, id, at_cosine(c), 0).unwrap();
        }
        g
    }

    #[test]
    fn one_way_examples() {
        let probe = fv(&[1.0, 0.0]);
        let mut gs = BTreeMap::new();
        gs.insert(SensorId(1), gallery_with(1, &[(1, 0.3)]));
        gs.insert(SensorId(2), gallery_with(2, &[(5, 1.0)]));
        assert_eq!(one_way_decide(&probe, &gs, 0.6).unwrap(), Some(SensorId(2)));

        let mut gs = BTreeMap::new();
        gs.insert(SensorId(1), gallery_with(1, &[(1, 0.3)]));
        gs.insert(SensorId(2), gallery_with(2, &[(5, 0.5)]));
        gs.insert(SensorId(3), Gallery::new(SensorId(3), CFG));
        assert_eq!(one_way_decide(&probe, &gs, 0.6).unwrap(), None);
    }

    /// A distractor closer to the probe than the true target fools the
    /// one-way baseline; the back-match against the tracking gallery, where
    /// the distractor's look-alikes outrank the tracked object, does not.
    #[test]
    fn two_way_beats_one_way_on_adversarial_gallery() {
        // Axis 0: target identity, axis 1: distractor identity, axis 2: lighting cast.
        let unit = |v: [f64; 3]| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            fv(&[v[0] / n, v[1] / n, v[2] / n])
        };
        let probe = unit([1.0, 0.0, 0.0]);
        let target_seen = unit([1.0, 0.0, 0.9]); // cos 0.74 with the probe
        let distractor = unit([1.0, 0.5, 0.0]); // cos 0.89 with the probe

        let (a, b) = (SensorId(1), SensorId(2));
        let mut gs = BTreeMap::new();
        let mut ga = Gallery::new(a, CFG);
        gallery_add(&mut ga, 10, target_seen.clone(), 0).unwrap();
        let mut gb = Gallery::new(b, CFG);
        gallery_add(&mut gb, 20, distractor.clone(), 0).unwrap();
        gs.insert(a, ga);
        gs.insert(b, gb);
        assert_eq!(one_way_decide(&probe, &gs, 0.6).unwrap(), Some(b));

        // Tracking gallery: the tracked object 1 plus 22 look-alikes of the distractor.
        let target_id = 1;
        let mut tg = Gallery::new(SensorId(3), CFG);
        gallery_add(&mut tg, target_id, probe.clone(), 0).unwrap();
        for i in 0..22u32 {
            gallery_add(&mut tg, 100 + i, unit([1.0, 0.55 + i as f64 * 0.01, 0.0]), 0).unwrap();
        }
        let mut book = EvidenceBook::default();
        let mut scores = Vec::new();
        for _ in 0..5 {
            scores.push(book.receive(a, 10, &target_seen, &probe, &tg, target_id, 20).unwrap());
            scores.push(book.receive(b, 20, &distractor, &probe, &tg, target_id, 20).unwrap());
        }
        assert_eq!(book.get(a, 10), MatchEvidence { z: 5, t: 5 });
        assert_eq!(book.get(b, 20), MatchEvidence { z: 0, t: 5 });
        assert_eq!(decide_handover(&scores), Some(a));
    }

    proptest! {
        #[test]
        fn z_never_exceeds_t(ops in prop::collection::vec((0usize..30, 1usize..25), 0..50)) {
            let ids: Vec<u32> = (0..30).collect();
            let r = ranked(&ids);
            let mut ev = MatchEvidence::default();
            for (target, k) in ops {
                ev = topk_update(&r, target as u32, k, ev);
                prop_assert!(ev.z <= ev.t);
            }
        }

        #[test]
        fn phi_monotone(z in 0u32..50, t in 0u32..50, c in 0.0f64..1.0) {
            let x = fv(&[1.0, 0.0]);
            let phi = |z, t, c| weighted_score(SensorId(1), 0, &x, &at_cosine(c), MatchEvidence { z, t }).unwrap().phi;
            let base = phi(z, t, c);
            prop_assert!(phi(z + 1, t, c) >= base);
            prop_assert!(phi(z, t + 1, c) >= base);
            prop_assert!(phi(z, t, (c + 0.05).min(1.0)) >= base - 1e-12);
        }

        #[test]
        fn decide_invariant_under_scaling(
            phis in prop::collection::vec((1u16..6, 0.0f64..10.0), 0..12),
            k in 0.01f64..100.0,
        ) {
            let scores: Vec<HandoverScore> = phis.iter().map(|&(a, p)| score(a, p)).collect();
            let scaled: Vec<HandoverScore> = phis.iter().map(|&(a, p)| score(a, p * k)).collect();
            prop_assert_eq!(decide_handover(&scores), decide_handover(&scaled));
        }
    }
}
