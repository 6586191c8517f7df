use std::collections::BTreeMap;

use super::assignment::{min_cost_assignment, AssignStrategy};
use crate::detection::{BoundingBox, Detection};

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub centroid: (f64, f64),
    pub last_box: BoundingBox,
    /// Frames since the track was created.
    pub age: u32,
    /// Consecutive frames without a matching detection.
    pub missed: u32,
}

/// Live tracks keyed by id. Ids are handed out in increasing order and never reused.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackState {
    pub tracks: BTreeMap<u32, Track>,
    pub next_id: u32,
}

impl TrackState {
    pub fn new() -> Self {
        Self::default()
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Optimal-strategy [`assign_ids_with`].
pub fn assign_ids(
    state: TrackState,
    detections: &[Detection],
    max_dist: f64,
    max_missed: u32,
) -> (TrackState, Vec<(u32, Detection)>) {
    assign_ids_with(AssignStrategy::Optimal, state, detections, max_dist, max_missed)
}

/// Matches detections to tracks by centroid distance.
///
/// Pairs farther apart than `max_dist` are never matched. Unmatched
/// detections open new tracks in detection order; unmatched tracks age their
/// `missed` counter and are dropped once it exceeds `max_missed`. The output
/// lists `(track id, detection)` in detection order.
pub fn assign_ids_with(
    strategy: AssignStrategy,
    mut state: TrackState,
    detections: &[Detection],
    max_dist: f64,
    max_missed: u32,
) -> (TrackState, Vec<(u32, Detection)>) {
    assert!(max_dist > 0.0, "max_dist must be positive");
    let ids: Vec<u32> = state.tracks.keys().copied().collect();
    let n = ids.len();
    let m = detections.len();
    let dist: Vec<f64> = ids
        .iter()
        .flat_map(|id| {
            let c = state.tracks[id].centroid;
            detections.iter().map(move |d| distance(c, d.bbox.center()))
        })
        .collect();

    let mut det_to_track: Vec<Option<u32>> = vec![None; m];
    match strategy {
        AssignStrategy::Optimal => {
            // Every gated-out pair costs more than any complete set of feasible
            // pairs, so cardinality is maximised before total distance.
            let big = (n.min(m) as f64 + 1.0) * max_dist + 1.0;
            let cost: Vec<f64> = dist.iter().map(|&d| if d <= max_dist { d } else { big }).collect();
            for (r, c) in min_cost_assignment(&cost, n, m).into_iter().enumerate() {
                if let Some(c) = c {
                    if dist[r * m + c] <= max_dist {
                        det_to_track[c] = Some(ids[r]);
                    }
                }
            }
        }
        AssignStrategy::Greedy => {
            let mut pairs: Vec<(f64, usize, usize)> = (0..n)
                .flat_map(|r| (0..m).map(move |c| (r, c)))
                .map(|(r, c)| (dist[r * m + c], r, c))
                .filter(|p| p.0 <= max_dist)
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut track_used = vec![false; n];
            for (_, r, c) in pairs {
                if !track_used[r] && det_to_track[c].is_none() {
                    track_used[r] = true;
                    det_to_track[c] = Some(ids[r]);
                }
            }
        }
    }

    let matched: Vec<u32> = det_to_track.iter().flatten().copied().collect();
    for (id, track) in state.tracks.iter_mut() {
        track.age += 1;
        if !matched.contains(id) {
            track.missed += 1;
        }
    }
    state.tracks.retain(|_, t| t.missed <= max_missed);

    let mut out = Vec::with_capacity(m);
    for (det, slot) in detections.iter().zip(det_to_track) {
        let id = match slot {
            Some(id) => {
                let t = state.tracks.get_mut(&id).expect("matched track is live");
                t.centroid = det.bbox.center();
                t.last_box = det.bbox;
                t.missed = 0;
                id
            }
            None => {
                let id = state.next_id;
                state.next_id += 1;
                state.tracks.insert(
                    id,
                    Track {
                        centroid: det.bbox.center(),
                        last_box: det.bbox,
                        age: 0,
                        missed: 0,
                    },
                );
                id
            }
        };
        out.push((id, det.clone()));
    }
    (state, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(x: f64, y: f64) -> Detection {
        Detection::new(BoundingBox::new(x, y, 10.0, 20.0), 1.0, vec![1.0])
    }

    #[test]
    fn fresh_ids_in_detection_order() {
        let (state, out) = assign_ids(TrackState::new(), &[det(0.0, 0.0), det(50.0, 0.0)], 10.0, 2);
        assert_eq!(out.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(state.next_id, 2);
    }

    #[test]
    fn small_displacement_keeps_id() {
        let (state, _) = assign_ids(TrackState::new(), &[det(10.0, 10.0)], 10.0, 2);
        let (state, out) = assign_ids(state, &[det(13.0, 14.0)], 10.0, 2);
        assert_eq!(out[0].0, 0);
        assert_eq!(state.tracks[&0].centroid, (13.0, 14.0));
    }

    #[test]
    fn optimal_beats_greedy_on_crossed_instance() {
        // Tracks at x=0 and x=3, detections at x=2 and x=5.
        let (state, _) = assign_ids(TrackState::new(), &[det(0.0, 0.0), det(3.0, 0.0)], 10.0, 2);
        let dets = [det(2.0, 0.0), det(5.0, 0.0)];
        let (_, opt) = assign_ids(state.clone(), &dets, 10.0, 2);
        assert_eq!(opt.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1]);
        let (_, greedy) = assign_ids_with(AssignStrategy::Greedy, state, &dets, 10.0, 2);
        assert_eq!(greedy.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn gated_and_dropped_tracks() {
        let (state, _) = assign_ids(TrackState::new(), &[det(0.0, 0.0)], 5.0, 1);
        let (state, out) = assign_ids(state, &[det(100.0, 0.0)], 5.0, 1);
        assert_eq!(out[0].0, 1);
        assert_eq!(state.tracks[&0].missed, 1);
        let (state, _) = assign_ids(state, &[], 5.0, 1);
        assert!(!state.tracks.contains_key(&0));
        // A dropped id is never handed out again.
        let (_, out) = assign_ids(state, &[det(0.0, 0.0)], 5.0, 1);
        assert_eq!(out[0].0, 2);
    }

    proptest! {
        #[test]
        fn one_to_one_and_ids_increase(
            frames in prop::collection::vec(prop::collection::vec((0.0..100.0f64, 0.0..100.0f64), 0..6), 1..8),
            greedy in any::<bool>(),
        ) {
            let strategy = if greedy { AssignStrategy::Greedy } else { AssignStrategy::Optimal };
            let mut state = TrackState::new();
            let mut seen_ids = std::collections::BTreeSet::new();
            let mut dropped = std::collections::BTreeSet::new();
            for pts in frames {
                let dets: Vec<Detection> = pts.iter().map(|&(x, y)| det(x, y)).collect();
                let before: std::collections::BTreeSet<u32> = state.tracks.keys().copied().collect();
                let prev_next = state.next_id;
                let (next, out) = assign_ids_with(strategy, state, &dets, 20.0, 1);
                let ids: Vec<u32> = out.iter().map(|p| p.0).collect();
                let unique: std::collections::BTreeSet<u32> = ids.iter().copied().collect();
                prop_assert_eq!(unique.len(), ids.len());
                for id in &ids {
                    prop_assert!(!dropped.contains(id));
                    if !before.contains(id) {
                        prop_assert!(*id >= prev_next);
                    }
                }
                for id in before.difference(&next.tracks.keys().copied().collect()) {
                    dropped.insert(*id);
                }
                seen_ids.extend(ids);
                prop_assert!(next.tracks.values().all(|t| t.missed <= 1));
                state = next;
            }
        }
    }
}
