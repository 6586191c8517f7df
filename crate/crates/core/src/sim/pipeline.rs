//! End-to-end single-sensor pipeline used for throughput measurement.

use std::time::{Duration, Instant};

use super::render::render_sensor_view;
use super::scenario::Scenario;
use super::SimError;
use crate::detection::scripted_detect;
use crate::features::extract_feature;
use crate::imaging::crop;
use crate::protocol::{FeatureMessage, FeaturePurpose, LoopbackLink, Message, Payload, SequenceCounter};
use crate::rng::mix;
use crate::tracking::{assign_ids, dcf_init, DcfHyper, DcfModel, TrackState};
use crate::types::SensorId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineStats {
    pub frames: u64,
    pub elapsed: Duration,
    /// Messages that completed the loopback roundtrip.
    pub messages: u64,
}

impl PipelineStats {
    pub fn fps(&self) -> f64 {
        self.frames as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

/// Render, detect, track (centroid ids plus correlation filter), extract the
/// target descriptor, and ship frame, detections and descriptor over a
/// loopback link to a decoding receiver, once per frame.
pub struct PipelineBench<'a> {
    scn: &'a Scenario,
    sensor: SensorId,
    link: LoopbackLink,
    seq: SequenceCounter,
    tracks: TrackState,
    dcf: Option<DcfModel>,
}

impl<'a> PipelineBench<'a> {
    pub fn new(scn: &'a Scenario) -> Self {
        PipelineBench {
            scn,
            sensor: scn.tracking_sensor().id,
            link: LoopbackLink::new(mix(scn.seed, &[0xBE])),
            seq: SequenceCounter::default(),
            tracks: TrackState::new(),
            dcf: None,
        }
    }

    /// Runs one frame; returns the number of messages received.
    pub fn step(&mut self, frame: u64) -> Result<usize, SimError> {
        let scn = self.scn;
        let img = render_sensor_view(scn, self.sensor, frame)?;
        let state = scn.state_at(frame);
        let dets = scripted_detect(&state, self.sensor, &scn.noise, mix(scn.seed, &[0xDE7, frame]))?;
        let h = &scn.handover;
        let (tracks, _) = assign_ids(std::mem::take(&mut self.tracks), &dets, h.max_match_dist, h.max_missed);
        self.tracks = tracks;

        let fov = scn.tracking_sensor().fov;
        let target = match self.dcf.as_mut() {
            None => {
                let b = scn.target(scn.tracked_target).expect("validated").bbox_at(frame);
                let b = crate::detection::BoundingBox::new(b.x - fov.x, b.y - fov.y, b.w, b.h);
                self.dcf = Some(dcf_init(&img, &b, DcfHyper::default())?);
                b
            }
            Some(dcf) => dcf.update(&img).unwrap_or_else(|_| dcf.bbox()),
        };
        let feature = crop(&img, &target)
            .ok()
            .and_then(|c| extract_feature(&c, &scn.features).ok());

        let mut outgoing = vec![Payload::Frame(img), Payload::Detections(dets)];
        if let Some(f) = feature {
            outgoing.push(Payload::Feature(FeatureMessage {
                purpose: FeaturePurpose::Probe,
                origin: self.sensor,
                object_id: 0,
                feature: f,
            }));
        }
        for p in outgoing {
            self.link
                .send(&Message::new(self.seq.next_sequence(), self.sensor, p))?;
        }
        Ok(self.link.deliver()?.len())
    }

    pub fn run(&mut self, frames: u64) -> Result<PipelineStats, SimError> {
        let start = Instant::now();
        let mut messages = 0;
        for f in 0..frames {
            messages += self.step(f % self.scn.duration)? as u64;
        }
        Ok(PipelineStats {
            frames,
            elapsed: start.elapsed(),
            messages,
        })
    }
}
