//! Sensor and coordinator actors.
//!
//! Actors own their state and talk only through [`Payload`]s routed by the
//! runner over loopback links. The topology is a star: sensors exchange
//! messages with the coordinator, which relays probes and candidates.
//!
//! Handover sequence run by the coordinator once the collection window ends:
//! `STOP_REID` to the tracker, then `START_TRACKING` to the chosen assistant,
//! then `COMMAND STOP_VISION` to everyone else. Each step waits for the
//! previous recipients' `ACK`s. With no positive score the episode is
//! aborted instead: `STOP_VISION` to the assistants, `START_TRACK` back to
//! the tracker.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::geo::{bearing, offset_metres};
use super::log::EventKind;
use super::render::render_sensor_view;
use super::scenario::{Scenario, SensorSpec};
use super::SimError;
use crate::detection::{scripted_detect, BoundingBox, ScenarioState};
use crate::features::{extract_feature, FeatureVector};
use crate::imaging::{crop, Frame};
use crate::protocol::{Command, CommandVerb, FeatureMessage, FeaturePurpose, Message, Payload, TelemetryRecord};
use crate::reid::{assistant_filter, decide_handover, gallery_add, EvidenceBook, Gallery, HandoverScore};
use crate::rng::mix;
use crate::tracking::{assign_ids, dcf_init, DcfHyper, DcfModel, TrackState, TrackingError};
use crate::types::{ObjectId, SensorId};

/// Sensor phases. A tracking sensor moves through `Idle`, `Tracking`,
/// `AwaitingAssist` and `HandingOver`; an assistant through `Idle` and
/// `Assisting`, and becomes a tracker on `START_TRACKING`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Idle,
    Tracking,
    AwaitingAssist,
    HandingOver,
    Assisting,
}

/// Side effects of one actor activation.
#[derive(Debug, Default)]
pub(crate) struct Outbox {
    pub msgs: Vec<(SensorId, Payload)>,
    pub events: Vec<EventKind>,
    /// Set when the coordinator closed the collection window this activation.
    pub decided: bool,
}

impl Outbox {
    fn send(&mut self, to: SensorId, payload: Payload) {
        self.msgs.push((to, payload));
    }
}

/// Read-only view of the world for the current frame.
pub(crate) struct World<'a> {
    pub scn: &'a Scenario,
    pub state: ScenarioState,
}

const TELEMETRY_PERIOD_US: u64 = 100_000;

fn frame_time_us(frame: u64, rate: u32) -> u64 {
    frame * 1_000_000 / rate as u64
}

#[derive(Debug)]
pub(crate) struct SensorActor {
    pub id: SensorId,
    spec: SensorSpec,
    pub phase: Phase,
    pub gallery: Gallery,
    centroid: TrackState,
    dcf: Option<DcfModel>,
    target_lost: bool,
    pub current_target: Option<ObjectId>,
    evidence: EvidenceBook,
    pub probe: Option<FeatureVector>,
    last_target_feature: Option<FeatureVector>,
    /// Operator-selected box (sensor pixels) used to lock on at the first frame.
    initial_box: Option<BoundingBox>,
    cooldown_until: u64,
    last_telemetry_us: Option<u64>,
    heading: f64,
    last_image: Option<Frame>,
    last_boxes: BTreeMap<ObjectId, BoundingBox>,
}

impl SensorActor {
    pub fn new(scn: &Scenario, spec: &SensorSpec) -> Self {
        let initial_box = (spec.role == super::scenario::Role::Tracking).then(|| {
            let b = scn.target(scn.tracked_target).expect("validated").bbox_at(0);
            BoundingBox::new(b.x - spec.fov.x, b.y - spec.fov.y, b.w, b.h)
        });
        SensorActor {
            id: spec.id,
            spec: spec.clone(),
            phase: Phase::Idle,
            gallery: Gallery::new(spec.id, scn.features.id()),
            centroid: TrackState::new(),
            dcf: None,
            target_lost: false,
            current_target: None,
            evidence: EvidenceBook::default(),
            probe: None,
            last_target_feature: None,
            initial_box,
            cooldown_until: 0,
            last_telemetry_us: None,
            heading: 0.0,
            last_image: None,
            last_boxes: BTreeMap::new(),
        }
    }

    fn set_phase(&mut self, to: Phase, out: &mut Outbox) {
        if self.phase != to {
            out.events.push(EventKind::Phase { from: self.phase, to });
            self.phase = to;
        }
    }

    fn violation(&self, msg: &Message) -> SimError {
        SimError::ProtocolViolation(format!(
            "{} in phase {:?} received {} from {}",
            self.id,
            self.phase,
            msg.kind(),
            msg.sender
        ))
    }

    fn telemetry(&mut self, frame: u64, world: &World<'_>, out: &mut Outbox) {
        let now = frame_time_us(frame, world.scn.frame_rate);
        if self.last_telemetry_us.is_some_and(|t| now - t < TELEMETRY_PERIOD_US) {
            return;
        }
        self.last_telemetry_us = Some(now);
        if let (Some(dcf), false) = (&self.dcf, self.target_lost) {
            let b = dcf.bbox();
            let mpp = world.scn.metres_per_pixel;
            let target = offset_metres(
                world.scn.geo_origin,
                (b.x + self.spec.fov.x) * mpp,
                (b.y + self.spec.fov.y) * mpp,
            );
            if let Ok(h) = bearing(self.spec.geo, target) {
                self.heading = h;
            }
        }
        let record = TelemetryRecord {
            sensor: self.id,
            position: self.spec.geo,
            altitude: self.spec.altitude,
            velocity: 0.0,
            heading: self.heading,
            motors_on: true,
            home: self.spec.geo,
            timestamp: now as f64 / 1e6,
        };
        out.send(SensorId::COORDINATOR, Payload::Telemetry(record));
    }

    fn feature_of(&self, img: &Frame, bbox: &BoundingBox, world: &World<'_>) -> Option<FeatureVector> {
        let c = crop(img, bbox).ok()?;
        extract_feature(&c, &world.scn.features).ok()
    }

    /// Render, detect and assign centroid ids. Returns the frame and
    /// `(track id, box)` pairs in detection order.
    fn perceive(
        &mut self,
        frame: u64,
        world: &World<'_>,
        out: &mut Outbox,
    ) -> Result<(Frame, Vec<(ObjectId, BoundingBox)>), SimError> {
        let scn = world.scn;
        let img = render_sensor_view(scn, self.id, frame)?;
        let dets = scripted_detect(
            &world.state,
            self.id,
            &scn.noise,
            mix(scn.seed, &[0xDE7, self.id.0 as u64, frame]),
        )?;
        out.events.push(EventKind::Detections { count: dets.len() });
        let h = &scn.handover;
        let (state, assigned) = assign_ids(
            std::mem::take(&mut self.centroid),
            &dets,
            h.max_match_dist,
            h.max_missed,
        );
        self.centroid = state;
        let boxes: Vec<(ObjectId, BoundingBox)> = assigned.into_iter().map(|(id, d)| (id, d.bbox)).collect();
        self.last_boxes = boxes.iter().copied().collect();
        Ok((img, boxes))
    }

    pub fn step(&mut self, frame: u64, world: &World<'_>, out: &mut Outbox) -> Result<(), SimError> {
        self.telemetry(frame, world, out);
        match self.phase {
            Phase::Idle if self.initial_box.is_some() && frame == 0 => self.track_step(frame, world, out),
            Phase::Tracking | Phase::AwaitingAssist => self.track_step(frame, world, out),
            Phase::Assisting => self.assist_step(frame, world, out),
            Phase::Idle | Phase::HandingOver => Ok(()),
        }
    }

    fn track_step(&mut self, frame: u64, world: &World<'_>, out: &mut Outbox) -> Result<(), SimError> {
        let (img, boxes) = self.perceive(frame, world, out)?;
        let (w, h) = (img.width() as f64, img.height() as f64);

        if let Some(init) = self.initial_box.take() {
            self.dcf = Some(dcf_init(&img, &init, DcfHyper::default())?);
            self.target_lost = false;
            self.set_phase(Phase::Tracking, out);
        } else if let (Some(dcf), false) = (self.dcf.as_mut(), self.target_lost) {
            match dcf.update(&img) {
                Ok(b) => {
                    let m = 1.0;
                    if b.x < m || b.y < m || b.x > w - m || b.y > h - m {
                        self.target_lost = true;
                    }
                }
                Err(TrackingError::TargetLost { .. }) => self.target_lost = true,
                Err(e) => return Err(e.into()),
            }
        }

        let tracked = match (&self.dcf, self.target_lost) {
            (Some(dcf), false) => Some(dcf.bbox()),
            _ => None,
        };
        if let Some(tb) = tracked {
            let keep = self
                .current_target
                .and_then(|id| boxes.iter().find(|(i, _)| *i == id))
                .filter(|(_, b)| b.iou(&tb) >= 0.3)
                .map(|(i, _)| *i);
            let best = boxes
                .iter()
                .map(|(i, b)| (*i, b.iou(&tb)))
                .filter(|(_, iou)| *iou >= 0.3)
                .fold(None::<(ObjectId, f64)>, |acc, c| match acc {
                    Some(a) if a.1 >= c.1 => Some(a),
                    _ => Some(c),
                })
                .map(|(i, _)| i);
            if let Some(id) = keep.or(best) {
                self.current_target = Some(id);
            }
            out.events.push(EventKind::Track {
                object_id: self.current_target.unwrap_or(u32::MAX),
                bbox: [tb.x, tb.y, tb.w, tb.h],
            });
        }

        if frame.is_multiple_of(world.scn.handover.gallery_stride) {
            for (id, b) in &boxes {
                if let Some(f) = self.feature_of(&img, b, world) {
                    if Some(*id) == self.current_target && tracked.is_some() {
                        self.last_target_feature = Some(f.clone());
                    }
                    gallery_add(&mut self.gallery, *id, f, frame)?;
                }
            }
        }
        if self.last_target_feature.is_none() {
            if let Some(tb) = tracked {
                self.last_target_feature = self.feature_of(&img, &tb, world);
            }
        }

        let margin = world.scn.handover.edge_margin;
        let near_edge = tracked.is_some_and(|b| b.x < margin || b.y < margin || b.x > w - margin || b.y > h - margin);
        if self.phase == Phase::Tracking && frame >= self.cooldown_until && (self.target_lost || near_edge) {
            if let (Some(f), Some(id)) = (self.last_target_feature.clone(), self.current_target) {
                self.probe = Some(f.clone());
                out.send(
                    SensorId::COORDINATOR,
                    Payload::Feature(FeatureMessage {
                        purpose: FeaturePurpose::Probe,
                        origin: self.id,
                        object_id: id,
                        feature: f,
                    }),
                );
                self.set_phase(Phase::AwaitingAssist, out);
            }
        }
        self.last_image = Some(img);
        Ok(())
    }

    fn assist_step(&mut self, frame: u64, world: &World<'_>, out: &mut Outbox) -> Result<(), SimError> {
        let (img, boxes) = self.perceive(frame, world, out)?;
        let probe = self.probe.clone().expect("assisting implies a probe");
        let mut fresh = Gallery::new(self.id, self.gallery.config_id());
        for (id, b) in &boxes {
            if let Some(f) = self.feature_of(&img, b, world) {
                gallery_add(&mut self.gallery, *id, f.clone(), frame)?;
                gallery_add(&mut fresh, *id, f, frame)?;
            }
        }
        for hit in assistant_filter(&probe, &fresh, world.scn.handover.threshold)? {
            out.send(
                SensorId::COORDINATOR,
                Payload::Feature(FeatureMessage {
                    purpose: FeaturePurpose::Candidate,
                    origin: self.id,
                    object_id: hit.object_id,
                    feature: hit.feature,
                }),
            );
        }
        self.last_image = Some(img);
        Ok(())
    }

    pub fn handle(&mut self, msg: &Message, frame: u64, world: &World<'_>, out: &mut Outbox) -> Result<(), SimError> {
        let ack = |out: &mut Outbox| out.send(SensorId::COORDINATOR, Payload::Ack);
        match (&msg.payload, self.phase) {
            (Payload::Feature(f), Phase::Idle) if f.purpose == FeaturePurpose::Probe => {
                self.probe = Some(f.feature.clone());
                self.gallery = Gallery::new(self.id, self.gallery.config_id());
                self.centroid = TrackState::new();
                self.set_phase(Phase::Assisting, out);
            }
            (Payload::Feature(f), Phase::AwaitingAssist) if f.purpose == FeaturePurpose::Candidate => {
                let (Some(probe), Some(target)) = (self.probe.as_ref(), self.current_target) else {
                    return Err(self.violation(msg));
                };
                let score = self.evidence.receive(
                    f.origin,
                    f.object_id,
                    &f.feature,
                    probe,
                    &self.gallery,
                    target,
                    world.scn.handover.top_k,
                )?;
                let ev = self.evidence.get(f.origin, f.object_id);
                out.events.push(EventKind::Score {
                    assistant: score.assistant,
                    object_id: score.object_id,
                    cosine: score.cosine,
                    phi: score.phi,
                    z: ev.z,
                    t: ev.t,
                });
                out.send(SensorId::COORDINATOR, Payload::Score(score));
            }
            // Candidates still in flight when the episode closes are dropped.
            (Payload::Feature(f), Phase::HandingOver | Phase::Tracking | Phase::Idle)
                if f.purpose == FeaturePurpose::Candidate => {}
            (Payload::StopReid, Phase::AwaitingAssist) => {
                self.evidence.clear();
                self.set_phase(Phase::HandingOver, out);
                ack(out);
            }
            (Payload::StartTracking { object_id }, Phase::Assisting) => {
                let b = self.last_boxes.get(object_id).copied();
                match (b, self.last_image.as_ref()) {
                    (Some(b), Some(img)) => {
                        self.dcf = Some(dcf_init(img, &b, DcfHyper::default())?);
                        self.target_lost = false;
                    }
                    _ => self.target_lost = true,
                }
                self.current_target = Some(*object_id);
                self.probe = None;
                self.cooldown_until = frame + world.scn.handover.cooldown_frames;
                self.set_phase(Phase::Tracking, out);
                ack(out);
            }
            (
                Payload::Command(Command {
                    verb: CommandVerb::StopVision,
                    ..
                }),
                Phase::HandingOver,
            ) => {
                self.dcf = None;
                self.current_target = None;
                self.probe = None;
                self.set_phase(Phase::Idle, out);
                ack(out);
            }
            (
                Payload::Command(Command {
                    verb: CommandVerb::StopVision,
                    ..
                }),
                Phase::Assisting | Phase::Idle,
            ) => {
                self.probe = None;
                self.set_phase(Phase::Idle, out);
                ack(out);
            }
            (
                Payload::Command(Command {
                    verb: CommandVerb::StartTrack,
                    ..
                }),
                Phase::AwaitingAssist,
            ) => {
                self.evidence.clear();
                self.cooldown_until = frame + world.scn.handover.cooldown_frames;
                self.set_phase(Phase::Tracking, out);
                ack(out);
            }
            _ => return Err(self.violation(msg)),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Collecting,
    AwaitStopReidAck,
    AwaitStartAck,
    AwaitStopVisionAcks,
    Aborting,
}

#[derive(Debug)]
struct Episode {
    id: u32,
    tracker: SensorId,
    deadline: u64,
    stage: Stage,
    stage_since: u64,
    scores: BTreeMap<(SensorId, ObjectId), HandoverScore>,
    chosen: Option<HandoverScore>,
    pending: BTreeSet<SensorId>,
}

/// Outcome of a completed handover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandoverRecord {
    pub episode: u32,
    pub from: SensorId,
    pub assistant: SensorId,
    pub object_id: ObjectId,
    pub phi: f64,
}

#[derive(Debug)]
pub(crate) struct Coordinator {
    sensors: Vec<SensorId>,
    pub tracker: SensorId,
    episode: Option<Episode>,
    episodes: u32,
    watchdog_frames: u64,
    pub handover: Option<HandoverRecord>,
}

impl Coordinator {
    pub fn new(scn: &Scenario) -> Self {
        let mut sensors: Vec<SensorId> = scn.sensors.iter().map(|s| s.id).collect();
        sensors.sort();
        Coordinator {
            sensors,
            tracker: scn.tracking_sensor().id,
            episode: None,
            episodes: 0,
            watchdog_frames: 10 * scn.frame_rate as u64,
            handover: None,
        }
    }

    pub fn episode_open(&self) -> bool {
        self.episode.is_some()
    }

    pub fn episodes(&self) -> u32 {
        self.episodes
    }

    fn assistants(&self, tracker: SensorId) -> impl Iterator<Item = SensorId> + '_ {
        self.sensors.iter().copied().filter(move |&s| s != tracker)
    }

    fn stop_vision() -> Payload {
        Payload::Command(Command {
            verb: CommandVerb::StopVision,
            target: None,
        })
    }

    pub fn step(&mut self, frame: u64, out: &mut Outbox) -> Result<(), SimError> {
        let Some(ep) = self.episode.as_mut() else {
            return Ok(());
        };
        if ep.stage != Stage::Collecting {
            if frame > ep.stage_since + self.watchdog_frames {
                return Err(SimError::Deadlock {
                    frame,
                    reason: format!("episode {} stuck waiting for {:?}", ep.id, ep.pending),
                });
            }
            return Ok(());
        }
        if frame < ep.deadline {
            return Ok(());
        }
        out.decided = true;
        ep.stage_since = frame;
        let scores: Vec<HandoverScore> = ep.scores.values().copied().collect();
        match decide_handover(&scores) {
            Some(a) => {
                // Best object of the winning assistant; ties to the lowest id.
                let best = scores
                    .iter()
                    .filter(|s| s.assistant == a)
                    .fold(None::<HandoverScore>, |acc, s| match acc {
                        Some(b) if b.phi >= s.phi => Some(b),
                        _ => Some(*s),
                    })
                    .expect("winner has a score");
                ep.chosen = Some(best);
                ep.stage = Stage::AwaitStopReidAck;
                ep.pending = BTreeSet::from([ep.tracker]);
                out.send(ep.tracker, Payload::StopReid);
            }
            None => {
                let tracker = ep.tracker;
                let assistants: Vec<SensorId> = self.assistants(tracker).collect();
                let ep = self.episode.as_mut().expect("open");
                ep.stage = Stage::Aborting;
                ep.pending = assistants.iter().copied().chain([tracker]).collect();
                for a in assistants {
                    out.send(a, Self::stop_vision());
                }
                out.send(
                    tracker,
                    Payload::Command(Command {
                        verb: CommandVerb::StartTrack,
                        target: None,
                    }),
                );
            }
        }
        Ok(())
    }

    pub fn handle(&mut self, msg: &Message, frame: u64, window: u64, out: &mut Outbox) -> Result<(), SimError> {
        let from = msg.sender;
        let violation =
            || SimError::ProtocolViolation(format!("core received {} from {from} unexpectedly", msg.kind()));
        match &msg.payload {
            Payload::Telemetry(record) => out.events.push(EventKind::Telemetry { record: *record }),
            Payload::Feature(f) if f.purpose == FeaturePurpose::Probe => {
                if from != self.tracker || self.episode.is_some() || self.handover.is_some() {
                    return Err(violation());
                }
                self.episodes += 1;
                self.episode = Some(Episode {
                    id: self.episodes,
                    tracker: from,
                    deadline: frame + window,
                    stage: Stage::Collecting,
                    stage_since: frame,
                    scores: BTreeMap::new(),
                    chosen: None,
                    pending: BTreeSet::new(),
                });
                out.events.push(EventKind::EpisodeStart {
                    episode: self.episodes,
                    tracker: from,
                });
                for a in self.assistants(from).collect::<Vec<_>>() {
                    out.send(a, msg.payload.clone());
                }
            }
            Payload::Feature(_) => {
                if let Some(ep) = self.episode.as_ref().filter(|e| e.stage == Stage::Collecting) {
                    out.send(ep.tracker, msg.payload.clone());
                }
            }
            Payload::Score(s) => {
                if let Some(ep) = self.episode.as_mut().filter(|e| e.stage == Stage::Collecting) {
                    ep.scores.insert((s.assistant, s.object_id), *s);
                }
            }
            Payload::Ack => {
                let Some(ep) = self.episode.as_mut() else {
                    return Err(violation());
                };
                if !ep.pending.remove(&from) {
                    return Err(violation());
                }
                if ep.pending.is_empty() {
                    self.advance(frame, out);
                }
            }
            _ => return Err(violation()),
        }
        Ok(())
    }

    fn advance(&mut self, frame: u64, out: &mut Outbox) {
        let ep = self.episode.as_mut().expect("open episode");
        ep.stage_since = frame;
        match ep.stage {
            Stage::AwaitStopReidAck => {
                let chosen = ep.chosen.expect("chosen before stop");
                ep.stage = Stage::AwaitStartAck;
                ep.pending = BTreeSet::from([chosen.assistant]);
                out.send(
                    chosen.assistant,
                    Payload::StartTracking {
                        object_id: chosen.object_id,
                    },
                );
            }
            Stage::AwaitStartAck => {
                let chosen = ep.chosen.expect("chosen");
                let tracker = ep.tracker;
                let rest: Vec<SensorId> = self
                    .sensors
                    .iter()
                    .copied()
                    .filter(|&s| s != chosen.assistant)
                    .collect();
                let ep = self.episode.as_mut().expect("open");
                ep.stage = Stage::AwaitStopVisionAcks;
                ep.pending = rest.iter().copied().collect();
                for s in rest {
                    out.send(s, Self::stop_vision());
                }
                debug_assert!(ep.pending.contains(&tracker));
            }
            Stage::AwaitStopVisionAcks => {
                let chosen = ep.chosen.expect("chosen");
                let record = HandoverRecord {
                    episode: ep.id,
                    from: ep.tracker,
                    assistant: chosen.assistant,
                    object_id: chosen.object_id,
                    phi: chosen.phi,
                };
                self.tracker = chosen.assistant;
                self.handover = Some(record);
                self.episode = None;
                out.events.push(EventKind::Handover {
                    episode: record.episode,
                    assistant: record.assistant,
                    object_id: record.object_id,
                    phi: record.phi,
                });
            }
            Stage::Aborting => {
                out.events.push(EventKind::EpisodeAbort { episode: ep.id });
                self.episode = None;
            }
            Stage::Collecting => unreachable!("acks are only awaited after collection"),
        }
    }
}
