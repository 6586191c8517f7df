//! Deterministic round-robin scheduler.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::actors::{Coordinator, HandoverRecord, Outbox, Phase, SensorActor, World};
use super::log::{EventKind, EventLog};
use super::scenario::Scenario;
use super::SimError;
use crate::features::FeatureVector;
use crate::protocol::{LoopbackLink, Message, SequenceCounter, SequenceTracker, HEADER_LEN};
use crate::reid::Gallery;
use crate::rng::mix;
use crate::types::SensorId;

/// Upper bound on delivery rounds inside one frame; more means messages
/// are bouncing without converging.
const MAX_ROUNDS_PER_FRAME: usize = 10_000;

/// Phases observed after a frame's deliveries settled with no episode open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuiescentState {
    pub frame: u64,
    pub tracking: Vec<SensorId>,
}

/// What the coordinator had to work with when it closed a collection window:
/// the tracker's probe and every assistant's gallery.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSnapshot {
    pub frame: u64,
    pub probe: FeatureVector,
    pub galleries: BTreeMap<SensorId, Gallery>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: EventLog,
    pub frames_run: u64,
    pub final_phases: BTreeMap<SensorId, Phase>,
    pub handover: Option<HandoverRecord>,
    pub episodes: u32,
    pub quiescent: Vec<QuiescentState>,
    /// Snapshot at the most recent decision, if any window closed.
    pub decision: Option<DecisionSnapshot>,
}

struct Link {
    pipe: LoopbackLink,
    seq: SequenceCounter,
    check: SequenceTracker,
    latency_base_s: f64,
    bandwidth_bps: f64,
}

struct Runner<'a> {
    scn: &'a Scenario,
    coordinator: Coordinator,
    sensors: BTreeMap<SensorId, SensorActor>,
    links: BTreeMap<(SensorId, SensorId), Link>,
    log: EventLog,
}

impl<'a> Runner<'a> {
    fn new(scn: &'a Scenario) -> Self {
        let mut sensors = BTreeMap::new();
        let mut links = BTreeMap::new();
        for spec in &scn.sensors {
            sensors.insert(spec.id, SensorActor::new(scn, spec));
            let kind = scn.link_kind(spec.id, SensorId::COORDINATOR);
            for (from, to) in [(spec.id, SensorId::COORDINATOR), (SensorId::COORDINATOR, spec.id)] {
                links.insert(
                    (from, to),
                    Link {
                        pipe: LoopbackLink::new(mix(scn.seed, &[0x11, from.0 as u64, to.0 as u64])),
                        seq: SequenceCounter::default(),
                        check: SequenceTracker::default(),
                        latency_base_s: kind.base_latency_s(),
                        bandwidth_bps: kind.bandwidth_bps(),
                    },
                );
            }
        }
        Runner {
            scn,
            coordinator: Coordinator::new(scn),
            sensors,
            links,
            log: EventLog::default(),
        }
    }

    fn flush(&mut self, frame: u64, actor: SensorId, out: Outbox) -> Result<(), SimError> {
        for ev in out.events {
            self.log.push(frame, actor, ev);
        }
        for (to, payload) in out.msgs {
            let link = self
                .links
                .get_mut(&(actor, to))
                .ok_or_else(|| SimError::ProtocolViolation(format!("no link {actor} -> {to}")))?;
            let msg = Message::new(link.seq.next_sequence(), actor, payload);
            link.pipe.send(&msg)?;
        }
        Ok(())
    }

    fn snapshot(&self, frame: u64) -> Option<DecisionSnapshot> {
        let tracker = self.sensors.get(&self.coordinator.tracker)?;
        let probe = tracker.probe.clone()?;
        let galleries = self
            .sensors
            .iter()
            .filter(|(id, _)| **id != tracker.id)
            .map(|(id, s)| (*id, s.gallery.clone()))
            .collect();
        Some(DecisionSnapshot {
            frame,
            probe,
            galleries,
        })
    }

    /// Moves bytes over every link until all are idle.
    fn deliver_all(&mut self, frame: u64, world: &World<'_>) -> Result<(), SimError> {
        for _ in 0..MAX_ROUNDS_PER_FRAME {
            let busy: Vec<(SensorId, SensorId)> = self
                .links
                .iter()
                .filter(|(_, l)| !l.pipe.is_idle())
                .map(|(k, _)| *k)
                .collect();
            if busy.is_empty() {
                return Ok(());
            }
            for key @ (from, to) in busy {
                let link = self.links.get_mut(&key).expect("listed");
                let msgs = link.pipe.deliver()?;
                for msg in &msgs {
                    link.check.observe(msg)?;
                }
                let (base, bw) = (link.latency_base_s, link.bandwidth_bps);
                for msg in msgs {
                    let bytes = 4 + HEADER_LEN + msg.payload.encoded_len();
                    self.log.push(
                        frame,
                        to,
                        EventKind::Message {
                            from,
                            to,
                            kind: msg.kind(),
                            sequence: msg.sequence,
                            bytes,
                            latency_s: base + bytes as f64 * 8.0 / bw,
                        },
                    );
                    let mut out = Outbox::default();
                    if to.is_coordinator() {
                        self.coordinator
                            .handle(&msg, frame, self.scn.handover.window_frames, &mut out)?;
                    } else {
                        self.sensors
                            .get_mut(&to)
                            .expect("link endpoints exist")
                            .handle(&msg, frame, world, &mut out)?;
                    }
                    self.flush(frame, to, out)?;
                    // The run ends here; anything still in flight is dropped.
                    if self.coordinator.handover.is_some() {
                        return Ok(());
                    }
                }
            }
        }
        Err(SimError::Deadlock {
            frame,
            reason: format!("messages still in flight after {MAX_ROUNDS_PER_FRAME} delivery rounds"),
        })
    }

    fn run(mut self) -> Result<RunOutcome, SimError> {
        let mut quiescent = Vec::new();
        let mut decision = None;
        let mut frames_run = 0;
        for frame in 0..self.scn.duration {
            frames_run = frame + 1;
            let world = World {
                scn: self.scn,
                state: self.scn.state_at(frame),
            };
            let mut out = Outbox::default();
            self.coordinator.step(frame, &mut out)?;
            if out.decided {
                decision = self.snapshot(frame);
            }
            self.flush(frame, SensorId::COORDINATOR, out)?;
            self.deliver_all(frame, &world)?;

            let ids: Vec<SensorId> = self.sensors.keys().copied().collect();
            for id in ids {
                // The handover is the last thing a run records.
                if self.coordinator.handover.is_some() {
                    break;
                }
                let mut out = Outbox::default();
                self.sensors
                    .get_mut(&id)
                    .expect("listed")
                    .step(frame, &world, &mut out)?;
                self.flush(frame, id, out)?;
                self.deliver_all(frame, &world)?;
            }

            if !self.coordinator.episode_open() {
                quiescent.push(QuiescentState {
                    frame,
                    tracking: self
                        .sensors
                        .values()
                        .filter(|s| s.phase == Phase::Tracking)
                        .map(|s| s.id)
                        .collect(),
                });
            }
            if self.coordinator.handover.is_some() {
                break;
            }
        }
        Ok(RunOutcome {
            frames_run,
            final_phases: self.sensors.iter().map(|(id, s)| (*id, s.phase)).collect(),
            handover: self.coordinator.handover,
            episodes: self.coordinator.episodes(),
            quiescent,
            decision,
            log: self.log,
        })
    }
}

/// Runs every actor until the handover completes or the duration ends.
///
/// Each frame the coordinator steps first, then sensors in id order; after
/// every activation all links are drained before the next actor runs. The
/// outcome is a pure function of the scenario, seed included.
pub fn run_scenario(scn: &Scenario) -> Result<RunOutcome, SimError> {
    scn.validate()?;
    Runner::new(scn).run()
}
