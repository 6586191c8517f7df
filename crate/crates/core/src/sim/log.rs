//! Event log and its line-delimited / CSV exports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::actors::Phase;
use crate::protocol::{MessageKind, TelemetryRecord};
use crate::types::{ObjectId, SensorId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    /// A message fully reassembled by its receiver.
    Message {
        from: SensorId,
        to: SensorId,
        kind: MessageKind,
        sequence: u64,
        bytes: usize,
        latency_s: f64,
    },
    Phase {
        from: Phase,
        to: Phase,
    },
    Detections {
        count: usize,
    },
    Track {
        object_id: ObjectId,
        bbox: [f64; 4],
    },
    Score {
        assistant: SensorId,
        object_id: ObjectId,
        cosine: f64,
        phi: f64,
        z: u32,
        t: u32,
    },
    Telemetry {
        record: TelemetryRecord,
    },
    EpisodeStart {
        episode: u32,
        tracker: SensorId,
    },
    EpisodeAbort {
        episode: u32,
    },
    Handover {
        episode: u32,
        assistant: SensorId,
        object_id: ObjectId,
        phi: f64,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Message { .. } => "message",
            EventKind::Phase { .. } => "phase",
            EventKind::Detections { .. } => "detections",
            EventKind::Track { .. } => "track",
            EventKind::Score { .. } => "score",
            EventKind::Telemetry { .. } => "telemetry",
            EventKind::EpisodeStart { .. } => "episode_start",
            EventKind::EpisodeAbort { .. } => "episode_abort",
            EventKind::Handover { .. } => "handover",
        }
    }
}

/// One log record. `sensor` is the actor that observed the event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub frame: u64,
    pub sensor: SensorId,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

/// Column header of [`EventLog::to_csv`].
pub const CSV_HEADER: &str = "frame,sensor,event_kind,object_id,cosine,phi,latency_s";

impl EventLog {
    pub fn push(&mut self, frame: u64, sensor: SensorId, kind: EventKind) {
        self.events.push(Event { frame, sensor, kind });
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last(&self) -> Option<&Event> {
        self.events.last()
    }

    /// Messages of `kind` delivered anywhere in the log.
    pub fn count_messages(&self, kind: MessageKind) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Message { kind: k, .. } if k == kind))
            .count()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialise"));
            out.push('\n');
        }
        out
    }

    /// One row per event; fields that do not apply are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for e in &self.events {
            let (object, cosine, phi, latency) = match &e.kind {
                EventKind::Message { latency_s, .. } => (None, None, None, Some(*latency_s)),
                EventKind::Track { object_id, .. } => (Some(*object_id), None, None, None),
                EventKind::Score {
                    object_id, cosine, phi, ..
                } => (Some(*object_id), Some(*cosine), Some(*phi), None),
                EventKind::Handover { object_id, phi, .. } => (Some(*object_id), None, Some(*phi), None),
                _ => (None, None, None, None),
            };
            let opt = |v: Option<String>| v.unwrap_or_default();
            let kind = match &e.kind {
                EventKind::Message { kind, .. } => format!("message:{}", kind.name()),
                other => other.name().to_string(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.frame,
                e.sensor,
                kind,
                opt(object.map(|v| v.to_string())),
                opt(cosine.map(|v| v.to_string())),
                opt(phi.map(|v| v.to_string())),
                opt(latency.map(|v| v.to_string())),
            );
        }
        out
    }
}
