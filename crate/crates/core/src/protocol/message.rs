use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::detection::{BoundingBox, Detection, DETECTION_WIRE_LEN};
use crate::features::FeatureVector;
use crate::imaging::{decode_frame, encode_frame, Frame};
use crate::reid::HandoverScore;
use crate::types::{GeoPoint, ObjectId, SensorId};
use crate::wire::{put_f64, put_u16, put_u32, Reader};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum MessageKind {
    Frame = 1,
    Feature = 2,
    Command = 3,
    Detections = 4,
    Score = 5,
    StopReid = 6,
    StartTracking = 7,
    Telemetry = 8,
    Ack = 9,
}

impl MessageKind {
    pub const ALL: [MessageKind; 9] = [
        MessageKind::Frame,
        MessageKind::Feature,
        MessageKind::Command,
        MessageKind::Detections,
        MessageKind::Score,
        MessageKind::StopReid,
        MessageKind::StartTracking,
        MessageKind::Telemetry,
        MessageKind::Ack,
    ];

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).wrapping_sub(1)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Frame => "FRAME",
            MessageKind::Feature => "FEATURE",
            MessageKind::Command => "COMMAND",
            MessageKind::Detections => "DETECTIONS",
            MessageKind::Score => "SCORE",
            MessageKind::StopReid => "STOP_REID",
            MessageKind::StartTracking => "START_TRACKING",
            MessageKind::Telemetry => "TELEMETRY",
            MessageKind::Ack => "ACK",
        }
    }
}

impl std::fmt::Display for MessageKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum FeaturePurpose {
    /// Tracked-target descriptor broadcast to assistants.
    Probe = 0,
    /// Assistant observation returned for back-matching.
    Candidate = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMessage {
    pub purpose: FeaturePurpose,
    /// Sensor that computed the feature; relays keep it intact.
    pub origin: SensorId,
    /// Object id local to `origin`.
    pub object_id: ObjectId,
    pub feature: FeatureVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum CommandVerb {
    StartDetect = 1,
    StartTrack = 2,
    StopVision = 3,
}

impl CommandVerb {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(CommandVerb::StartDetect),
            2 => Some(CommandVerb::StartTrack),
            3 => Some(CommandVerb::StopVision),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub verb: CommandVerb,
    pub target: Option<BoundingBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub sensor: SensorId,
    pub position: GeoPoint,
    /// Metres.
    pub altitude: f64,
    /// Metres per second.
    pub velocity: f64,
    /// Compass degrees in `[0, 360)`.
    pub heading: f64,
    pub motors_on: bool,
    pub home: GeoPoint,
    /// Simulated seconds.
    pub timestamp: f64,
}

impl TelemetryRecord {
    pub const WIRE_LEN: usize = 2 + 5 * 8 + 1 + 2 * 8 + 8;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Frame(Frame),
    Feature(FeatureMessage),
    Command(Command),
    /// Class probabilities are not transmitted; received detections carry an
    /// empty `class_probs`.
    Detections(Vec<Detection>),
    Score(HandoverScore),
    StopReid,
    StartTracking {
        object_id: ObjectId,
    },
    Telemetry(TelemetryRecord),
    Ack,
}

fn corrupt(kind: MessageKind, what: &str) -> ProtocolError {
    ProtocolError::CorruptFrame(format!("{kind} payload: {what}"))
}

fn put_box(out: &mut Vec<u8>, b: &BoundingBox) {
    for v in [b.x, b.y, b.w, b.h] {
        put_f64(out, v);
    }
}

fn read_box(r: &mut Reader<'_>) -> Option<BoundingBox> {
    Some(BoundingBox::new(r.f64()?, r.f64()?, r.f64()?, r.f64()?))
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Frame(_) => MessageKind::Frame,
            Payload::Feature(_) => MessageKind::Feature,
            Payload::Command(_) => MessageKind::Command,
            Payload::Detections(_) => MessageKind::Detections,
            Payload::Score(_) => MessageKind::Score,
            Payload::StopReid => MessageKind::StopReid,
            Payload::StartTracking { .. } => MessageKind::StartTracking,
            Payload::Telemetry(_) => MessageKind::Telemetry,
            Payload::Ack => MessageKind::Ack,
        }
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        match self {
            Payload::Frame(f) => out.extend_from_slice(&encode_frame(f)),
            Payload::Feature(m) => {
                out.push(m.purpose as u8);
                put_u16(out, m.origin.0);
                put_u32(out, m.object_id);
                m.feature.write_wire(out);
            }
            Payload::Command(c) => {
                out.push(c.verb as u8);
                match &c.target {
                    Some(b) => {
                        out.push(1);
                        put_box(out, b);
                    }
                    None => out.push(0),
                }
            }
            Payload::Detections(ds) => {
                out.reserve(4 + ds.len() * DETECTION_WIRE_LEN);
                put_u32(out, ds.len() as u32);
                for d in ds {
                    d.write_wire(out);
                }
            }
            Payload::Score(s) => s.write_wire(out),
            Payload::StopReid | Payload::Ack => {}
            Payload::StartTracking { object_id } => put_u32(out, *object_id),
            Payload::Telemetry(t) => {
                put_u16(out, t.sensor.0);
                for v in [t.position.lat, t.position.lon, t.altitude, t.velocity, t.heading] {
                    put_f64(out, v);
                }
                out.push(t.motors_on as u8);
                for v in [t.home.lat, t.home.lon, t.timestamp] {
                    put_f64(out, v);
                }
            }
        }
    }

    pub fn encoded_len(&self) -> usize {
        match self {
            Payload::Frame(f) => crate::imaging::MLF1_HEADER_LEN + f.pixels().len(),
            Payload::Feature(m) => 1 + 2 + 4 + 2 + 4 + 8 * m.feature.dim(),
            Payload::Command(c) => 2 + if c.target.is_some() { 32 } else { 0 },
            Payload::Detections(ds) => 4 + ds.len() * DETECTION_WIRE_LEN,
            Payload::Score(_) => crate::reid::HANDOVER_SCORE_WIRE_LEN,
            Payload::StopReid | Payload::Ack => 0,
            Payload::StartTracking { .. } => 4,
            Payload::Telemetry(_) => TelemetryRecord::WIRE_LEN,
        }
    }

    /// Parses a payload; trailing bytes are an error.
    pub fn decode(kind: MessageKind, bytes: &[u8]) -> Result<Payload, ProtocolError> {
        let mut r = Reader::new(bytes);
        let short = || corrupt(kind, "truncated");
        let payload = match kind {
            MessageKind::Frame => {
                let frame = decode_frame(r.rest()).map_err(|e| corrupt(kind, &e.to_string()))?;
                Payload::Frame(frame)
            }
            MessageKind::Feature => {
                let purpose = match r.u8().ok_or_else(short)? {
                    0 => FeaturePurpose::Probe,
                    1 => FeaturePurpose::Candidate,
                    p => return Err(corrupt(kind, &format!("unknown purpose {p}"))),
                };
                let origin = SensorId(r.u16().ok_or_else(short)?);
                let object_id = r.u32().ok_or_else(short)?;
                let feature = FeatureVector::read_wire(&mut r).ok_or_else(short)?;
                Payload::Feature(FeatureMessage {
                    purpose,
                    origin,
                    object_id,
                    feature,
                })
            }
            MessageKind::Command => {
                let code = r.u8().ok_or_else(short)?;
                let verb =
                    CommandVerb::from_code(code).ok_or_else(|| corrupt(kind, &format!("unknown verb {code}")))?;
                let target = match r.u8().ok_or_else(short)? {
                    0 => None,
                    1 => Some(read_box(&mut r).ok_or_else(short)?),
                    f => return Err(corrupt(kind, &format!("bad box flag {f}"))),
                };
                Payload::Command(Command { verb, target })
            }
            MessageKind::Detections => {
                let n = r.u32().ok_or_else(short)? as usize;
                if r.remaining() != n.saturating_mul(DETECTION_WIRE_LEN) {
                    return Err(corrupt(kind, "count does not match length"));
                }
                let ds = (0..n)
                    .map(|_| Detection::read_wire(&mut r))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(short)?;
                Payload::Detections(ds)
            }
            MessageKind::Score => Payload::Score(HandoverScore::read_wire(&mut r).ok_or_else(short)?),
            MessageKind::StopReid => Payload::StopReid,
            MessageKind::StartTracking => Payload::StartTracking {
                object_id: r.u32().ok_or_else(short)?,
            },
            MessageKind::Telemetry => {
                let mut read = || -> Option<TelemetryRecord> {
                    let sensor = SensorId(r.u16()?);
                    let position = GeoPoint::new(r.f64()?, r.f64()?);
                    let (altitude, velocity, heading) = (r.f64()?, r.f64()?, r.f64()?);
                    let motors_on = r.u8()? != 0;
                    let home = GeoPoint::new(r.f64()?, r.f64()?);
                    let timestamp = r.f64()?;
                    Some(TelemetryRecord {
                        sensor,
                        position,
                        altitude,
                        velocity,
                        heading,
                        motors_on,
                        home,
                        timestamp,
                    })
                };
                Payload::Telemetry(read().ok_or_else(short)?)
            }
            MessageKind::Ack => Payload::Ack,
        };
        if r.remaining() != 0 {
            return Err(corrupt(kind, "trailing bytes"));
        }
        Ok(payload)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sequence: u64,
    pub sender: SensorId,
    pub payload: Payload,
}

impl Message {
    pub fn new(sequence: u64, sender: SensorId, payload: Payload) -> Self {
        Message {
            sequence,
            sender,
            payload,
        }
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_codes() {
        for (i, k) in MessageKind::ALL.iter().enumerate() {
            assert_eq!(*k as u8, i as u8 + 1);
            assert_eq!(MessageKind::from_code(i as u8 + 1), Some(*k));
        }
        assert_eq!(MessageKind::from_code(0), None);
        assert_eq!(MessageKind::from_code(0xFF), None);
    }

    #[test]
    fn command_layout() {
        let mut out = Vec::new();
        Payload::Command(Command {
            verb: CommandVerb::StopVision,
            target: None,
        })
        .encode(&mut out);
        assert_eq!(out, vec![3, 0]);

        let p = Payload::Command(Command {
            verb: CommandVerb::StartTrack,
            target: Some(BoundingBox::new(1.0, 2.0, 3.0, 4.0)),
        });
        let mut out = Vec::new();
        p.encode(&mut out);
        assert_eq!(out.len(), 34);
        assert_eq!(&out[..2], &[2, 1]);
        assert_eq!(&out[2..10], &1.0f64.to_be_bytes());
        assert_eq!(Payload::decode(MessageKind::Command, &out).unwrap(), p);
    }

    #[test]
    fn unknown_command_verb_is_corrupt() {
        assert!(matches!(
            Payload::decode(MessageKind::Command, &[9, 0]),
            Err(ProtocolError::CorruptFrame(_))
        ));
    }

    #[test]
    fn telemetry_roundtrip_and_length() {
        let t = TelemetryRecord {
            sensor: SensorId(3),
            position: GeoPoint::new(50.1, -5.7),
            altitude: 30.0,
            velocity: 0.0,
            heading: 270.0,
            motors_on: true,
            home: GeoPoint::new(50.0, -5.0),
            timestamp: 1.5,
        };
        let p = Payload::Telemetry(t);
        let mut out = Vec::new();
        p.encode(&mut out);
        assert_eq!(out.len(), TelemetryRecord::WIRE_LEN);
        assert_eq!(out.len(), p.encoded_len());
        assert_eq!(Payload::decode(MessageKind::Telemetry, &out).unwrap(), p);
    }

    #[test]
    fn detections_count_mismatch() {
        let mut out = Vec::new();
        Payload::Detections(vec![]).encode(&mut out);
        assert_eq!(out, vec![0, 0, 0, 0]);
        out[3] = 1;
        assert!(Payload::decode(MessageKind::Detections, &out).is_err());
    }

    #[test]
    fn trailing_bytes_rejected() {
        assert!(Payload::decode(MessageKind::Ack, &[0]).is_err());
        assert!(Payload::decode(MessageKind::StartTracking, &[0, 0, 0, 1, 2]).is_err());
    }
}
