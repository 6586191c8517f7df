use std::collections::BTreeMap;

use super::message::{Message, MessageKind, Payload};
use super::ProtocolError;
use crate::types::SensorId;
use crate::wire::{put_u16, put_u32, put_u64};

/// Kind, sequence and sender: the bytes counted by the length field before the payload.
pub const HEADER_LEN: usize = 1 + 8 + 2;
/// Largest payload a frame can carry.
pub const MAX_PAYLOAD_LEN: u64 = (1u64 << 32) - 16;

/// Serialises `msg` as `length | kind | sequence | sender | payload`.
pub fn frame_message(msg: &Message) -> Result<Vec<u8>, ProtocolError> {
    let payload_len = check_payload_len(msg.payload.encoded_len())?;
    let mut out = Vec::with_capacity(4 + HEADER_LEN + payload_len);
    put_u32(&mut out, (HEADER_LEN + payload_len) as u32);
    out.push(msg.kind() as u8);
    put_u64(&mut out, msg.sequence);
    put_u16(&mut out, msg.sender.0);
    msg.payload.encode(&mut out);
    debug_assert_eq!(out.len(), 4 + HEADER_LEN + payload_len);
    Ok(out)
}

fn check_payload_len(len: usize) -> Result<usize, ProtocolError> {
    if len as u64 > MAX_PAYLOAD_LEN {
        return Err(ProtocolError::PayloadTooLarge(len));
    }
    Ok(len)
}

/// Parses the first message of `stream` and returns it with the unread rest.
///
/// A stream holding only part of a message yields
/// [`ProtocolError::NeedMoreBytes`]. An unknown kind is reported as soon as
/// the kind byte is available.
pub fn unframe(stream: &[u8]) -> Result<(Message, &[u8]), ProtocolError> {
    if stream.len() < 4 {
        return Err(ProtocolError::NeedMoreBytes);
    }
    let len = u32::from_be_bytes(stream[..4].try_into().expect("4 bytes")) as usize;
    if len < HEADER_LEN {
        return Err(ProtocolError::CorruptFrame(format!(
            "length {len} shorter than the {HEADER_LEN}-byte header"
        )));
    }
    if let Some(&code) = stream.get(4) {
        if MessageKind::from_code(code).is_none() {
            return Err(ProtocolError::CorruptFrame(format!("unknown kind 0x{code:02X}")));
        }
    }
    if stream.len() < 4 + len {
        return Err(ProtocolError::NeedMoreBytes);
    }
    let body = &stream[4..4 + len];
    let kind = MessageKind::from_code(body[0]).expect("checked above");
    let sequence = u64::from_be_bytes(body[1..9].try_into().expect("8 bytes"));
    let sender = SensorId(u16::from_be_bytes(body[9..11].try_into().expect("2 bytes")));
    let payload = Payload::decode(kind, &body[HEADER_LEN..])?;
    Ok((
        Message {
            sequence,
            sender,
            payload,
        },
        &stream[4 + len..],
    ))
}

/// Reassembles messages from arbitrarily fragmented input.
///
/// After a corrupt frame the reader stays failed; the connection is unusable.
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
    start: usize,
    failed: Option<ProtocolError>,
}

impl FrameReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.start > 0 && self.start * 2 >= self.buf.len() {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes received but not yet consumed by a complete message.
    pub fn buffered(&self) -> usize {
        self.buf.len() - self.start
    }

    pub fn next_message(&mut self) -> Result<Option<Message>, ProtocolError> {
        if let Some(e) = &self.failed {
            return Err(e.clone());
        }
        let pending = &self.buf[self.start..];
        match unframe(pending) {
            Ok((msg, rest)) => {
                self.start += pending.len() - rest.len();
                Ok(Some(msg))
            }
            Err(ProtocolError::NeedMoreBytes) => Ok(None),
            Err(e) => {
                self.failed = Some(e.clone());
                Err(e)
            }
        }
    }

    /// Every complete message currently buffered.
    pub fn drain_messages(&mut self) -> Result<Vec<Message>, ProtocolError> {
        let mut out = Vec::new();
        while let Some(m) = self.next_message()? {
            out.push(m);
        }
        Ok(out)
    }
}

/// Issues sequence numbers for one sender on one link.
#[derive(Debug, Clone, Default)]
pub struct SequenceCounter {
    next: u64,
}

impl SequenceCounter {
    pub fn next_sequence(&mut self) -> u64 {
        let s = self.next;
        self.next += 1;
        s
    }
}

/// Receiver-side check that every sender's sequence starts at 0 and has no gaps.
#[derive(Debug, Clone, Default)]
pub struct SequenceTracker {
    expected: BTreeMap<SensorId, u64>,
}

impl SequenceTracker {
    pub fn observe(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        let expected = self.expected.entry(msg.sender).or_insert(0);
        if msg.sequence != *expected {
            return Err(ProtocolError::SequenceGap {
                sender: msg.sender,
                expected: *expected,
                got: msg.sequence,
            });
        }
        *expected += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{BoundingBox, Detection};
    use crate::features::FeatureVector;
    use crate::imaging::Frame;
    use crate::protocol::{Command, CommandVerb, FeatureMessage, FeaturePurpose, TelemetryRecord};
    use crate::reid::HandoverScore;
    use crate::types::GeoPoint;
    use proptest::prelude::*;

    fn ack(seq: u64, sender: u16) -> Message {
        Message::new(seq, SensorId(sender), Payload::Ack)
    }

    #[test]
    fn ack_header_arithmetic() {
        let bytes = frame_message(&ack(5, 2)).unwrap();
        assert_eq!(bytes.len(), 15);
        assert_eq!(&bytes[..4], &11u32.to_be_bytes());
        assert_eq!(bytes, vec![0, 0, 0, 11, 9, 0, 0, 0, 0, 0, 0, 0, 5, 0, 2]);
    }

    #[test]
    fn golden_frame_message() {
        let frame = Frame::gray(1, 1, vec![0x7F]).unwrap();
        let msg = Message::new(1, SensorId(3), Payload::Frame(frame));
        let expected: Vec<u8> = [
            &[0x00, 0x00, 0x00, 0x1A][..], // length 26 = 11 + 15
            &[0x01],                       // FRAME
            &[0, 0, 0, 0, 0, 0, 0, 1],     // sequence
            &[0x00, 0x03],                 // sender
            b"MLF1",
            &[0, 0, 0, 1, 0, 0, 0, 1, 0x01, 0x01, 0x7F],
        ]
        .concat();
        assert_eq!(frame_message(&msg).unwrap(), expected);
        let (back, rest) = unframe(&expected).unwrap();
        assert_eq!(back, msg);
        assert!(rest.is_empty());
    }

    #[test]
    fn unknown_kind_is_corrupt() {
        let mut bytes = frame_message(&ack(0, 1)).unwrap();
        bytes[4] = 0xFF;
        assert!(matches!(unframe(&bytes), Err(ProtocolError::CorruptFrame(_))));
        // Reported even before the rest of the message arrives.
        assert!(matches!(unframe(&bytes[..5]), Err(ProtocolError::CorruptFrame(_))));
    }

    #[test]
    fn short_length_is_corrupt() {
        let bytes = [0, 0, 0, 3, 9, 0, 0];
        assert!(matches!(unframe(&bytes), Err(ProtocolError::CorruptFrame(_))));
    }

    #[test]
    fn payload_length_mismatch_is_corrupt() {
        let mut bytes = frame_message(&Message::new(0, SensorId(1), Payload::StartTracking { object_id: 4 })).unwrap();
        bytes[3] += 1;
        bytes.push(0);
        assert!(matches!(unframe(&bytes), Err(ProtocolError::CorruptFrame(_))));
    }

    #[test]
    fn back_to_back_messages() {
        let a = Message::new(0, SensorId(1), Payload::StopReid);
        let b = Message::new(1, SensorId(1), Payload::StartTracking { object_id: 77 });
        let mut stream = frame_message(&a).unwrap();
        let b_bytes = frame_message(&b).unwrap();
        stream.extend_from_slice(&b_bytes);
        let (first, rest) = unframe(&stream).unwrap();
        assert_eq!(first, a);
        assert_eq!(rest, &b_bytes[..]);
        let (second, rest) = unframe(rest).unwrap();
        assert_eq!(second, b);
        assert!(rest.is_empty());
    }

    #[test]
    fn every_split_point_gives_same_result() {
        let msg = sample_messages()[1].clone();
        let bytes = frame_message(&msg).unwrap();
        for cut in 0..=bytes.len() {
            let mut r = FrameReader::new();
            r.push(&bytes[..cut]);
            let early = r.next_message().unwrap();
            if cut < bytes.len() {
                assert!(early.is_none());
                assert!(matches!(unframe(&bytes[..cut]), Err(ProtocolError::NeedMoreBytes)));
                r.push(&bytes[cut..]);
                assert_eq!(r.next_message().unwrap(), Some(msg.clone()));
            } else {
                assert_eq!(early, Some(msg.clone()));
            }
            assert_eq!(r.buffered(), 0);
        }
    }

    #[test]
    fn too_large_payload_rejected() {
        assert_eq!(MAX_PAYLOAD_LEN, 4_294_967_280);
        // 2^32 - 16 payload bytes still fit in the length field together with the header.
        assert!(MAX_PAYLOAD_LEN + HEADER_LEN as u64 <= u32::MAX as u64);
        assert!(check_payload_len(MAX_PAYLOAD_LEN as usize).is_ok());
        assert_eq!(
            check_payload_len(MAX_PAYLOAD_LEN as usize + 1),
            Err(ProtocolError::PayloadTooLarge(MAX_PAYLOAD_LEN as usize + 1))
        );
    }

    #[test]
    fn sequence_tracker_detects_gaps() {
        let mut t = SequenceTracker::default();
        t.observe(&ack(0, 1)).unwrap();
        t.observe(&ack(0, 2)).unwrap();
        t.observe(&ack(1, 1)).unwrap();
        assert_eq!(
            t.observe(&ack(3, 1)),
            Err(ProtocolError::SequenceGap {
                sender: SensorId(1),
                expected: 2,
                got: 3
            })
        );
        let mut c = SequenceCounter::default();
        assert_eq!((c.next_sequence(), c.next_sequence()), (0, 1));
    }

    fn sample_messages() -> Vec<Message> {
        let frame = Frame::rgb(2, 2, (0..12).collect()).unwrap();
        let feature = FeatureVector::new(9, vec![0.5, -0.25, 1e-300, 3.0]);
        let det = Detection {
            bbox: BoundingBox::new(10.0, 20.0, 5.0, 7.5),
            objectness: 0.875,
            class_probs: vec![],
            label: 1,
        };
        let payloads = vec![
            Payload::Frame(frame),
            Payload::Feature(FeatureMessage {
                purpose: FeaturePurpose::Candidate,
                origin: SensorId(4),
                object_id: 17,
                feature,
            }),
            Payload::Command(Command {
                verb: CommandVerb::StartDetect,
                target: None,
            }),
            Payload::Detections(vec![det.clone(), det]),
            Payload::Score(HandoverScore {
                assistant: SensorId(2),
                object_id: 3,
                phi: 36.4,
                cosine: 0.91,
            }),
            Payload::StopReid,
            Payload::StartTracking { object_id: 5 },
            Payload::Telemetry(TelemetryRecord {
                sensor: SensorId(1),
                position: GeoPoint::new(1.0, 2.0),
                altitude: 3.0,
                velocity: 4.0,
                heading: 5.0,
                motors_on: false,
                home: GeoPoint::new(6.0, 7.0),
                timestamp: 8.0,
            }),
            Payload::Ack,
        ];
        payloads
            .into_iter()
            .enumerate()
            .map(|(i, p)| Message::new(i as u64, SensorId(1 + i as u16), p))
            .collect()
    }

    #[test]
    fn every_kind_roundtrips() {
        for m in sample_messages() {
            let bytes = frame_message(&m).unwrap();
            assert_eq!(bytes.len(), 4 + HEADER_LEN + m.payload.encoded_len());
            let (back, rest) = unframe(&bytes).unwrap();
            assert_eq!(back, m);
            assert!(rest.is_empty());
        }
    }

    proptest! {
        #[test]
        fn fragmentation_and_coalescing(
            picks in prop::collection::vec(0usize..9, 1..12),
            cuts in prop::collection::vec(1usize..64, 1..40),
        ) {
            let pool = sample_messages();
            let msgs: Vec<Message> = picks.iter().map(|&i| pool[i].clone()).collect();
            let stream: Vec<u8> = msgs.iter().flat_map(|m| frame_message(m).unwrap()).collect();
            let mut reader = FrameReader::new();
            let mut got = Vec::new();
            let mut pos = 0;
            let mut i = 0;
            while pos < stream.len() {
                let n = cuts[i % cuts.len()].min(stream.len() - pos);
                reader.push(&stream[pos..pos + n]);
                got.extend(reader.drain_messages().unwrap());
                pos += n;
                i += 1;
            }
            prop_assert_eq!(got, msgs);
            prop_assert_eq!(reader.buffered(), 0);
        }
    }
}
