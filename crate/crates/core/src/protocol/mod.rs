//! Message vocabulary, length-prefixed framing, transports and Apdex scoring.
//!
//! Every message on the wire is
//!
//! ```text
//! length  u32   bytes that follow the length field (11 + payload)
//! kind    u8    see MessageKind
//! seq     u64   per-sender, per-link counter starting at 0
//! sender  u16   SensorId, 0 = coordinator
//! payload       kind-specific, below
//! ```
//!
//! Payloads (integers and reals big-endian):
//!
//! | kind | code | payload |
//! |------|------|---------|
//! | FRAME | 1 | an `MLF1` frame |
//! | FEATURE | 2 | purpose u8 (0 probe, 1 candidate), origin u16, object u32, config u16, dim u32, dim x f64 |
//! | COMMAND | 3 | verb u8 (1 START_DETECT, 2 START_TRACK, 3 STOP_VISION), has_box u8, box x y w h f64 if has_box = 1 |
//! | DETECTIONS | 4 | count u32, then per detection label u16, objectness f64, box x y w h f64 |
//! | SCORE | 5 | assistant u16, object u32, phi f64, cosine f64 |
//! | STOP_REID | 6 | empty |
//! | START_TRACKING | 7 | object u32 |
//! | TELEMETRY | 8 | sensor u16, lat lon altitude velocity heading f64, motors u8, home lat lon f64, timestamp f64 |
//! | ACK | 9 | empty |

mod apdex;
mod framing;
mod message;
mod transport;

pub use apdex::{
    apdex, classify_request, ApdexClass, ApdexCounters, ApdexTable, RequestTimer, DEFAULT_APDEX_THRESHOLD_S,
};
pub use framing::{frame_message, unframe, FrameReader, SequenceCounter, SequenceTracker, HEADER_LEN, MAX_PAYLOAD_LEN};
pub use message::{
    Command, CommandVerb, FeatureMessage, FeaturePurpose, Message, MessageKind, Payload, TelemetryRecord,
};
pub use transport::{LoopbackLink, StreamConn};

use thiserror::Error;

use crate::types::SensorId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("incomplete message, need more bytes")]
    NeedMoreBytes,
    #[error("corrupt frame: {0}")]
    CorruptFrame(String),
    #[error("payload of {0} bytes exceeds the frame limit")]
    PayloadTooLarge(usize),
    #[error("sequence gap from {sender}: expected {expected}, got {got}")]
    SequenceGap { sender: SensorId, expected: u64, got: u64 },
    #[error("connection closed")]
    Closed,
    #[error("i/o error: {0}")]
    Io(String),
    #[error("no samples")]
    NoSamples,
    #[error("invalid request timer: {0}")]
    InvalidTimer(String),
}

impl From<std::io::Error> for ProtocolError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            ProtocolError::Closed
        } else {
            ProtocolError::Io(e.to_string())
        }
    }
}
