use std::collections::VecDeque;
use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::framing::{frame_message, FrameReader};
use super::message::Message;
use super::ProtocolError;
use crate::rng;

/// In-memory one-way byte pipe.
///
/// Senders append whole framed messages; [`LoopbackLink::deliver`] moves the
/// queued bytes to the receiving [`FrameReader`] in seeded random chunk sizes
/// so reassembly is exercised on every hop.
#[derive(Debug)]
pub struct LoopbackLink {
    queue: VecDeque<u8>,
    reader: FrameReader,
    rng: ChaCha8Rng,
    max_chunk: usize,
    bytes_sent: u64,
}

impl LoopbackLink {
    pub fn new(seed: u64) -> Self {
        Self::with_max_chunk(seed, 4096)
    }

    pub fn with_max_chunk(seed: u64, max_chunk: usize) -> Self {
        LoopbackLink {
            queue: VecDeque::new(),
            reader: FrameReader::new(),
            rng: rng::stream(seed),
            max_chunk: max_chunk.max(1),
            bytes_sent: 0,
        }
    }

    /// Queues `msg`; returns the framed size in bytes.
    pub fn send(&mut self, msg: &Message) -> Result<usize, ProtocolError> {
        let bytes = frame_message(msg)?;
        self.bytes_sent += bytes.len() as u64;
        self.queue.extend(bytes.iter());
        Ok(bytes.len())
    }

    pub fn bytes_in_flight(&self) -> usize {
        self.queue.len() + self.reader.buffered()
    }

    pub fn bytes_sent(&self) -> u64 {
        self.bytes_sent
    }

    pub fn is_idle(&self) -> bool {
        self.bytes_in_flight() == 0
    }

    /// Delivers every queued byte and returns the completed messages in order.
    pub fn deliver(&mut self) -> Result<Vec<Message>, ProtocolError> {
        let mut out = Vec::new();
        let mut chunk = Vec::with_capacity(self.max_chunk);
        while !self.queue.is_empty() {
            let n = self.rng.random_range(1..=self.max_chunk).min(self.queue.len());
            chunk.clear();
            chunk.extend(self.queue.drain(..n));
            self.reader.push(&chunk);
            out.extend(self.reader.drain_messages()?);
        }
        Ok(out)
    }
}

/// Message connection over any reliable byte stream such as a `TcpStream`.
///
/// Each send writes one whole frame; callers sharing a stream must serialise sends.
#[derive(Debug)]
pub struct StreamConn<S> {
    stream: S,
    reader: FrameReader,
    scratch: Vec<u8>,
}

impl<S: Read + Write> StreamConn<S> {
    pub fn new(stream: S) -> Self {
        StreamConn {
            stream,
            reader: FrameReader::new(),
            scratch: vec![0; 64 * 1024],
        }
    }

    pub fn get_ref(&self) -> &S {
        &self.stream
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        let bytes = frame_message(msg)?;
        self.stream.write_all(&bytes)?;
        self.stream.flush()?;
        Ok(())
    }

    /// Blocks until one message is complete. A clean end of stream between
    /// messages is [`ProtocolError::Closed`].
    pub fn recv(&mut self) -> Result<Message, ProtocolError> {
        loop {
            if let Some(m) = self.reader.next_message()? {
                return Ok(m);
            }
            let n = self.stream.read(&mut self.scratch)?;
            if n == 0 {
                return Err(if self.reader.buffered() == 0 {
                    ProtocolError::Closed
                } else {
                    ProtocolError::CorruptFrame("stream ended inside a message".into())
                });
            }
            self.reader.push(&self.scratch[..n]);
        }
    }
}
