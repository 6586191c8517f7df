//! Vision request/response back-end over TCP, timed with Apdex.
//!
//! A client ships `FRAME` followed by a `COMMAND` per request; the server
//! answers with `DETECTIONS`. `START_DETECT` runs the scripted detector on the
//! scenario state for the server's frame counter. `START_TRACK` with a box
//! (re)initialises the correlation filter, without a box it advances it.
//!
//! Injected delays go through a [`Clock`], so benchmarks can account for slow
//! requests without sleeping.

use std::fmt;
use std::net::{Shutdown, TcpListener, TcpStream};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::detection::{scripted_detect, BoundingBox, Detection};
use crate::imaging::Frame;
use crate::protocol::{
    classify_request, ApdexTable, Command, CommandVerb, Message, Payload, ProtocolError, RequestTimer, StreamConn,
    DEFAULT_APDEX_THRESHOLD_S,
};
use crate::rng::mix;
use crate::sim::{render_sensor_view, Scenario, SimError};
use crate::tracking::{dcf_init, DcfHyper, DcfModel};
use crate::types::SensorId;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid bench configuration: {0}")]
    InvalidConfig(String),
    #[error("transport: {0}")]
    Transport(#[from] ProtocolError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("server thread: {0}")]
    Server(String),
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Transport(e.into())
    }
}

/// Monotonic seconds plus a way to spend time.
pub trait Clock: Send + Sync + fmt::Debug {
    fn now_s(&self) -> f64;
    /// Lets `seconds` pass.
    fn delay(&self, seconds: f64);
}

/// Wall clock; delays sleep.
#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now_s(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    fn delay(&self, seconds: f64) {
        if seconds > 0.0 {
            thread::sleep(Duration::from_secs_f64(seconds));
        }
    }
}

/// Wall clock plus an offset; delays advance the offset instead of sleeping.
/// Measured latencies are real processing time plus injected delay.
#[derive(Debug)]
pub struct SkewClock {
    origin: Instant,
    skew_ns: AtomicU64,
}

impl Default for SkewClock {
    fn default() -> Self {
        SkewClock {
            origin: Instant::now(),
            skew_ns: AtomicU64::new(0),
        }
    }
}

impl Clock for SkewClock {
    fn now_s(&self) -> f64 {
        self.origin.elapsed().as_secs_f64() + self.skew_ns.load(Ordering::SeqCst) as f64 * 1e-9
    }

    fn delay(&self, seconds: f64) {
        if seconds > 0.0 {
            self.skew_ns.fetch_add((seconds * 1e9).round() as u64, Ordering::SeqCst);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RequestKind {
    Detect,
    Track,
}

impl RequestKind {
    /// Row label in the Apdex table.
    pub fn label(self) -> &'static str {
        match self {
            RequestKind::Detect => "Object Detect",
            RequestKind::Track => "Object Track",
        }
    }
}

impl FromStr for RequestKind {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "detect" => Ok(RequestKind::Detect),
            "track" => Ok(RequestKind::Track),
            _ => Err(ServiceError::InvalidConfig(format!(
                "unknown request kind {s:?} (detect|track)"
            ))),
        }
    }
}

/// The first `count` requests of `kind` take `delay_s` extra seconds.
///
/// Text form `kind:count:seconds`, e.g. `detect:3:0.6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySpec {
    pub kind: RequestKind,
    pub count: u32,
    pub delay_s: f64,
}

impl FromStr for DelaySpec {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ServiceError::InvalidConfig(format!("delay {s:?} is not kind:count:seconds"));
        let mut parts = s.split(':');
        let (Some(k), Some(n), Some(d), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let delay_s: f64 = d.parse().map_err(|_| bad())?;
        if !(delay_s >= 0.0) || !delay_s.is_finite() {
            return Err(bad());
        }
        Ok(DelaySpec {
            kind: k.parse()?,
            count: n.parse().map_err(|_| bad())?,
            delay_s,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Requests per kind.
    pub samples: u32,
    pub threshold_s: f64,
    pub kinds: Vec<RequestKind>,
    pub delays: Vec<DelaySpec>,
    /// Spend injected delays on a [`SkewClock`] rather than sleeping.
    pub virtual_time: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            samples: 100,
            threshold_s: DEFAULT_APDEX_THRESHOLD_S,
            kinds: vec![RequestKind::Detect, RequestKind::Track],
            delays: vec![],
            virtual_time: true,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.samples == 0 {
            return Err(ServiceError::InvalidConfig("samples must be at least 1".into()));
        }
        if !(self.threshold_s > 0.0) || !self.threshold_s.is_finite() {
            return Err(ServiceError::InvalidConfig(format!(
                "threshold {} must be positive",
                self.threshold_s
            )));
        }
        if self.kinds.is_empty() {
            return Err(ServiceError::InvalidConfig("no request kinds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub table: ApdexTable,
    pub timers: Vec<RequestTimer>,
}

/// Pending injected delays, consumed per request kind.
#[derive(Debug, Clone)]
struct DelayBook(Vec<DelaySpec>);

impl DelayBook {
    fn take(&mut self, kind: RequestKind) -> f64 {
        let mut total = 0.0;
        for d in self.0.iter_mut().filter(|d| d.kind == kind && d.count > 0) {
            d.count -= 1;
            total += d.delay_s;
        }
        total
    }
}

/// Server side of one connection.
struct VisionServer {
    scn: Scenario,
    sensor: SensorId,
    clock: Arc<dyn Clock>,
    delays: DelayBook,
    frame_counter: u64,
    dcf: Option<DcfModel>,
    sequence: u64,
}

impl VisionServer {
    fn answer(&mut self, frame: &Frame, cmd: &Command) -> Result<Vec<Detection>, ServiceError> {
        let index = self.frame_counter % self.scn.duration;
        self.frame_counter += 1;
        let kind = match cmd.verb {
            CommandVerb::StartDetect => RequestKind::Detect,
            CommandVerb::StartTrack => RequestKind::Track,
            CommandVerb::StopVision => {
                self.dcf = None;
                return Ok(vec![]);
            }
        };
        let dets = match kind {
            RequestKind::Detect => {
                let state = self.scn.state_at(index);
                scripted_detect(
                    &state,
                    self.sensor,
                    &self.scn.noise,
                    mix(self.scn.seed, &[0xBE7, index]),
                )
                .map_err(SimError::from)?
            }
            RequestKind::Track => {
                let bbox = match (cmd.target, self.dcf.as_mut()) {
                    (Some(b), _) => {
                        self.dcf = Some(dcf_init(frame, &b, DcfHyper::default()).map_err(SimError::from)?);
                        Some(b)
                    }
                    (None, Some(dcf)) => dcf.update(frame).ok(),
                    (None, None) => None,
                };
                bbox.map(|b| Detection {
                    bbox: b,
                    objectness: 1.0,
                    class_probs: vec![],
                    label: 0,
                })
                .into_iter()
                .collect()
            }
        };
        self.clock.delay(self.delays.take(kind));
        Ok(dets)
    }

    fn serve(mut self, stream: TcpStream) -> Result<(), ServiceError> {
        stream.set_nodelay(true)?;
        let mut conn = StreamConn::new(stream);
        let mut pending: Option<Frame> = None;
        loop {
            let msg = match conn.recv() {
                Ok(m) => m,
                Err(ProtocolError::Closed) => return Ok(()),
                Err(e) => return Err(e.into()),
            };
            match msg.payload {
                Payload::Frame(f) => pending = Some(f),
                Payload::Command(cmd) => {
                    let frame = pending
                        .take()
                        .ok_or_else(|| ServiceError::Server("COMMAND without a preceding FRAME".into()))?;
                    let dets = self.answer(&frame, &cmd)?;
                    conn.send(&Message::new(
                        self.sequence,
                        SensorId::COORDINATOR,
                        Payload::Detections(dets),
                    ))?;
                    self.sequence += 1;
                }
                other => {
                    return Err(ServiceError::Server(format!("unexpected {} request", other.kind())));
                }
            }
        }
    }
}

/// Frames of the scenario's tracking sensor, rendered once and reused.
struct FrameCache<'a> {
    scn: &'a Scenario,
    sensor: SensorId,
    frames: Vec<Option<Frame>>,
}

impl<'a> FrameCache<'a> {
    fn get(&mut self, index: u64) -> Result<&Frame, SimError> {
        let i = (index % self.scn.duration) as usize;
        if self.frames[i].is_none() {
            self.frames[i] = Some(render_sensor_view(self.scn, self.sensor, i as u64)?);
        }
        Ok(self.frames[i].as_ref().expect("just filled"))
    }
}

/// Issues `samples` requests of every configured kind to a server on a
/// loopback TCP socket and classifies each round trip.
///
/// Requests are sent one at a time; latency runs from the first byte of the
/// request to the decoded reply. A reply of the wrong kind counts as failed.
pub fn run_bench(scn: &Scenario, cfg: &BenchConfig) -> Result<BenchReport, ServiceError> {
    cfg.validate()?;
    scn.validate()?;
    let clock: Arc<dyn Clock> = if cfg.virtual_time {
        Arc::new(SkewClock::default())
    } else {
        Arc::new(SystemClock::default())
    };
    let sensor = scn.tracking_sensor().id;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let server = VisionServer {
        scn: scn.clone(),
        sensor,
        clock: clock.clone(),
        delays: DelayBook(cfg.delays.clone()),
        frame_counter: 0,
        dcf: None,
        sequence: 0,
    };
    let handle = thread::spawn(move || -> Result<(), ServiceError> {
        let (stream, _) = listener.accept()?;
        server.serve(stream)
    });

    let result = drive(scn, cfg, sensor, clock, addr);
    let served = handle
        .join()
        .map_err(|_| ServiceError::Server("server thread panicked".into()))?;
    let report = result?;
    served?;
    Ok(report)
}

fn drive(
    scn: &Scenario,
    cfg: &BenchConfig,
    sensor: SensorId,
    clock: Arc<dyn Clock>,
    addr: std::net::SocketAddr,
) -> Result<BenchReport, ServiceError> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let mut conn = StreamConn::new(stream);
    let mut frames = FrameCache {
        scn,
        sensor,
        frames: vec![None; scn.duration as usize],
    };
    let fov = scn.tracking_sensor().fov;
    let start_box = {
        let b = scn.target(scn.tracked_target).expect("validated").bbox_at(0);
        BoundingBox::new(b.x - fov.x, b.y - fov.y, b.w, b.h)
    };

    let mut table = ApdexTable::default();
    let mut timers = Vec::new();
    let mut seq = 0u64;
    let mut frame_index = 0u64;
    for &kind in &cfg.kinds {
        for i in 0..cfg.samples {
            let verb = match kind {
                RequestKind::Detect => CommandVerb::StartDetect,
                RequestKind::Track => CommandVerb::StartTrack,
            };
            // Tracking restarts from the operator's box whenever the frames wrap.
            let target = (kind == RequestKind::Track && (i == 0 || frame_index.is_multiple_of(scn.duration)))
                .then_some(start_box);
            let frame = frames.get(frame_index)?.clone();
            frame_index += 1;

            let t0 = clock.now_s();
            conn.send(&Message::new(seq, sensor, Payload::Frame(frame)))?;
            conn.send(&Message::new(
                seq + 1,
                sensor,
                Payload::Command(Command { verb, target }),
            ))?;
            seq += 2;
            let reply = conn.recv()?;
            let t1 = clock.now_s();

            let mut timer = RequestTimer::new(kind.label(), t0, t1, cfg.threshold_s)?;
            if !matches!(reply.payload, Payload::Detections(_)) {
                timer = timer.mark_failed();
            }
            table.record(kind.label(), classify_request(&timer));
            timers.push(timer);
        }
    }
    conn.get_ref().shutdown(Shutdown::Write)?;
    Ok(BenchReport { table, timers })
}
