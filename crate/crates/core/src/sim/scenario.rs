//! Scenario description, loaded from TOML.
//!
//! ```toml
//! name = "handover_basic"
//! seed = 7
//! duration = 80            # frames
//! frame_rate = 10          # Hz
//! tracked_target = 1       # world target the tracking sensor starts on
//! expected_assistant = 2   # optional ground truth for benchmarks
//! geo_origin = { lat = 50.0, lon = 8.0 }
//!
//! [[targets]]
//! id = 1
//! size = [16, 40]
//! waypoints = [[0, 160, 120], [80, 560, 120]]   # [frame, x, y] of the box centre
//! appearance = { segments = [{ fraction = 0.5, color = [200, 40, 40] }, { fraction = 0.5, color = [40, 40, 200] }] }
//!
//! [[sensors]]
//! id = 1
//! role = "tracking"
//! fov = [0, 0, 320, 240]   # world pixels x, y, width, height
//! geo = { lat = 50.0, lon = 8.0 }
//! ```
//!
//! Optional tables: `[handover]`, `[noise]`, `[features]`, `[[links]]`,
//! `[[lighting]]`. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::detection::{BoundingBox, GroundTruth, NoiseConfig, ScenarioState, SensorView, LABEL_PERSON};
use crate::features::FeatureConfig;
use crate::types::{GeoPoint, Rect, SensorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Tracking,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Wireless,
    Usb,
    Wifi,
    Hdmi,
}

impl LinkKind {
    /// Fixed one-way delay in seconds.
    pub fn base_latency_s(self) -> f64 {
        match self {
            LinkKind::Wireless => 0.020,
            LinkKind::Wifi => 0.008,
            LinkKind::Usb => 0.001,
            LinkKind::Hdmi => 0.002,
        }
    }

    /// Throughput in bits per second.
    pub fn bandwidth_bps(self) -> f64 {
        match self {
            LinkKind::Wireless => 20e6,
            LinkKind::Wifi => 100e6,
            LinkKind::Usb => 480e6,
            LinkKind::Hdmi => 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    /// Share of the box height, top to bottom.
    pub fraction: f64,
    pub color: [u8; 3],
}

/// Colour-segment texture of a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Appearance {
    pub segments: Vec<Segment>,
    /// Half-range of the checker modulation in grey levels.
    #[serde(default = "default_texture")]
    pub texture: f64,
}

fn default_texture() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub id: u32,
    #[serde(default)]
    pub label: u16,
    /// Box width and height in pixels.
    pub size: [f64; 2],
    pub appearance: Appearance,
    /// `[frame, x, y]` of the box centre; linear in between, held outside.
    pub waypoints: Vec<[f64; 3]>,
}

impl TargetSpec {
    pub fn center_at(&self, frame: f64) -> (f64, f64) {
        let w = &self.waypoints;
        if frame <= w[0][0] {
            return (w[0][1], w[0][2]);
        }
        for pair in w.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if frame <= b[0] {
                let s = (frame - a[0]) / (b[0] - a[0]);
                return (a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2]));
            }
        }
        let last = w[w.len() - 1];
        (last[1], last[2])
    }

    pub fn bbox_at(&self, frame: u64) -> BoundingBox {
        let (x, y) = self.center_at(frame as f64);
        BoundingBox::new(x, y, self.size[0], self.size[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub id: SensorId,
    pub role: Role,
    pub fov: Rect,
    pub geo: GeoPoint,
    /// Metres.
    #[serde(default = "default_altitude")]
    pub altitude: f64,
}

fn default_altitude() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: SensorId,
    pub b: SensorId,
    pub kind: LinkKind,
}

/// Multiplies every pixel whose world position falls inside `rect` by `gain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightingZone {
    pub rect: Rect,
    pub gain: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandoverConfig {
    /// Forward-match cosine threshold.
    pub threshold: f64,
    pub top_k: usize,
    /// Frames the coordinator collects scores before deciding.
    pub window_frames: u64,
    /// Frames after an aborted episode before the tracker may ask again.
    pub cooldown_frames: u64,
    /// Distance from the FoV border, in pixels, that triggers a request.
    pub edge_margin: f64,
    /// Gallery entries are added every this many frames.
    pub gallery_stride: u64,
    pub max_match_dist: f64,
    pub max_missed: u32,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        HandoverConfig {
            threshold: crate::reid::DEFAULT_THRESHOLD,
            top_k: crate::reid::DEFAULT_TOP_K,
            window_frames: 20,
            cooldown_frames: 10,
            edge_margin: 24.0,
            gallery_stride: 2,
            max_match_dist: 40.0,
            max_missed: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub duration: u64,
    pub frame_rate: u32,
    pub tracked_target: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_assistant: Option<SensorId>,
    /// Geo position of world pixel (0, 0); x grows east, y grows south.
    pub geo_origin: GeoPoint,
    #[serde(default = "default_mpp")]
    pub metres_per_pixel: f64,
    #[serde(default)]
    pub handover: HandoverConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    pub targets: Vec<TargetSpec>,
    pub sensors: Vec<SensorSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub lighting: Vec<LightingZone>,
}

fn default_mpp() -> f64 {
    0.05
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SimError::ScenarioInvalid(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SimError::ScenarioMissing(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            SimError::ScenarioInvalid(m) => SimError::ScenarioInvalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn sensor(&self, id: SensorId) -> Option<&SensorSpec> {
        self.sensors.iter().find(|s| s.id == id)
    }

    pub fn tracking_sensor(&self) -> &SensorSpec {
        self.sensors
            .iter()
            .find(|s| s.role == Role::Tracking)
            .expect("validated scenario has a tracking sensor")
    }

    pub fn target(&self, id: u32) -> Option<&TargetSpec> {
        self.targets.iter().find(|t| t.id == id)
    }

    /// Link kind between a sensor and the coordinator; wireless when unlisted.
    pub fn link_kind(&self, a: SensorId, b: SensorId) -> LinkKind {
        self.links
            .iter()
            .find(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
            .map(|l| l.kind)
            .unwrap_or(LinkKind::Wireless)
    }

    pub fn state_at(&self, frame: u64) -> ScenarioState {
        ScenarioState {
            frame_index: frame,
            sensors: self
                .sensors
                .iter()
                .map(|s| SensorView { id: s.id, fov: s.fov })
                .collect(),
            targets: self
                .targets
                .iter()
                .map(|t| GroundTruth {
                    id: t.id,
                    label: t.label,
                    bbox: t.bbox_at(frame),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::ScenarioInvalid(m));
        if self.duration == 0 {
            return bad("duration must be at least one frame".into());
        }
        if self.frame_rate == 0 {
            return bad("frame_rate must be positive".into());
        }
        if !self.geo_origin.is_valid() || !(self.metres_per_pixel > 0.0) {
            return bad("geo_origin out of range or metres_per_pixel not positive".into());
        }
        let trackers = self.sensors.iter().filter(|s| s.role == Role::Tracking).count();
        if trackers != 1 {
            return bad(format!("exactly one tracking sensor required, found {trackers}"));
        }
        let mut ids = BTreeSet::new();
        for s in &self.sensors {
            if s.id.is_coordinator() {
                return bad("sensor id 0 is reserved for the coordinator".into());
            }
            if !ids.insert(s.id) {
                return bad(format!("duplicate sensor id {}", s.id.0));
            }
            if !(s.fov.width >= 1.0 && s.fov.height >= 1.0) {
                return bad(format!("sensor {} has an empty field of view", s.id.0));
            }
            if s.fov.width > 4096.0 || s.fov.height > 4096.0 {
                return bad(format!("sensor {} field of view exceeds 4096 pixels", s.id.0));
            }
            if !s.geo.is_valid() {
                return bad(format!("sensor {} geo anchor out of range", s.id.0));
            }
        }
        for l in &self.links {
            for end in [l.a, l.b] {
                if !end.is_coordinator() && !ids.contains(&end) {
                    return bad(format!("link references unknown node {}", end.0));
                }
            }
        }
        let mut tids = BTreeSet::new();
        for t in &self.targets {
            if !tids.insert(t.id) {
                return bad(format!("duplicate target id {}", t.id));
            }
            if !(t.size[0] >= 2.0 && t.size[1] >= 2.0) {
                return bad(format!("target {} is smaller than 2x2", t.id));
            }
            if t.appearance.segments.is_empty() || t.appearance.segments.iter().any(|s| !(s.fraction > 0.0)) {
                return bad(format!("target {} needs segments with positive fractions", t.id));
            }
            let w = &t.waypoints;
            if w.is_empty() {
                return bad(format!("target {} has no waypoints", t.id));
            }
            if w.windows(2).any(|p| !(p[1][0] > p[0][0])) {
                return bad(format!("target {} waypoint frames must increase", t.id));
            }
            if w[0][0] > 0.0 || w[w.len() - 1][0] < (self.duration - 1) as f64 {
                return bad(format!("target {} trajectory does not cover [0, duration)", t.id));
            }
        }
        for z in &self.lighting {
            if z.gain.iter().any(|g| !(*g >= 0.0)) {
                return bad("lighting gains must be nonnegative".into());
            }
        }
        let h = &self.handover;
        if !(0.0..=1.0).contains(&h.threshold) || h.top_k == 0 || h.window_frames == 0 || h.gallery_stride == 0 {
            return bad("handover: threshold in [0,1], top_k, window_frames, gallery_stride >= 1".into());
        }
        if !(h.max_match_dist > 0.0) || h.edge_margin < 0.0 {
            return bad("handover: max_match_dist must be positive, edge_margin nonnegative".into());
        }
        self.features
            .validate()
            .map_err(|e| SimError::ScenarioInvalid(e.to_string()))?;
        let tracker = self.tracking_sensor();
        let Some(target) = self.target(self.tracked_target) else {
            return bad(format!("tracked_target {} is not a target", self.tracked_target));
        };
        let (cx, cy) = target.center_at(0.0);
        if !tracker.fov.contains(cx, cy) {
            return bad("tracked_target is not inside the tracking sensor's view at frame 0".into());
        }
        if let Some(a) = self.expected_assistant {
            if self.sensor(a).map(|s| s.role) != Some(Role::Assistant) {
                return bad(format!("expected_assistant {} is not an assistant", a.0));
            }
        }
        Ok(())
    }
}

/// A one-assistant scenario used by tests and docs: the target walks right
/// out of the tracking view into the assistant's view.
pub fn demo_scenario() -> Scenario {
    let seg = |fraction: f64, color: [u8; 3]| Segment { fraction, color };
    Scenario {
        name: "demo".into(),
        seed: 1,
        duration: 90,
        frame_rate: 10,
        tracked_target: 1,
        expected_assistant: Some(SensorId(2)),
        geo_origin: GeoPoint::new(50.0, 8.0),
        metres_per_pixel: 0.05,
        handover: HandoverConfig::default(),
        noise: NoiseConfig::default(),
        features: FeatureConfig::default(),
        targets: vec![TargetSpec {
            id: 1,
            label: LABEL_PERSON,
            size: [18.0, 44.0],
            appearance: Appearance {
                segments: vec![
                    seg(0.2, [230, 190, 160]),
                    seg(0.4, [200, 30, 40]),
                    seg(0.4, [30, 50, 160]),
                ],
                texture: 10.0,
            },
            waypoints: vec![[0.0, 200.0, 120.0], [89.0, 556.0, 120.0]],
        }],
        sensors: vec![
            SensorSpec {
                id: SensorId(1),
                role: Role::Tracking,
                fov: Rect::new(0.0, 0.0, 320.0, 240.0),
                geo: GeoPoint::new(50.0, 8.0),
                altitude: 30.0,
            },
            SensorSpec {
                id: SensorId(2),
                role: Role::Assistant,
                fov: Rect::new(300.0, 0.0, 320.0, 240.0),
                geo: GeoPoint::new(50.0, 8.0002),
                altitude: 30.0,
            },
        ],
        links: vec![],
        lighting: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_is_valid_and_roundtrips_through_toml() {
        let s = demo_scenario();
        s.validate().unwrap();
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn piecewise_linear_positions() {
        let mut t = demo_scenario().targets[0].clone();
        t.waypoints = vec![[0.0, 0.0, 0.0], [10.0, 100.0, 50.0], [20.0, 100.0, 150.0]];
        assert_eq!(t.center_at(0.0), (0.0, 0.0));
        assert_eq!(t.center_at(5.0), (50.0, 25.0));
        assert_eq!(t.center_at(15.0), (100.0, 100.0));
        assert_eq!(t.center_at(99.0), (100.0, 150.0));
    }

    fn invalid(edit: impl FnOnce(&mut Scenario)) -> String {
        let mut s = demo_scenario();
        edit(&mut s);
        match s.validate() {
            Err(SimError::ScenarioInvalid(m)) => m,
            other => panic!("expected ScenarioInvalid, got {other:?}"),
        }
    }

    #[test]
    fn validation_errors() {
        assert!(invalid(|s| s.sensors[1].role = Role::Tracking).contains("exactly one"));
        assert!(invalid(|s| s.sensors[1].id = SensorId(1)).contains("duplicate sensor"));
        assert!(invalid(|s| s.sensors[1].id = SensorId(0)).contains("reserved"));
        assert!(invalid(|s| s.targets[0].waypoints = vec![[0.0, 1.0, 1.0]]).contains("cover"));
        assert!(invalid(|s| s.tracked_target = 9).contains("tracked_target"));
        assert!(invalid(|s| s.targets[0].waypoints[0][1] = 900.0).contains("inside"));
        assert!(invalid(|s| s.expected_assistant = Some(SensorId(1))).contains("expected_assistant"));
        assert!(invalid(|s| s.duration = 0).contains("duration"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = demo_scenario()
            .to_toml()
            .replace("frame_rate = 10", "frame_rate = 10\nfps = 3");
        assert!(matches!(Scenario::from_toml(&text), Err(SimError::ScenarioInvalid(_))));
    }

    #[test]
    fn missing_file() {
        let err = Scenario::load(Path::new("/nonexistent/x.toml")).unwrap_err();
        assert!(matches!(err, SimError::ScenarioMissing(m) if m.contains("/nonexistent/x.toml")));
    }
}
