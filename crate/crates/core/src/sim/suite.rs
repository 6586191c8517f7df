//! Seeded re-identification benchmark scenarios.
//!
//! Layout shared by every generated scenario: the tracker `s1` watches
//! `[0, 320) x [0, 240)`; one assistant watches the strip east of it, the
//! other the strip south of it. Which of the two ids sits east is drawn per
//! scenario. The target walks east out of the tracker's view into the east
//! assistant's view.
//!
//! The adversarial kind adds a look-alike of the target standing in the
//! south assistant's view, a crowd of look-alikes of that distractor in the
//! tracker's view, and a lighting cast over the east assistant's view.

use rand::seq::SliceRandom;
use rand::Rng;

use super::scenario::{Appearance, HandoverConfig, LightingZone, Role, Scenario, Segment, SensorSpec, TargetSpec};
use crate::detection::{NoiseConfig, LABEL_PERSON};
use crate::features::FeatureConfig;
use crate::rng::{mix, stream};
use crate::types::{GeoPoint, Rect, SensorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteKind {
    /// Distractors, crowd and lighting shift.
    Adversarial,
    /// Target only.
    Clean,
}

const CROWD: usize = 28;
const DURATION: u64 = 60;
const D_SHIFT: (f64, f64) = (12.0, 20.0);
const CROWD_HUE: f64 = 2.0;
const CROWD_SV: f64 = 0.03;
const GAIN: (f64, f64) = (0.65, 0.8);
const CAST: (f64, f64) = (1.0, 1.1);

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|u| ((u + m) * 255.0).round() as u8)
}

fn person(id: u32, head: [u8; 3], top: [u8; 3], bottom: [u8; 3], waypoints: Vec<[f64; 3]>) -> TargetSpec {
    TargetSpec {
        id,
        label: LABEL_PERSON,
        size: [18.0, 44.0],
        appearance: Appearance {
            segments: vec![
                Segment {
                    fraction: 0.2,
                    color: head,
                },
                Segment {
                    fraction: 0.4,
                    color: top,
                },
                Segment {
                    fraction: 0.4,
                    color: bottom,
                },
            ],
            texture: 8.0,
        },
        waypoints,
    }
}

fn still(x: f64, y: f64) -> Vec<[f64; 3]> {
    vec![[0.0, x, y], [(DURATION - 1) as f64, x, y]]
}

/// Builds scenario `index` of a suite.
pub fn generate_scenario(kind: SuiteKind, base_seed: u64, index: u32) -> Scenario {
    let seed = mix(base_seed, &[index as u64, kind as u64]);
    let mut rng = stream(seed);
    let skin = hsv_to_rgb(
        rng.random_range(15.0..35.0),
        rng.random_range(0.25..0.5),
        rng.random_range(0.7..0.95),
    );

    let top_h: f64 = rng.random_range(0.0..360.0);
    let bottom_h = top_h + rng.random_range(120.0..240.0);
    let (top_s, top_v) = (rng.random_range(0.6..0.9), rng.random_range(0.6..0.9));
    let (bottom_s, bottom_v) = (rng.random_range(0.6..0.9), rng.random_range(0.4..0.7));
    let top = hsv_to_rgb(top_h, top_s, top_v);
    let bottom = hsv_to_rgb(bottom_h, bottom_s, bottom_v);

    let mut ids = [SensorId(2), SensorId(3)];
    ids.shuffle(&mut rng);
    let (east, south) = (ids[0], ids[1]);

    let speed = rng.random_range(3.5..4.5);
    let y0 = rng.random_range(40.0..60.0);
    let x0 = rng.random_range(180.0..220.0);
    let x_end = x0 + speed * (DURATION - 1) as f64;
    let mut targets = vec![person(
        1,
        skin,
        top,
        bottom,
        vec![[0.0, x0, y0], [(DURATION - 1) as f64, x_end, y0]],
    )];
    let mut lighting = Vec::new();

    if kind == SuiteKind::Adversarial {
        // Look-alike: same trousers, shirt hue nudged.
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let d_top_h = top_h + sign * rng.random_range(D_SHIFT.0..D_SHIFT.1);
        let d_top = hsv_to_rgb(d_top_h, top_s, top_v);
        let d_x = rng.random_range(100.0..220.0);
        let d_y = 300.0 + rng.random_range(80.0..160.0);
        targets.push(person(2, skin, d_top, bottom, still(d_x, d_y)));
        // Crowd of look-alikes of the distractor in the tracker's view.
        let jitter =
            |rng: &mut rand_chacha::ChaCha8Rng, v: f64| (v + rng.random_range(-CROWD_SV..CROWD_SV)).clamp(0.0, 1.0);
        for i in 0..CROWD {
            let row = (i / 14) as f64;
            let col = (i % 14) as f64;
            let c_top = hsv_to_rgb(
                d_top_h + rng.random_range(-CROWD_HUE..CROWD_HUE),
                jitter(&mut rng, top_s),
                jitter(&mut rng, top_v),
            );
            let c_bottom = hsv_to_rgb(
                bottom_h + rng.random_range(-CROWD_HUE..CROWD_HUE),
                jitter(&mut rng, bottom_s),
                jitter(&mut rng, bottom_v),
            );
            targets.push(person(
                10 + i as u32,
                skin,
                c_top,
                c_bottom,
                still(16.0 + col * 20.0, 162.0 + row * 50.0),
            ));
        }
        let g = rng.random_range(GAIN.0..GAIN.1);
        let gain = [g, g, g * rng.random_range(CAST.0..CAST.1)];
        lighting.push(LightingZone {
            rect: Rect::new(300.0, 0.0, 320.0, 240.0),
            gain,
        });
    }

    let sensor = |id: SensorId, role: Role, fov: Rect, dlon: f64| SensorSpec {
        id,
        role,
        fov,
        geo: GeoPoint::new(50.0, 8.0 + dlon),
        altitude: 30.0,
    };
    Scenario {
        name: format!(
            "{}_{index:03}",
            match kind {
                SuiteKind::Adversarial => "reid",
                SuiteKind::Clean => "clean",
            }
        ),
        seed,
        duration: DURATION,
        frame_rate: 10,
        tracked_target: 1,
        expected_assistant: Some(east),
        geo_origin: GeoPoint::new(50.0, 8.0),
        metres_per_pixel: 0.05,
        handover: HandoverConfig {
            edge_margin: 40.0,
            ..HandoverConfig::default()
        },
        noise: NoiseConfig::default(),
        features: FeatureConfig::default(),
        targets,
        sensors: vec![
            sensor(SensorId(1), Role::Tracking, Rect::new(0.0, 0.0, 320.0, 240.0), 0.0),
            sensor(east, Role::Assistant, Rect::new(300.0, 0.0, 320.0, 240.0), 0.0003),
            sensor(south, Role::Assistant, Rect::new(0.0, 300.0, 320.0, 240.0), 0.0001),
        ]
        .into_iter()
        .fold(Vec::new(), |mut v, s| {
            v.push(s);
            v.sort_by_key(|s| s.id);
            v
        }),
        links: vec![],
        lighting,
    }
}

/// Seed of the checked-in suites under `scenarios/`.
pub const BUNDLED_SUITE_SEED: u64 = 2024;
/// Size of the checked-in adversarial suite.
pub const BUNDLED_ADVERSARIAL_COUNT: u32 = 50;
/// Size of the checked-in clean suite.
pub const BUNDLED_CLEAN_COUNT: u32 = 20;

pub fn generate_suite(kind: SuiteKind, base_seed: u64, count: u32) -> Vec<Scenario> {
    (0..count).map(|i| generate_scenario(kind, base_seed, i)).collect()
}
