//! Synthetic sensor footage.

use super::scenario::{Scenario, TargetSpec};
use super::SimError;
use crate::imaging::Frame;
use crate::rng::{mix, splitmix64};
use crate::types::SensorId;

const BACKGROUND_GREY: f64 = 105.0;

/// Uniform integer in `[-amp, amp]` from a hash.
fn signed_unit(h: u64, amp: f64) -> f64 {
    if amp <= 0.0 {
        return 0.0;
    }
    // 53 random bits to [0, 1).
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    ((2.0 * u - 1.0) * amp).round()
}

fn target_color(t: &TargetSpec, top: f64, height: f64, lx: i64, ly: i64, y: f64) -> [f64; 3] {
    let total: f64 = t.appearance.segments.iter().map(|s| s.fraction).sum();
    let rel = ((y - top) / height).clamp(0.0, 1.0) * total;
    let mut acc = 0.0;
    let mut color = t.appearance.segments.last().expect("validated").color;
    for s in &t.appearance.segments {
        acc += s.fraction;
        if rel < acc {
            color = s.color;
            break;
        }
    }
    let checker = if ((lx.div_euclid(3) + ly.div_euclid(3)) & 1) == 0 {
        1.0
    } else {
        -1.0
    };
    let m = checker * t.appearance.texture;
    [color[0] as f64 + m, color[1] as f64 + m, color[2] as f64 + m]
}

/// Rasterises what `sensor` sees at `frame_index`.
///
/// Static background texture keyed by world position and scenario seed, then
/// targets in id order (later ids on top), then lighting zones, then
/// per-frame sensor noise. The output depends only on the arguments.
pub fn render_sensor_view(scn: &Scenario, sensor: SensorId, frame_index: u64) -> Result<Frame, SimError> {
    let spec = scn.sensor(sensor).ok_or(SimError::UnknownSensor(sensor))?;
    let fov = spec.fov;
    let (w, h) = (fov.width as u32, fov.height as u32);
    let (ox, oy) = (fov.x.floor() as i64, fov.y.floor() as i64);
    let bg_seed = mix(scn.seed, &[0xB6]);
    let noise_seed = mix(scn.seed, &[0x5E, sensor.0 as u64, frame_index]);
    let bg_amp = scn.noise.background_amplitude;
    let sn_amp = scn.noise.sensor_noise;

    let mut rgb = vec![0f64; (w * h * 3) as usize];
    for v in 0..h as i64 {
        for u in 0..w as i64 {
            let (wx, wy) = (ox + u, oy + v);
            let cell =
                splitmix64(bg_seed ^ ((wx.div_euclid(4) as u64) << 32) ^ (wy.div_euclid(4) as u64 & 0xFFFF_FFFF));
            let g = BACKGROUND_GREY + signed_unit(cell, bg_amp);
            let i = ((v * w as i64 + u) * 3) as usize;
            rgb[i] = g;
            rgb[i + 1] = g;
            rgb[i + 2] = g;
        }
    }

    let mut targets: Vec<&TargetSpec> = scn.targets.iter().collect();
    targets.sort_by_key(|t| t.id);
    for t in targets {
        let b = t.bbox_at(frame_index);
        let (left, top, right, bottom) = b.corners();
        let x0 = (left.round() as i64 - ox).max(0);
        let x1 = (right.round() as i64 - ox).min(w as i64);
        let y0 = (top.round() as i64 - oy).max(0);
        let y1 = (bottom.round() as i64 - oy).min(h as i64);
        for v in y0..y1 {
            for u in x0..x1 {
                let (wx, wy) = (ox + u, oy + v);
                let c = target_color(
                    t,
                    top,
                    b.h,
                    wx - left.round() as i64,
                    wy - top.round() as i64,
                    wy as f64 + 0.5,
                );
                let i = ((v * w as i64 + u) * 3) as usize;
                rgb[i..i + 3].copy_from_slice(&c);
            }
        }
    }

    for zone in &scn.lighting {
        let x0 = ((zone.rect.x.floor() as i64) - ox).max(0);
        let x1 = ((zone.rect.right().ceil() as i64) - ox).min(w as i64);
        let y0 = ((zone.rect.y.floor() as i64) - oy).max(0);
        let y1 = ((zone.rect.bottom().ceil() as i64) - oy).min(h as i64);
        for v in y0..y1 {
            for u in x0..x1 {
                if !zone.rect.contains((ox + u) as f64, (oy + v) as f64) {
                    continue;
                }
                let i = ((v * w as i64 + u) * 3) as usize;
                for c in 0..3 {
                    rgb[i + c] *= zone.gain[c];
                }
            }
        }
    }

    let mut state = noise_seed;
    let pixels: Vec<u8> = rgb
        .chunks_exact(3)
        .flat_map(|p| {
            state = splitmix64(state);
            let n = signed_unit(state, sn_amp);
            [p[0], p[1], p[2]].map(|c| (c + n).round().clamp(0.0, 255.0) as u8)
        })
        .collect();
    Ok(Frame::rgb(w, h, pixels).expect("dimensions match"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::crop;
    use crate::sim::scenario::demo_scenario;

    #[test]
    fn deterministic() {
        let s = demo_scenario();
        let a = render_sensor_view(&s, SensorId(1), 3).unwrap();
        let b = render_sensor_view(&s, SensorId(1), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width(), a.height()), (320, 240));
        let c = render_sensor_view(&s, SensorId(1), 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unknown_sensor() {
        assert_eq!(
            render_sensor_view(&demo_scenario(), SensorId(9), 0),
            Err(SimError::UnknownSensor(SensorId(9)))
        );
    }

    #[test]
    fn target_outside_view_leaves_background_only() {
        let mut s = demo_scenario();
        let with = render_sensor_view(&s, SensorId(2), 0).unwrap();
        s.targets.clear();
        let without = render_sensor_view(&s, SensorId(2), 0).unwrap();
        assert_eq!(with, without);
        let max_dev = with
            .pixels()
            .iter()
            .map(|&p| (p as f64 - BACKGROUND_GREY).abs())
            .fold(0.0, f64::max);
        assert!(max_dev <= s.noise.background_amplitude + s.noise.sensor_noise);
    }

    #[test]
    fn crop_reproduces_prototype_up_to_noise() {
        let mut s = demo_scenario();
        s.noise.sensor_noise = 2.0;
        s.targets[0].appearance.texture = 0.0;
        let f = render_sensor_view(&s, SensorId(1), 0).unwrap();
        let b = s.targets[0].bbox_at(0);
        let c = crop(&f, &b).unwrap();
        assert_eq!((c.width(), c.height()), (18, 44));
        // Middle rows of each segment: head, shirt, trousers.
        for (row, proto) in [(4, [230, 190, 160]), (17, [200, 30, 40]), (35, [30, 50, 160])] {
            for x in 0..c.width() {
                let px = c.rgb_at(x, row);
                for ch in 0..3 {
                    assert!((px[ch] as i32 - proto[ch]).abs() <= 2, "row {row}: {px:?}");
                }
            }
        }
    }

    #[test]
    fn lighting_scales_pixels() {
        let mut s = demo_scenario();
        s.noise.sensor_noise = 0.0;
        let plain = render_sensor_view(&s, SensorId(1), 0).unwrap();
        s.lighting.push(crate::sim::scenario::LightingZone {
            rect: crate::types::Rect::new(0.0, 0.0, 10.0, 10.0),
            gain: [0.5, 1.0, 0.0],
        });
        let lit = render_sensor_view(&s, SensorId(1), 0).unwrap();
        let (p, q) = (plain.rgb_at(2, 2), lit.rgb_at(2, 2));
        assert_eq!(q[0], (p[0] as f64 * 0.5).round() as u8);
        assert_eq!(q[1], p[1]);
        assert_eq!(q[2], 0);
        assert_eq!(plain.rgb_at(20, 20), lit.rgb_at(20, 20));
    }
}
