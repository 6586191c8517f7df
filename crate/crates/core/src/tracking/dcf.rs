//! Discriminative correlation filter.
//!
//! Closed-form ridge regression in the frequency domain:
//! `numerator = conj(X) * Y`, `denominator = sum_c conj(X_c) * X_c`, and the
//! response to a new patch `Z` is `IFFT(sum_c Z_c * numerator_c / (denominator + lambda))`.
//! `Y` is the transform of a Gaussian label peaked at the template centre, so a
//! response peak at the centre means the target did not move.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use super::fft2d::Fft2d;
use super::TrackingError;
use crate::detection::BoundingBox;
use crate::imaging::Frame;

#[derive(Debug, Clone, PartialEq)]
pub struct DcfHyper {
    /// Ridge regularisation.
    pub lambda: f64,
    /// Exponential moving average rate for numerator and denominator.
    pub online_lr: f64,
    /// Label standard deviation as a fraction of `sqrt(target_w * target_h)`.
    pub gaussian_bandwidth: f64,
    /// Scale pyramid searched on every update; must contain 1.0.
    pub scales: Vec<f64>,
    /// Patch side relative to the target side.
    pub padding: f64,
    /// Peak responses below this report [`TrackingError::TargetLost`].
    pub loss_threshold: f64,
    /// Multiplier applied to the peak of every scale other than 1.0.
    pub scale_penalty: f64,
    /// Template side in pixels, a power of two.
    pub template_size: usize,
}

impl Default for DcfHyper {
    fn default() -> Self {
        DcfHyper {
            lambda: 1e-4,
            online_lr: 0.008,
            gaussian_bandwidth: 0.1,
            scales: vec![1.0 / 1.03, 1.0, 1.03],
            padding: 2.0,
            loss_threshold: 0.05,
            scale_penalty: 0.9925,
            template_size: 64,
        }
    }
}

impl DcfHyper {
    pub fn validate(&self) -> Result<(), TrackingError> {
        let bad = |m: &str| Err(TrackingError::InvalidHyper(m.to_string()));
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.online_lr > 0.0 && self.online_lr <= 1.0) {
            return bad("online_lr must lie in (0, 1]");
        }
        if !(self.gaussian_bandwidth > 0.0) {
            return bad("gaussian_bandwidth must be positive");
        }
        if !self.scales.contains(&1.0) || self.scales.iter().any(|&s| !(s > 0.0)) {
            return bad("scales must be positive and contain 1.0");
        }
        if !(self.padding >= 1.0) {
            return bad("padding must be >= 1");
        }
        if !self.template_size.is_power_of_two() || self.template_size < 4 {
            return bad("template_size must be a power of two >= 4");
        }
        Ok(())
    }
}

/// Maps a grey patch to feature channels. The default is one intensity channel.
pub trait ChannelExtractor: Send + Sync + std::fmt::Debug {
    fn channels(&self) -> usize;
    /// `patch` is `size x size` luma; returns `channels()` planes of the same size.
    fn extract(&self, patch: &[f64], size: usize) -> Vec<Vec<f64>>;
}

/// Mean-subtracted luma in grey levels.
#[derive(Debug, Clone, Copy, Default)]
pub struct GrayIntensity;

impl ChannelExtractor for GrayIntensity {
    fn channels(&self) -> usize {
        1
    }

    fn extract(&self, patch: &[f64], _size: usize) -> Vec<Vec<f64>> {
        let mean = patch.iter().sum::<f64>() / patch.len() as f64;
        vec![patch.iter().map(|v| v - mean).collect()]
    }
}

pub fn gaussian_sigma(bandwidth_fraction: f64, target_size: (f64, f64)) -> f64 {
    bandwidth_fraction * (target_size.0 * target_size.1).sqrt()
}

/// `size x size` Gaussian with peak 1 at `(size/2, size/2)`.
pub fn gaussian_label(size: usize, bandwidth_fraction: f64, target_size: (f64, f64)) -> Vec<f64> {
    let sigma = gaussian_sigma(bandwidth_fraction, target_size);
    let c = (size / 2) as f64;
    let denom = 2.0 * sigma * sigma;
    (0..size * size)
        .map(|i| {
            let dy = (i / size) as f64 - c;
            let dx = (i % size) as f64 - c;
            (-(dx * dx + dy * dy) / denom).exp()
        })
        .collect()
}

/// Separable raised-cosine window, 1 at the centre.
pub fn hann_window(size: usize) -> Vec<f64> {
    let w1: Vec<f64> = (0..size)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / size as f64).cos())
        .collect();
    (0..size * size).map(|i| w1[i / size] * w1[i % size]).collect()
}

/// Luma plane of a frame, kept alongside its dimensions for sampling.
struct LumaPlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl LumaPlane {
    fn new(frame: &Frame) -> Self {
        LumaPlane {
            width: frame.width() as usize,
            height: frame.height() as usize,
            data: frame.luma(),
        }
    }

    fn at(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let top = self.at(xi, yi) * (1.0 - fx) + self.at(xi + 1, yi) * fx;
        let bottom = self.at(xi, yi + 1) * (1.0 - fx) + self.at(xi + 1, yi + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Samples a `size x size` grid over a `patch_w x patch_h` region; grid
    /// index `size/2` lands exactly on `center`.
    fn sample(&self, center: (f64, f64), patch: (f64, f64), size: usize) -> Vec<f64> {
        let sx = patch.0 / size as f64;
        let sy = patch.1 / size as f64;
        let half = (size / 2) as f64;
        let mut out = Vec::with_capacity(size * size);
        for v in 0..size {
            let y = center.1 + (v as f64 - half) * sy;
            for u in 0..size {
                let x = center.0 + (u as f64 - half) * sx;
                out.push(self.bilinear(x, y));
            }
        }
        out
    }
}

/// Single-target correlation filter state.
#[derive(Debug, Clone)]
pub struct DcfModel {
    pub template_size: usize,
    /// One plane per feature channel.
    pub numerator: Vec<Vec<Complex64>>,
    pub denominator: Vec<Complex64>,
    pub target_size: (f64, f64),
    pub center: (f64, f64),
    pub hyper: DcfHyper,
    label_hat: Vec<Complex64>,
    window: Vec<f64>,
    fft: Fft2d,
    extractor: Arc<dyn ChannelExtractor>,
    last_peak: f64,
}

/// Initialises a grey-intensity filter on `bbox` (pixel units).
pub fn dcf_init(frame: &Frame, bbox: &BoundingBox, hyper: DcfHyper) -> Result<DcfModel, TrackingError> {
    DcfModel::new(frame, bbox, hyper, Arc::new(GrayIntensity))
}

impl DcfModel {
    pub fn new(
        frame: &Frame,
        bbox: &BoundingBox,
        hyper: DcfHyper,
        extractor: Arc<dyn ChannelExtractor>,
    ) -> Result<Self, TrackingError> {
        hyper.validate()?;
        crate::imaging::clamp_box(bbox, frame.width(), frame.height()).map_err(|_| TrackingError::EmptyIntersection)?;
        if !(bbox.w > 0.0 && bbox.h > 0.0) {
            return Err(TrackingError::EmptyIntersection);
        }
        let t = hyper.template_size;
        let target_in_template = (t as f64 / hyper.padding, t as f64 / hyper.padding);
        let label = gaussian_label(t, hyper.gaussian_bandwidth, target_in_template);
        let fft = Fft2d::new(t);
        let label_hat = fft.forward_real(&label);
        let mut model = DcfModel {
            template_size: t,
            numerator: Vec::new(),
            denominator: Vec::new(),
            target_size: (bbox.w, bbox.h),
            center: (bbox.x, bbox.y),
            hyper,
            label_hat,
            window: hann_window(t),
            fft,
            extractor,
            last_peak: 1.0,
        };
        let luma = LumaPlane::new(frame);
        let (num, den) = model.train_terms(&luma, model.center, model.target_size);
        model.numerator = num;
        model.denominator = den;
        Ok(model)
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::new(self.center.0, self.center.1, self.target_size.0, self.target_size.1)
    }

    /// Peak response of the most recent update.
    pub fn last_peak(&self) -> f64 {
        self.last_peak
    }

    fn patch_size(&self, target: (f64, f64), scale: f64) -> (f64, f64) {
        (
            target.0 * self.hyper.padding * scale,
            target.1 * self.hyper.padding * scale,
        )
    }

    /// Windowed feature planes in the frequency domain.
    fn features_hat(&self, luma: &LumaPlane, center: (f64, f64), patch: (f64, f64)) -> Vec<Vec<Complex64>> {
        let t = self.template_size;
        let raw = luma.sample(center, patch, t);
        self.extractor
            .extract(&raw, t)
            .into_iter()
            .map(|plane| {
                let windowed: Vec<f64> = plane.iter().zip(&self.window).map(|(v, w)| v * w).collect();
                self.fft.forward_real(&windowed)
            })
            .collect()
    }

    fn train_terms(
        &self,
        luma: &LumaPlane,
        center: (f64, f64),
        target: (f64, f64),
    ) -> (Vec<Vec<Complex64>>, Vec<Complex64>) {
        let x_hat = self.features_hat(luma, center, self.patch_size(target, 1.0));
        let n = self.template_size * self.template_size;
        let mut den = vec![Complex64::new(0.0, 0.0); n];
        let num = x_hat
            .iter()
            .map(|xc| {
                for (d, x) in den.iter_mut().zip(xc) {
                    *d += x.conj() * x;
                }
                xc.iter().zip(&self.label_hat).map(|(x, y)| x.conj() * y).collect()
            })
            .collect();
        (num, den)
    }

    /// Complex response map for a patch of `scale` times the current size.
    /// The real part is the correlation score.
    pub fn response(&self, frame: &Frame, scale: f64) -> Vec<Complex64> {
        self.response_on(&LumaPlane::new(frame), scale)
    }

    fn response_on(&self, luma: &LumaPlane, scale: f64) -> Vec<Complex64> {
        let z_hat = self.features_hat(luma, self.center, self.patch_size(self.target_size, scale));
        let lambda = self.hyper.lambda;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.template_size * self.template_size];
        for (zc, nc) in z_hat.iter().zip(&self.numerator) {
            for ((a, z), (num, den)) in acc.iter_mut().zip(zc).zip(nc.iter().zip(&self.denominator)) {
                *a += z * num / (den + lambda);
            }
        }
        self.fft.inverse(&mut acc);
        acc
    }

    /// Exponential moving average towards new terms: `lr = 1` replaces, `lr = 0` keeps.
    pub fn blend(&mut self, numerator: &[Vec<Complex64>], denominator: &[Complex64], lr: f64) {
        for (old, new) in self.numerator.iter_mut().zip(numerator) {
            for (o, n) in old.iter_mut().zip(new) {
                *o = *o * (1.0 - lr) + n * lr;
            }
        }
        for (o, n) in self.denominator.iter_mut().zip(denominator) {
            *o = *o * (1.0 - lr) + n * lr;
        }
    }

    /// Locates the target in `frame`, then adapts the filter.
    ///
    /// Every configured scale is scored; the best (penalised) peak decides
    /// the new centre and size. When the raw peak is below the loss
    /// threshold the model is left untouched.
    pub fn update(&mut self, frame: &Frame) -> Result<BoundingBox, TrackingError> {
        let luma = LumaPlane::new(frame);
        let t = self.template_size;
        let half = (t / 2) as f64;

        let mut best: Option<(f64, f64, f64, f64, f64)> = None; // (score, raw, scale, dx, dy)
        for &scale in &self.hyper.scales {
            let resp = self.response_on(&luma, scale);
            let (idx, raw) = resp
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.re))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            let (py, px) = (idx / t, idx % t);
            let at = |y: usize, x: usize| resp[(y % t) * t + (x % t)].re;
            let sub = |minus: f64, centre: f64, plus: f64| {
                let d = minus - 2.0 * centre + plus;
                if d < 0.0 {
                    (0.5 * (minus - plus) / d).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            };
            let ox = sub(at(py, px + t - 1), raw, at(py, px + 1));
            let oy = sub(at(py + t - 1, px), raw, at(py + 1, px));
            let score = if scale == 1.0 {
                raw
            } else {
                raw * self.hyper.scale_penalty
            };
            if best.is_none_or(|b| score > b.0) {
                best = Some((score, raw, scale, px as f64 + ox - half, py as f64 + oy - half));
            }
        }
        let (_, raw, scale, dx, dy) = best.expect("scale list is non-empty");
        self.last_peak = raw;
        if raw < self.hyper.loss_threshold {
            return Err(TrackingError::TargetLost {
                response: raw,
                threshold: self.hyper.loss_threshold,
            });
        }

        let patch = self.patch_size(self.target_size, scale);
        let cx = self.center.0 + dx * patch.0 / t as f64;
        let cy = self.center.1 + dy * patch.1 / t as f64;
        self.center = (
            cx.clamp(0.0, luma.width as f64 - 1.0),
            cy.clamp(0.0, luma.height as f64 - 1.0),
        );
        self.target_size = (
            (self.target_size.0 * scale).max(2.0),
            (self.target_size.1 * scale).max(2.0),
        );

        let (num, den) = self.train_terms(&luma, self.center, self.target_size);
        let lr = self.hyper.online_lr;
        self.blend(&num, &den, lr);
        Ok(self.bbox())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Grey background with low-amplitude noise and a textured square.
    fn scene(w: u32, h: u32, square: BoundingBox, seed: u64) -> Frame {
        let (l, t, r, b) = square.corners();
        let mut px = Vec::with_capacity((w * h * 3) as usize);
        for y in 0..h {
            for x in 0..w {
                let n = (crate::rng::splitmix64(seed ^ ((y as u64) << 20) ^ x as u64) % 9) as i32 - 4;
                let inside = (x as f64) >= l && (x as f64) < r && (y as f64) >= t && (y as f64) < b;
                let v = if inside {
                    let cx = ((x as f64 - l) / 4.0) as i32;
                    let cy = ((y as f64 - t) / 4.0) as i32;
                    if (cx + cy) % 2 == 0 {
                        220
                    } else {
                        150
                    }
                } else {
                    90
                };
                let v = (v + n).clamp(0, 255) as u8;
                px.extend_from_slice(&[v, v, v]);
            }
        }
        Frame::rgb(w, h, px).unwrap()
    }

    #[test]
    fn label_shape() {
        let g = gaussian_label(64, 0.1, (32.0, 64.0));
        assert_eq!(g.len(), 64 * 64);
        assert_eq!(g[32 * 64 + 32], 1.0);
        assert!((gaussian_sigma(0.1, (32.0, 64.0)) - 2048f64.sqrt() * 0.1).abs() < 1e-12);
        assert!((gaussian_sigma(0.1, (32.0, 64.0)) - 4.5255).abs() < 1e-4);
        for i in 1..64 {
            for j in 1..64 {
                assert_eq!(g[i * 64 + j], g[(64 - i) * 64 + (64 - j)]);
            }
        }
    }

    #[test]
    fn label_mass_grows_with_bandwidth() {
        let mass = |bw: f64| gaussian_label(64, bw, (32.0, 32.0)).iter().sum::<f64>();
        assert!(mass(0.05) < mass(0.1));
        assert!(mass(0.1) < mass(0.2));
    }

    #[test]
    fn hyper_validation() {
        assert!(DcfHyper::default().validate().is_ok());
        let bad = [
            DcfHyper {
                lambda: 0.0,
                ..DcfHyper::default()
            },
            DcfHyper {
                online_lr: 0.0,
                ..DcfHyper::default()
            },
            DcfHyper {
                scales: vec![0.9, 1.1],
                ..DcfHyper::default()
            },
            DcfHyper {
                template_size: 48,
                ..DcfHyper::default()
            },
        ];
        for h in bad {
            assert!(h.validate().is_err(), "{h:?}");
        }
    }

    #[test]
    fn init_shapes_and_self_response() {
        let b = BoundingBox::new(80.0, 60.0, 24.0, 24.0);
        let f = scene(160, 120, b, 1);
        let m = dcf_init(&f, &b, DcfHyper::default()).unwrap();
        assert_eq!(m.numerator.len(), 1);
        assert_eq!(m.numerator[0].len(), 64 * 64);
        assert_eq!(m.denominator.len(), 64 * 64);
        let resp = m.response(&f, 1.0);
        let (idx, _) = resp.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |a, (i, c)| if c.re > a.1 { (i, c.re) } else { a },
        );
        assert_eq!((idx / 64, idx % 64), (32, 32));
    }

    #[test]
    fn closed_form_reproduces_label_on_training_patch() {
        let b = BoundingBox::new(80.0, 60.0, 24.0, 24.0);
        let f = scene(160, 120, b, 2);
        let m = dcf_init(&f, &b, DcfHyper::default()).unwrap();
        let resp = m.response(&f, 1.0);
        let label = gaussian_label(64, 0.1, (32.0, 32.0));
        let worst = resp
            .iter()
            .zip(&label)
            .map(|(r, l)| (r.re - l).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "max deviation {worst}");
        assert!(resp.iter().all(|c| c.im.abs() < 1e-9));
    }

    #[test]
    fn blend_boundaries() {
        let b = BoundingBox::new(80.0, 60.0, 24.0, 24.0);
        let f = scene(160, 120, b, 3);
        let g = scene(160, 120, BoundingBox::new(70.0, 50.0, 24.0, 24.0), 4);
        let m = dcf_init(&f, &b, DcfHyper::default()).unwrap();
        let other = dcf_init(&g, &b, DcfHyper::default()).unwrap();

        let mut keep = m.clone();
        keep.blend(&other.numerator, &other.denominator, 0.0);
        assert_eq!(keep.numerator, m.numerator);
        assert_eq!(keep.denominator, m.denominator);

        let mut replace = m.clone();
        replace.blend(&other.numerator, &other.denominator, 1.0);
        assert_eq!(replace.numerator, other.numerator);
        assert_eq!(replace.denominator, other.denominator);
    }

    #[test]
    fn static_target_does_not_drift() {
        let b = BoundingBox::new(80.0, 60.0, 24.0, 24.0);
        let mut m = dcf_init(&scene(160, 120, b, 10), &b, DcfHyper::default()).unwrap();
        for i in 0..10 {
            let out = m.update(&scene(160, 120, b, 11 + i)).unwrap();
            let drift = ((out.x - b.x).powi(2) + (out.y - b.y).powi(2)).sqrt();
            assert!(drift <= 1.0, "frame {i}: drift {drift}");
        }
    }

    #[test]
    fn init_outside_frame_fails() {
        let f = scene(64, 64, BoundingBox::new(32.0, 32.0, 8.0, 8.0), 1);
        let err = dcf_init(&f, &BoundingBox::new(500.0, 500.0, 8.0, 8.0), DcfHyper::default());
        assert_eq!(err.unwrap_err(), TrackingError::EmptyIntersection);
    }

    /// Sensor noise only (the same ±4 model as `scene`), no structure.
    /// Full-range noise is not covered: its peak tracks its contrast.
    #[test]
    fn noise_reports_target_lost() {
        let b = BoundingBox::new(80.0, 60.0, 24.0, 24.0);
        let mut m = dcf_init(&scene(160, 120, b, 10), &b, DcfHyper::default()).unwrap();
        let lost = (0..5u64).any(|k| {
            let px: Vec<u8> = (0..160 * 120u64)
                .flat_map(|i| {
                    let v = (124 + crate::rng::splitmix64(0xBAD ^ (k << 32) ^ i) % 9) as u8;
                    [v, v, v]
                })
                .collect();
            matches!(
                m.update(&Frame::rgb(160, 120, px).unwrap()),
                Err(TrackingError::TargetLost { .. })
            )
        });
        assert!(lost, "peak stayed at {}", m.last_peak());
    }
}
