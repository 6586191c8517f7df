use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Square 2-D FFT built from row transforms and transposes.
#[derive(Clone)]
pub(crate) struct Fft2d {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2d").field("size", &self.size).finish()
    }
}

impl Fft2d {
    pub(crate) fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2d {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    fn transpose(&self, buf: &mut [Complex64]) {
        let n = self.size;
        for r in 0..n {
            for c in r + 1..n {
                buf.swap(r * n + c, c * n + r);
            }
        }
    }

    fn run(&self, fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        fft.process(buf);
        self.transpose(buf);
        fft.process(buf);
        self.transpose(buf);
    }

    /// Unnormalised forward transform, in place.
    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.run(&self.forward, buf);
    }

    /// Inverse transform scaled by `1/N`, in place.
    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.run(&self.inverse, buf);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    pub(crate) fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }
}
