//! Frames, the lossless `MLF1` codec and colour-space conversions.

mod codec;
mod color;
mod pnm;

pub use codec::{decode_frame, encode_frame, FrameCodec, Mlf1Codec, MLF1_HEADER_LEN, MLF1_MAGIC};
pub use color::{rgb_to_hsv, rgb_to_lab, HsvPixel, LabPixel};
pub use pnm::{decode_pnm, encode_pnm};

use thiserror::Error;

use crate::detection::BoundingBox;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImagingError {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("payload length mismatch: header declares {expected} bytes, found {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("box does not intersect the frame")]
    EmptyIntersection,
}

/// Pixel layout of a [`Frame`]. The discriminant is the on-wire code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ColorModel {
    Rgb8 = 0,
    Gray8 = 1,
}

impl ColorModel {
    pub fn channels(self) -> u8 {
        match self {
            ColorModel::Rgb8 => 3,
            ColorModel::Gray8 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ColorModel::Rgb8),
            1 => Some(ColorModel::Gray8),
            _ => None,
        }
    }
}

/// A row-major image with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    width: u32,
    height: u32,
    color_model: ColorModel,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, color_model: ColorModel, pixels: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidFrame(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = (width as usize)
            .checked_mul(height as usize)
            .and_then(|n| n.checked_mul(color_model.channels() as usize))
            .ok_or_else(|| ImagingError::InvalidFrame("dimensions overflow".into()))?;
        if pixels.len() != expected {
            return Err(ImagingError::InvalidFrame(format!(
                "expected {expected} pixel bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            color_model,
            pixels,
        })
    }

    pub fn rgb(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImagingError> {
        Self::new(width, height, ColorModel::Rgb8, pixels)
    }

    pub fn gray(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImagingError> {
        Self::new(width, height, ColorModel::Gray8, pixels)
    }

    /// A frame filled with one colour.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, ImagingError> {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self::rgb(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.color_model.channels()
    }

    pub fn color_model(&self) -> ColorModel {
        self.color_model
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Colour at `(x, y)`; grey frames replicate their single channel.
    pub fn rgb_at(&self, x: u32, y: u32) -> [u8; 3] {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels() as usize;
        match self.color_model {
            ColorModel::Rgb8 => [self.pixels[idx], self.pixels[idx + 1], self.pixels[idx + 2]],
            ColorModel::Gray8 => [self.pixels[idx]; 3],
        }
    }

    /// Iterates pixels in row-major order as RGB triples.
    pub fn rgb_pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        let model = self.color_model;
        self.pixels
            .chunks_exact(model.channels() as usize)
            .map(move |c| match model {
                ColorModel::Rgb8 => [c[0], c[1], c[2]],
                ColorModel::Gray8 => [c[0]; 3],
            })
    }

    /// Rows `[start, end)` as a new frame.
    pub fn rows(&self, start: u32, end: u32) -> Result<Frame, ImagingError> {
        if start >= end || end > self.height {
            return Err(ImagingError::InvalidFrame(format!(
                "row range {start}..{end} outside 0..{}",
                self.height
            )));
        }
        let stride = self.width as usize * self.channels() as usize;
        let pixels = self.pixels[start as usize * stride..end as usize * stride].to_vec();
        Frame::new(self.width, end - start, self.color_model, pixels)
    }

    /// Luma (BT.601 weights) as `f64`, row-major.
    pub fn luma(&self) -> Vec<f64> {
        match self.color_model {
            ColorModel::Gray8 => self.pixels.iter().map(|&p| p as f64).collect(),
            ColorModel::Rgb8 => self
                .pixels
                .chunks_exact(3)
                .map(|c| 0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64)
                .collect(),
        }
    }

    pub fn to_gray(&self) -> Frame {
        match self.color_model {
            ColorModel::Gray8 => self.clone(),
            ColorModel::Rgb8 => {
                let pixels = self
                    .luma()
                    .into_iter()
                    .map(|v| v.round().clamp(0.0, 255.0) as u8)
                    .collect();
                Frame::gray(self.width, self.height, pixels).expect("same dimensions")
            }
        }
    }
}

/// Integer pixel rectangle `[x0, x1) x [y0, y1)` covered by `bbox` inside the frame.
pub fn clamp_box(bbox: &BoundingBox, width: u32, height: u32) -> Result<(u32, u32, u32, u32), ImagingError> {
    let (left, top, right, bottom) = bbox.corners();
    if !(left.is_finite() && top.is_finite() && right.is_finite() && bottom.is_finite()) {
        return Err(ImagingError::EmptyIntersection);
    }
    let x0 = left.floor().max(0.0);
    let y0 = top.floor().max(0.0);
    let x1 = right.ceil().min(width as f64);
    let y1 = bottom.ceil().min(height as f64);
    if x1 <= x0 || y1 <= y0 {
        return Err(ImagingError::EmptyIntersection);
    }
    Ok((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
}

/// Crops the part of `frame` covered by `bbox` (pixel units, centre form).
///
/// The box is expanded outward to whole pixels and clamped to the frame.
pub fn crop(frame: &Frame, bbox: &BoundingBox) -> Result<Frame, ImagingError> {
    let (x0, y0, x1, y1) = clamp_box(bbox, frame.width, frame.height)?;
    let ch = frame.channels() as usize;
    let stride = frame.width as usize * ch;
    let w = (x1 - x0) as usize;
    let mut pixels = Vec::with_capacity(w * (y1 - y0) as usize * ch);
    for y in y0..y1 {
        let start = y as usize * stride + x0 as usize * ch;
        pixels.extend_from_slice(&frame.pixels[start..start + w * ch]);
    }
    Frame::new(x1 - x0, y1 - y0, frame.color_model, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: u32, h: u32) -> Frame {
        let pixels = (0..w * h * 3).map(|i| (i % 251) as u8).collect();
        Frame::rgb(w, h, pixels).unwrap()
    }

    #[test]
    fn frame_rejects_bad_lengths_and_zero_dims() {
        assert!(Frame::rgb(2, 2, vec![0; 11]).is_err());
        assert!(Frame::gray(0, 2, vec![]).is_err());
        assert!(Frame::gray(2, 2, vec![0; 4]).is_ok());
    }

    #[test]
    fn full_frame_crop_is_identity() {
        let f = ramp(8, 6);
        let b = BoundingBox::new(4.0, 3.0, 8.0, 6.0);
        assert_eq!(crop(&f, &b).unwrap(), f);
    }

    #[test]
    fn half_outside_crop_is_clamped() {
        let f = ramp(8, 6);
        // Box spans x in [-2, 4), y in [1, 5).
        let b = BoundingBox::new(1.0, 3.0, 6.0, 4.0);
        let c = crop(&f, &b).unwrap();
        assert_eq!((c.width(), c.height()), (4, 4));
        assert_eq!(c.rgb_at(0, 0), f.rgb_at(0, 1));
        assert_eq!(c.rgb_at(3, 3), f.rgb_at(3, 4));
    }

    #[test]
    fn outside_crop_fails() {
        let f = ramp(8, 6);
        let b = BoundingBox::new(20.0, 20.0, 4.0, 4.0);
        assert_eq!(crop(&f, &b), Err(ImagingError::EmptyIntersection));
    }

    #[test]
    fn rows_and_gray() {
        let f = ramp(4, 4);
        let r = f.rows(1, 3).unwrap();
        assert_eq!(r.height(), 2);
        assert_eq!(r.rgb_at(0, 0), f.rgb_at(0, 1));
        let g = Frame::filled(2, 2, [10, 10, 10]).unwrap().to_gray();
        assert_eq!(g.pixels(), &[10, 10, 10, 10]);
    }
}
