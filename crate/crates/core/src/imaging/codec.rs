use super::{ColorModel, Frame, ImagingError};
use crate::wire::{put_u32, Reader};

pub const MLF1_MAGIC: &[u8; 4] = b"MLF1";
/// magic(4) + width(4) + height(4) + channels(1) + color model(1)
pub const MLF1_HEADER_LEN: usize = 14;

/// Seam for frame compression. The reference codec is lossless.
pub trait FrameCodec {
    fn encode(&self, frame: &Frame) -> Vec<u8>;
    fn decode(&self, bytes: &[u8]) -> Result<Frame, ImagingError>;
}

/// The `MLF1` reference layout: header followed by raw pixel bytes.
#[derive(Debug, Clone, Copy, Default)]
pub struct Mlf1Codec;

impl FrameCodec for Mlf1Codec {
    fn encode(&self, frame: &Frame) -> Vec<u8> {
        encode_frame(frame)
    }

    fn decode(&self, bytes: &[u8]) -> Result<Frame, ImagingError> {
        decode_frame(bytes)
    }
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::with_capacity(MLF1_HEADER_LEN + frame.pixels().len());
    out.extend_from_slice(MLF1_MAGIC);
    put_u32(&mut out, frame.width());
    put_u32(&mut out, frame.height());
    out.push(frame.channels());
    out.push(frame.color_model() as u8);
    out.extend_from_slice(frame.pixels());
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame, ImagingError> {
    let malformed = |why: &str| ImagingError::MalformedHeader(why.to_string());
    let mut r = Reader::new(bytes);
    let magic = r.take(4).ok_or_else(|| malformed("truncated magic"))?;
    if magic != MLF1_MAGIC {
        return Err(malformed("bad magic"));
    }
    let width = r.u32().ok_or_else(|| malformed("truncated width"))?;
    let height = r.u32().ok_or_else(|| malformed("truncated height"))?;
    let channels = r.u8().ok_or_else(|| malformed("truncated channels"))?;
    let model = r.u8().ok_or_else(|| malformed("truncated color model"))?;
    let model = ColorModel::from_code(model).ok_or_else(|| malformed("unknown color model"))?;
    if model.channels() != channels {
        return Err(malformed("channel count disagrees with color model"));
    }
    if width == 0 || height == 0 {
        return Err(malformed("zero dimension"));
    }
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(channels as usize))
        .ok_or_else(|| malformed("dimensions overflow"))?;
    let payload = r.rest();
    if payload.len() != expected {
        return Err(ImagingError::LengthMismatch {
            expected,
            actual: payload.len(),
        });
    }
    Frame::new(width, height, model, payload.to_vec())
}
