//! Binary PGM (`P5`) and PPM (`P6`) with 8-bit samples.

use super::{Frame, ImagingError};

fn header_error(why: &str) -> ImagingError {
    ImagingError::MalformedHeader(format!("pnm: {why}"))
}

/// Parses one whitespace-delimited header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn parse_u32(tok: Option<&[u8]>, what: &str) -> Result<u32, ImagingError> {
    tok.and_then(|t| std::str::from_utf8(t).ok())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| header_error(what))
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Frame, ImagingError> {
    let mut pos = 0;
    let gray = match next_token(bytes, &mut pos) {
        Some(b"P5") => true,
        Some(b"P6") => false,
        _ => return Err(header_error("expected P5 or P6")),
    };
    let width = parse_u32(next_token(bytes, &mut pos), "width")?;
    let height = parse_u32(next_token(bytes, &mut pos), "height")?;
    let maxval = parse_u32(next_token(bytes, &mut pos), "maxval")?;
    if maxval != 255 {
        return Err(header_error("only maxval 255 is supported"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() {
        return Err(header_error("truncated"));
    }
    pos += 1;
    let channels = if gray { 1 } else { 3 };
    let expected = width as usize * height as usize * channels;
    let raster = &bytes[pos..];
    if raster.len() != expected {
        return Err(ImagingError::LengthMismatch {
            expected,
            actual: raster.len(),
        });
    }
    if gray {
        Frame::gray(width, height, raster.to_vec())
    } else {
        Frame::rgb(width, height, raster.to_vec())
    }
}

pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let magic = if frame.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.pixels());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_roundtrip_with_comment() {
        let f = Frame::rgb(2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(decode_pnm(&encode_pnm(&f)).unwrap(), f);
        let commented = b"P5\n# made by hand\n2 2\n255\n\x01\x02\x03\x04";
        assert_eq!(decode_pnm(commented).unwrap().pixels(), &[1, 2, 3, 4]);
    }

    #[test]
    fn truncated_raster_is_rejected() {
        assert!(matches!(
            decode_pnm(b"P5\n2 2\n255\n\x01"),
            Err(ImagingError::LengthMismatch { .. })
        ));
        assert!(decode_pnm(b"P3\n1 1\n255\n1 2 3").is_err());
    }
}
