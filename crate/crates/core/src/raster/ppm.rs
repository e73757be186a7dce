//! Binary PPM (P6, maxval 255).
//!
//! The writer emits `P6 <w> <h> 255\n` followed by raw RGB bytes, with no
//! comments, so identical rasters always serialize to identical files. The
//! reader accepts any whitespace layout and `#` comments in the header.

use super::{Raster, RasterError};

pub fn write_ppm(img: &Raster) -> Vec<u8> {
    let header = format!("P6 {} {} 255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}

pub fn read_ppm(bytes: &[u8]) -> Result<Raster, RasterError> {
    let bad = |m: &str| RasterError::Ppm(m.to_string());
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(bad("missing P6 magic"));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(bad("expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("header field out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(bad("expected a single whitespace byte after maxval")),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    Raster::new(width, height, bytes[pos..].to_vec())
}
