//! Photometric tools. None of them change image geometry.

use super::{Raster, RasterError};

pub const DEFAULT_BRIGHTNESS: f64 = 1.3;
pub const DEFAULT_CONTRAST: f64 = 1.3;
pub const DEFAULT_BLUR_RADIUS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnhanceOp {
    /// Multiply every channel by `factor` (> 0).
    Brightness { factor: f64 },
    /// Scale each channel's distance from 128 by `factor` (> 0).
    Contrast { factor: f64 },
    Grayscale,
    /// Box blur over a `(2r+1)²` window with clamped edges.
    Blur { radius: u32 },
    /// `2·img − blur(img, 1)`.
    Sharpen,
    /// Sobel gradient magnitude of luma.
    EdgeDetect,
}

#[inline]
fn clamp_round(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Integer luma, `round(0.299 r + 0.587 g + 0.114 b)`.
#[inline]
pub(crate) fn luma(p: [u8; 3]) -> u8 {
    ((299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32 + 500) / 1000) as u8
}

fn map_channels(img: &Raster, f: impl Fn(u8) -> u8) -> Raster {
    let mut lut = [0u8; 256];
    for (i, slot) in lut.iter_mut().enumerate() {
        *slot = f(i as u8);
    }
    let pixels = img.pixels().iter().map(|&c| lut[c as usize]).collect();
    Raster::new(img.width(), img.height(), pixels).expect("same shape")
}

fn box_blur(img: &Raster, radius: u32) -> Raster {
    let (w, h) = img.dims();
    let r = radius as i64;
    let clamp = |v: i64, hi: u32| v.clamp(0, hi as i64 - 1) as u32;
    // separable: horizontal pass into sums, then vertical over those sums
    let mut rows = vec![0u32; 3 * w as usize * h as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0u32; 3];
            for dx in -r..=r {
                let p = img.get(clamp(x as i64 + dx, w), y);
                for c in 0..3 {
                    acc[c] += p[c] as u32;
                }
            }
            let i = 3 * (y as usize * w as usize + x as usize);
            rows[i..i + 3].copy_from_slice(&acc);
        }
    }
    let n = ((2 * r + 1) * (2 * r + 1)) as u32;
    Raster::from_fn(w, h, |x, y| {
        let mut acc = [0u32; 3];
        for dy in -r..=r {
            let yy = clamp(y as i64 + dy, h);
            let i = 3 * (yy as usize * w as usize + x as usize);
            for c in 0..3 {
                acc[c] += rows[i + c];
            }
        }
        acc.map(|s| ((s + n / 2) / n) as u8)
    })
}

fn sobel(img: &Raster) -> Raster {
    let (w, h) = img.dims();
    let lum: Vec<i32> = img.pixels().chunks_exact(3).map(|p| luma([p[0], p[1], p[2]]) as i32).collect();
    let at = |x: i64, y: i64| {
        let xx = x.clamp(0, w as i64 - 1) as usize;
        let yy = y.clamp(0, h as i64 - 1) as usize;
        lum[yy * w as usize + xx]
    };
    Raster::from_fn(w, h, |x, y| {
        let (x, y) = (x as i64, y as i64);
        let gx = -at(x - 1, y - 1) - 2 * at(x - 1, y) - at(x - 1, y + 1)
            + at(x + 1, y - 1)
            + 2 * at(x + 1, y)
            + at(x + 1, y + 1);
        let gy = -at(x - 1, y - 1) - 2 * at(x, y - 1) - at(x + 1, y - 1)
            + at(x - 1, y + 1)
            + 2 * at(x, y + 1)
            + at(x + 1, y + 1);
        let m = clamp_round(((gx * gx + gy * gy) as f64).sqrt());
        [m, m, m]
    })
}

fn positive_factor(tool: &'static str, factor: f64) -> Result<(), RasterError> {
    if factor.is_finite() && factor > 0.0 {
        Ok(())
    } else {
        Err(RasterError::BadParam {
            tool,
            message: format!("factor must be a finite number > 0, got {factor}"),
        })
    }
}

pub fn enhance(img: &Raster, op: &EnhanceOp) -> Result<Raster, RasterError> {
    match *op {
        EnhanceOp::Brightness { factor } => {
            positive_factor("brightness", factor)?;
            Ok(map_channels(img, |c| clamp_round(c as f64 * factor)))
        }
        EnhanceOp::Contrast { factor } => {
            positive_factor("contrast", factor)?;
            Ok(map_channels(img, |c| clamp_round(128.0 + (c as f64 - 128.0) * factor)))
        }
        EnhanceOp::Grayscale => Ok(Raster::from_fn(img.width(), img.height(), |x, y| {
            let l = luma(img.get(x, y));
            [l, l, l]
        })),
        EnhanceOp::Blur { radius } => {
            if radius < 1 {
                return Err(RasterError::BadParam {
                    tool: "blur",
                    message: format!("radius must be an integer >= 1, got {radius}"),
                });
            }
            Ok(box_blur(img, radius))
        }
        EnhanceOp::Sharpen => {
            let blurred = box_blur(img, 1);
            let pixels = img
                .pixels()
                .iter()
                .zip(blurred.pixels())
                .map(|(&a, &b)| (2 * a as i32 - b as i32).clamp(0, 255) as u8)
                .collect();
            Ok(Raster::new(img.width(), img.height(), pixels).expect("same shape"))
        }
        EnhanceOp::EdgeDetect => Ok(sobel(img)),
    }
}
