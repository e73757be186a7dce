//! Owned RGB8 rasters and the pixel-level operations every tool is built from.
//!
//! Everything here is a pure function of its inputs. Rasters are immutable once
//! built; operations return new rasters.

mod bbox;
mod enhance;
mod ppm;
mod tool_id;
mod transform;

pub use bbox::{iou, iou_ratio, BBox};
pub use enhance::{enhance, EnhanceOp, DEFAULT_BLUR_RADIUS, DEFAULT_BRIGHTNESS, DEFAULT_CONTRAST};
pub use ppm::{read_ppm, write_ppm};
pub use tool_id::{ToolCategory, ToolId};
pub use transform::{apply_transform, detect_transform, Dihedral, TransformKind};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("raster dimensions must be at least 1x1, got {width}x{height}")]
    EmptyRaster { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} bytes, expected {expected} for {width}x{height} RGB")]
    BufferSize {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
    #[error("invalid box ({x0},{y0},{x1},{y1}): need x0 < x1 and y0 < y1")]
    InvalidBox { x0: i64, y0: i64, x1: i64, y1: i64 },
    #[error("box ({},{},{},{}) exceeds image bounds {width}x{height}", .bbox.x0, .bbox.y0, .bbox.x1, .bbox.y1)]
    OutOfBounds { bbox: BBox, width: u32, height: u32 },
    #[error("box ({x0},{y0},{x1},{y1}) is empty after clipping to {width}x{height}")]
    EmptyRegion {
        x0: i64,
        y0: i64,
        x1: i64,
        y1: i64,
        width: u32,
        height: u32,
    },
    #[error("{tool}: {message}")]
    BadParam { tool: &'static str, message: String },
    #[error("malformed PPM: {0}")]
    Ppm(String),
}

/// Row-major RGB8 image. `pixels.len() == 3 * width * height` always holds.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Raster")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Raster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyRaster { width, height });
        }
        let expected = 3 * width as usize * height as usize;
        if pixels.len() != expected {
            return Err(RasterError::BufferSize {
                width,
                height,
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A `width`×`height` raster of one color.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(3 * n);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    /// Builds a raster by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        let mut pixels = Vec::with_capacity(3 * width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        3 * (y as usize * self.width as usize + x as usize)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.offset(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// The box covering the whole image.
    pub fn full_box(&self) -> BBox {
        BBox {
            x0: 0,
            y0: 0,
            x1: self.width,
            y1: self.height,
        }
    }

    /// Strict crop: the box must lie entirely inside the image.
    pub fn crop(&self, bbox: BBox) -> Result<Raster, RasterError> {
        if bbox.x1 > self.width || bbox.y1 > self.height {
            return Err(RasterError::OutOfBounds {
                bbox,
                width: self.width,
                height: self.height,
            });
        }
        let w = bbox.width() as usize;
        let mut pixels = Vec::with_capacity(3 * w * bbox.height() as usize);
        for y in bbox.y0..bbox.y1 {
            let start = self.offset(bbox.x0, y);
            pixels.extend_from_slice(&self.pixels[start..start + 3 * w]);
        }
        Ok(Raster {
            width: bbox.width(),
            height: bbox.height(),
            pixels,
        })
    }

    /// Clip-mode crop: signed coordinates are clamped to the image first.
    /// Returns the crop together with the box actually used.
    pub fn crop_clipped(
        &self,
        x0: i64,
        y0: i64,
        x1: i64,
        y1: i64,
    ) -> Result<(Raster, BBox), RasterError> {
        let clamp_x = |v: i64| v.clamp(0, self.width as i64) as u32;
        let clamp_y = |v: i64| v.clamp(0, self.height as i64) as u32;
        let (cx0, cy0, cx1, cy1) = (clamp_x(x0), clamp_y(y0), clamp_x(x1), clamp_y(y1));
        if cx0 >= cx1 || cy0 >= cy1 {
            return Err(RasterError::EmptyRegion {
                x0,
                y0,
                x1,
                y1,
                width: self.width,
                height: self.height,
            });
        }
        let bbox = BBox {
            x0: cx0,
            y0: cy0,
            x1: cx1,
            y1: cy1,
        };
        Ok((self.crop(bbox)?, bbox))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> Raster {
        Raster::from_fn(w, h, |x, y| [x as u8, y as u8, (x * 7 + y * 13) as u8])
    }

    #[test]
    fn new_checks_buffer_length() {
        assert!(matches!(
            Raster::new(2, 2, vec![0; 11]),
            Err(RasterError::BufferSize { expected: 12, .. })
        ));
        assert!(matches!(
            Raster::new(0, 2, vec![]),
            Err(RasterError::EmptyRaster { .. })
        ));
        assert!(Raster::new(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn full_frame_crop_is_identity() {
        let img = gradient(10, 10);
        assert_eq!(img.crop(img.full_box()).unwrap(), img);
    }

    #[test]
    fn crop_copies_region() {
        let img = gradient(10, 10);
        let out = img.crop(BBox::new(2, 3, 5, 7).unwrap()).unwrap();
        assert_eq!(out.dims(), (3, 4));
        for y in 0..4 {
            for x in 0..3 {
                assert_eq!(out.get(x, y), img.get(x + 2, y + 3));
            }
        }
    }

    #[test]
    fn strict_crop_rejects_overflow() {
        let img = gradient(10, 10);
        let err = img.crop(BBox::new(8, 8, 20, 20).unwrap()).unwrap_err();
        assert!(matches!(err, RasterError::OutOfBounds { .. }));
    }

    #[test]
    fn clipped_crop_clamps_and_reports_empty() {
        let img = gradient(10, 10);
        let (out, used) = img.crop_clipped(8, 8, 20, 20).unwrap();
        assert_eq!(used, BBox::new(8, 8, 10, 10).unwrap());
        assert_eq!(out.dims(), (2, 2));
        let (_, used) = img.crop_clipped(-5, -5, 3, 3).unwrap();
        assert_eq!(used, BBox::new(0, 0, 3, 3).unwrap());
        assert!(matches!(
            img.crop_clipped(12, 0, 20, 5),
            Err(RasterError::EmptyRegion { .. })
        ));
    }
}
