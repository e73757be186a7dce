use serde::{Deserialize, Serialize};

use super::RasterError;

/// Axis-aligned pixel box with half-open extent `[x0, x1) × [y0, y1)`.
///
/// Serialized as the array `[x0, y0, x1, y1]`; deserialization rejects empty boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self, RasterError> {
        if x0 >= x1 || y0 >= y1 {
            return Err(RasterError::InvalidBox {
                x0: x0 as i64,
                y0: y0 as i64,
                x1: x1 as i64,
                y1: y1 as i64,
            });
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        (x0 < x1 && y0 < y1).then_some(BBox { x0, y0, x1, y1 })
    }

    /// True when `other` lies entirely inside `self` (non-strict).
    pub fn contains(&self, other: &BBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.x1 <= width && self.y1 <= height
    }

    /// Shift by a non-negative offset.
    pub fn translate(&self, dx: u32, dy: u32) -> BBox {
        BBox {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }
}

impl TryFrom<[u32; 4]> for BBox {
    type Error = RasterError;

    fn try_from([x0, y0, x1, y1]: [u32; 4]) -> Result<Self, Self::Error> {
        BBox::new(x0, y0, x1, y1)
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

/// Exact IoU as `(intersection area, union area)`.
pub fn iou_ratio(a: &BBox, b: &BBox) -> (u64, u64) {
    let inter = a.intersection(b).map_or(0, |i| i.area());
    (inter, a.area() + b.area() - inter)
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (inter, union) = iou_ratio(a, b);
    inter as f64 / union as f64
}
