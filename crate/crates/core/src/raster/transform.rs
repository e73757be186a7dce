use serde::{Deserialize, Serialize};

use super::{BBox, Raster, ToolId};

/// The orientation corruptions/corrections exposed as tools.
///
/// `Rot90` is clockwise: source pixel `(x, y)` lands at `(H-1-y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    #[serde(rename = "hflip")]
    FlipH,
    #[serde(rename = "vflip")]
    FlipV,
}

impl TransformKind {
    pub const ALL: [TransformKind; 6] = [
        TransformKind::Identity,
        TransformKind::Rot90,
        TransformKind::Rot180,
        TransformKind::Rot270,
        TransformKind::FlipH,
        TransformKind::FlipV,
    ];

    /// The five non-trivial corruptions, in the fixed multiple-choice option order.
    pub const CORRUPTIONS: [TransformKind; 5] = [
        TransformKind::Rot90,
        TransformKind::Rot180,
        TransformKind::Rot270,
        TransformKind::FlipH,
        TransformKind::FlipV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Identity => "identity",
            TransformKind::Rot90 => "rot90",
            TransformKind::Rot180 => "rot180",
            TransformKind::Rot270 => "rot270",
            TransformKind::FlipH => "hflip",
            TransformKind::FlipV => "vflip",
        }
    }

    pub fn dihedral(self) -> Dihedral {
        match self {
            TransformKind::Identity => Dihedral::IDENTITY,
            TransformKind::Rot90 => Dihedral::new(false, 1),
            TransformKind::Rot180 => Dihedral::new(false, 2),
            TransformKind::Rot270 => Dihedral::new(false, 3),
            TransformKind::FlipH => Dihedral::new(true, 0),
            TransformKind::FlipV => Dihedral::new(true, 2),
        }
    }

    pub fn inverse(self) -> TransformKind {
        match self {
            TransformKind::Rot90 => TransformKind::Rot270,
            TransformKind::Rot270 => TransformKind::Rot90,
            k => k,
        }
    }

    /// `self` followed by `next`, when the result is still one of the six kinds.
    pub fn then(self, next: TransformKind) -> Option<TransformKind> {
        self.dihedral().then(next.dihedral()).kind()
    }

    /// The tool that performs this transform (none for the identity).
    pub fn tool(self) -> Option<ToolId> {
        match self {
            TransformKind::Identity => None,
            TransformKind::Rot90 => Some(ToolId::Rotate90),
            TransformKind::Rot180 => Some(ToolId::Rotate180),
            TransformKind::Rot270 => Some(ToolId::Rotate270),
            TransformKind::FlipH => Some(ToolId::FlipHorizontal),
            TransformKind::FlipV => Some(ToolId::FlipVertical),
        }
    }
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An element of the full symmetry group of the square: an optional horizontal
/// mirror followed by `rot` clockwise quarter turns.
///
/// `TransformKind` covers six of its eight elements; the two diagonal
/// reflections only arise as compositions (e.g. `Rot90` after `FlipH`), so
/// orientation bookkeeping is done here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dihedral {
    flip: bool,
    rot: u8,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral { flip: false, rot: 0 };

    pub fn new(flip: bool, rot: u8) -> Self {
        Self { flip, rot: rot % 4 }
    }

    pub fn is_identity(self) -> bool {
        self == Self::IDENTITY
    }

    /// `self` followed by `next`.
    pub fn then(self, next: Dihedral) -> Dihedral {
        // R^a F^f R^b = R^(a-b) F when f, since F R F = R^-1.
        if next.flip {
            Dihedral::new(!self.flip, (4 + next.rot - self.rot) % 4)
        } else {
            Dihedral::new(self.flip, next.rot + self.rot)
        }
    }

    pub fn inverse(self) -> Dihedral {
        if self.flip {
            self
        } else {
            Dihedral::new(false, 4 - self.rot)
        }
    }

    pub fn kind(self) -> Option<TransformKind> {
        TransformKind::ALL.into_iter().find(|k| k.dihedral() == self)
    }

    pub fn swaps_axes(self) -> bool {
        self.rot % 2 == 1
    }

    /// Output dimensions for an input of `(w, h)`.
    pub fn map_dims(self, w: u32, h: u32) -> (u32, u32) {
        if self.swaps_axes() {
            (h, w)
        } else {
            (w, h)
        }
    }

    /// Where source pixel `(x, y)` of a `w`×`h` image ends up.
    #[inline]
    pub fn map_point(self, x: u32, y: u32, w: u32, h: u32) -> (u32, u32) {
        let (mut x, mut y, mut w, mut h) = (x, y, w, h);
        if self.flip {
            x = w - 1 - x;
        }
        for _ in 0..self.rot {
            (x, y) = (h - 1 - y, x);
            (w, h) = (h, w);
        }
        (x, y)
    }

    /// Image of a box under this map, for a source image of `w`×`h`.
    pub fn map_box(self, b: &BBox, w: u32, h: u32) -> BBox {
        let (ax, ay) = self.map_point(b.x0, b.y0, w, h);
        let (bx, by) = self.map_point(b.x1 - 1, b.y1 - 1, w, h);
        BBox {
            x0: ax.min(bx),
            y0: ay.min(by),
            x1: ax.max(bx) + 1,
            y1: ay.max(by) + 1,
        }
    }

    pub fn apply(self, img: &Raster) -> Raster {
        if self.is_identity() {
            return img.clone();
        }
        let (w, h) = img.dims();
        let (dw, dh) = self.map_dims(w, h);
        let mut out = vec![0u8; img.pixels().len()];
        let src = img.pixels();
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = self.map_point(x, y, w, h);
                let s = 3 * (y as usize * w as usize + x as usize);
                let d = 3 * (dy as usize * dw as usize + dx as usize);
                out[d..d + 3].copy_from_slice(&src[s..s + 3]);
            }
        }
        Raster::new(dw, dh, out).expect("dihedral maps preserve pixel count")
    }
}

pub fn apply_transform(img: &Raster, kind: TransformKind) -> Raster {
    kind.dihedral().apply(img)
}

/// Every kind `k` with `apply_transform(canonical, k) == observed`, in
/// `TransformKind::ALL` order.
pub fn detect_transform(canonical: &Raster, observed: &Raster) -> Vec<TransformKind> {
    TransformKind::ALL
        .into_iter()
        .filter(|k| {
            let d = k.dihedral();
            d.map_dims(canonical.width(), canonical.height()) == observed.dims()
                && d.apply(canonical) == *observed
        })
        .collect()
}
