use crate::raster::{BBox, Dihedral, ToolCategory};
use crate::toolprog::AppliedTool;

use super::TaskSpec;

/// Tracks how the working image relates to the canonical image.
///
/// The working image is always `orient(crop(canonical, region))`: every crop
/// narrows `region` (kept in canonical coordinates) and every orientation
/// tool composes into `orient`. Photometric tools leave both untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewTracker {
    orient: Dihedral,
    region: BBox,
}

impl ViewTracker {
    pub fn new(canonical_width: u32, canonical_height: u32, orient: Dihedral) -> Self {
        Self {
            orient,
            region: BBox {
                x0: 0,
                y0: 0,
                x1: canonical_width,
                y1: canonical_height,
            },
        }
    }

    /// State at reset: the canonical frame under the task's corruption.
    pub fn for_task(task: &TaskSpec) -> Self {
        let c = &task.canonical_image;
        Self::new(c.width(), c.height(), task.corruption())
    }

    pub fn orientation(&self) -> Dihedral {
        self.orient
    }

    /// The canonical-coordinate region the working image shows.
    pub fn region(&self) -> BBox {
        self.region
    }

    pub fn view_dims(&self) -> (u32, u32) {
        self.orient.map_dims(self.region.width(), self.region.height())
    }

    /// Advances past one applied tool. For a crop, returns the cropped
    /// region in canonical coordinates.
    pub fn apply(&mut self, step: &AppliedTool) -> Option<BBox> {
        match step.tool.category() {
            ToolCategory::Orientation => {
                let k = step.tool.transform().expect("orientation tool");
                self.orient = self.orient.then(k.dihedral());
                None
            }
            ToolCategory::Crop => {
                let b = step.crop?;
                let (w, h) = self.view_dims();
                let local = self.orient.inverse().map_box(&b, w, h);
                self.region = local.translate(self.region.x0, self.region.y0);
                Some(self.region)
            }
            ToolCategory::Enhancement => None,
        }
    }

    /// Where a canonical-coordinate box appears in the working image, clipped
    /// to what is visible. `None` when it lies outside the current region.
    pub fn to_view(&self, canonical: &BBox) -> Option<BBox> {
        let visible = self.region.intersection(canonical)?;
        let local = BBox {
            x0: visible.x0 - self.region.x0,
            y0: visible.y0 - self.region.y0,
            x1: visible.x1 - self.region.x0,
            y1: visible.y1 - self.region.y0,
        };
        Some(self.orient.map_box(&local, self.region.width(), self.region.height()))
    }
}
