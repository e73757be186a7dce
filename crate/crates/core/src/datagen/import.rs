//! Importer for externally annotated scenes: one JSON object per line,
//! `{"image_path": ..., "annotations": [{"level", "text", "vertices"}]}`,
//! with image paths relative to the annotation file and images as PPM.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::scene::{Annotation, Level, Provenance, SceneDoc};
use super::GenError;
use crate::raster::{read_ppm, BBox};

#[derive(Deserialize)]
struct RawScene {
    image_path: String,
    annotations: Vec<RawAnnotation>,
}

#[derive(Deserialize)]
struct RawAnnotation {
    level: Level,
    text: String,
    vertices: Vec<[f64; 2]>,
}

/// Axis-aligned hull of polygon vertices, clipped to the image. `None` for
/// degenerate polygons.
fn hull(vertices: &[[f64; 2]], w: u32, h: u32) -> Option<BBox> {
    let xs = vertices.iter().map(|v| v[0]);
    let ys = vertices.iter().map(|v| v[1]);
    let x0 = xs.clone().fold(f64::INFINITY, f64::min).floor().max(0.0);
    let x1 = xs.fold(f64::NEG_INFINITY, f64::max).ceil().min(w as f64);
    let y0 = ys.clone().fold(f64::INFINITY, f64::min).floor().max(0.0);
    let y1 = ys.fold(f64::NEG_INFINITY, f64::max).ceil().min(h as f64);
    if !(x0 < x1 && y0 < y1) {
        return None;
    }
    BBox::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32).ok()
}

/// Reads an annotation file. Annotations with empty text or degenerate
/// geometry are dropped.
pub fn import_scenes(path: &Path) -> Result<Vec<SceneDoc>, GenError> {
    let text = fs::read_to_string(path).map_err(|e| GenError::Io(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| GenError::Import { line: i + 1, message };
        let raw: RawScene = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let img_path = dir.join(&raw.image_path);
        let bytes = fs::read(&img_path).map_err(|e| bad(format!("{}: {e}", img_path.display())))?;
        let image = read_ppm(&bytes).map_err(|e| bad(format!("{}: {e}", img_path.display())))?;
        let (w, h) = image.dims();
        let annotations = raw
            .annotations
            .into_iter()
            .filter(|a| !a.text.trim().is_empty())
            .filter_map(|a| {
                Some(Annotation {
                    level: a.level,
                    text: a.text,
                    bbox: hull(&a.vertices, w, h)?,
                })
            })
            .collect();
        out.push(SceneDoc {
            image: Arc::new(image),
            annotations,
            provenance: Provenance::Imported,
        });
    }
    Ok(out)
}
