use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::font::{draw_text, text_dims, GLYPH_H};
use super::GenError;
use crate::raster::{BBox, Raster};

/// Word list for synthetic scenes. Nothing here contains a positional word
/// (see [`super::BANNED_PHRASES`]), so questions quoting scene text stay clean.
pub const LEXICON: &[&str] = &[
    "OPEN", "LATE", "CAFE", "BUS", "PARK", "EXIT", "SALE", "FRESH", "BREAD", "MILK", "TEA", "BOOK", "SHOP",
    "HOTEL", "BANK", "CITY", "RIVER", "ROAD", "GATE", "PLAZA", "MAIN", "OLD", "NEW", "BLUE", "RED", "GREEN",
    "GOLD", "STAR", "MOON", "SUN", "RAIN", "SNOW", "WIND", "FIRE", "LAMP", "DOOR", "KEY", "MAP", "BOX", "CAT",
    "DOG", "BEE", "FISH", "BIRD", "TREE", "LEAF", "ROSE", "LILY", "PLUM", "PEAR", "LIME", "FARM", "MILL",
    "BARN", "DOCK", "PIER", "SHIP", "BOAT", "TRAIN", "TAXI", "ZONE", "HALL", "ROOM", "DESK", "PEN", "INK",
    "JAR", "CUP", "MUG", "PIE", "JAM", "HONEY", "QUIZ", "JAZZ", "ECHO", "YARD", "VAN", "WAVE", "KITE", "OAK",
    "24", "7", "365", "A1", "B12", "90", "2048",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Word,
    Line,
    Paragraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub level: Level,
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    Imported,
}

/// Anything with image dimensions and text annotations.
pub trait Annotated {
    fn dims(&self) -> (u32, u32);
    fn annotations(&self) -> &[Annotation];
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDoc {
    pub image: Arc<Raster>,
    pub annotations: Vec<Annotation>,
    pub provenance: Provenance,
}

impl Annotated for SceneDoc {
    fn dims(&self) -> (u32, u32) {
        self.image.dims()
    }

    fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneOptions {
    pub width: u32,
    pub height: u32,
    pub max_scale: u32,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self {
            width: 2048,
            height: 2048,
            max_scale: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Run {
    text: String,
    x: u32,
    y: u32,
    scale: u32,
    ink: [u8; 3],
}

/// Placement of a synthetic scene without its pixels. Cheap to generate;
/// [`SceneLayout::render`] draws it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneLayout {
    width: u32,
    height: u32,
    paper: [u8; 3],
    runs: Vec<Run>,
    annotations: Vec<Annotation>,
}

impl Annotated for SceneLayout {
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }
}

const PLACEMENT_ATTEMPTS: usize = 2000;

impl SceneLayout {
    /// Lays out `words` lexicon words in paragraphs of one to three lines.
    /// Most paragraphs are short and set at scale 1 so that small-annotation
    /// filtering has candidates on a large canvas.
    pub fn generate(seed: u64, words: usize, opts: SceneOptions) -> Result<Self, GenError> {
        if words == 0 {
            return Err(GenError::Precondition("a scene needs at least one word".into()));
        }
        if opts.width == 0 || opts.height == 0 || opts.max_scale == 0 {
            return Err(GenError::Precondition("scene dimensions and max_scale must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paper = [rng.gen_range(215..=250), rng.gen_range(215..=250), rng.gen_range(215..=250)];
        let mut layout = SceneLayout {
            width: opts.width,
            height: opts.height,
            paper,
            runs: Vec::new(),
            annotations: Vec::new(),
        };
        let mut occupied: Vec<BBox> = Vec::new();
        let mut placed = 0;
        let mut attempts = 0;
        while placed < words {
            let left = words - placed;
            let scale = match rng.gen_range(0..20) {
                0..=11 => 1,
                12..=16 => 2,
                _ => rng.gen_range(3..=4),
            }
            .min(opts.max_scale);
            let n_lines = match rng.gen_range(0..20) {
                0..=14 => 1,
                15..=18 => 2,
                _ => 3,
            };
            let mut lines: Vec<Vec<&str>> = Vec::new();
            let mut budget = left;
            for _ in 0..n_lines {
                if budget == 0 {
                    break;
                }
                let n = match rng.gen_range(0..20) {
                    0..=8 => 1,
                    9..=16 => 2,
                    _ => 3,
                }
                .min(budget);
                budget -= n;
                lines.push((0..n).map(|_| *LEXICON.choose(&mut rng).unwrap()).collect());
            }
            let texts: Vec<String> = lines.iter().map(|l| l.join(" ")).collect();
            let line_h = GLYPH_H * scale;
            let gap = 3 * scale;
            let pw = texts.iter().map(|t| text_dims(t, scale).0).max().unwrap();
            let ph = line_h * texts.len() as u32 + gap * (texts.len() as u32 - 1);
            attempts += 1;
            if attempts > PLACEMENT_ATTEMPTS {
                return Err(GenError::Overflow { placed, requested: words });
            }
            if pw > opts.width || ph > opts.height {
                continue;
            }
            let x = rng.gen_range(0..=opts.width - pw);
            let y = rng.gen_range(0..=opts.height - ph);
            let para = BBox { x0: x, y0: y, x1: x + pw, y1: y + ph };
            let margin = 2 * scale + 2;
            let clash = occupied.iter().any(|o| {
                para.x0 < o.x1 + margin && o.x0 < para.x1 + margin && para.y0 < o.y1 + margin && o.y0 < para.y1 + margin
            });
            if clash {
                continue;
            }
            occupied.push(para);
            let ink = [rng.gen_range(0..90), rng.gen_range(0..90), rng.gen_range(0..90)];
            let mut line_boxes = Vec::new();
            for (i, (line, text)) in lines.iter().zip(&texts).enumerate() {
                let ly = y + i as u32 * (line_h + gap);
                let mut pen = x;
                for word in line {
                    let (w, h) = text_dims(word, scale);
                    layout.annotations.push(Annotation {
                        level: Level::Word,
                        text: word.to_string(),
                        bbox: BBox { x0: pen, y0: ly, x1: pen + w, y1: ly + h },
                    });
                    // the word cell plus its trailing column and one space
                    pen += w + scale + super::font::ADVANCE * scale;
                }
                let (lw, lh) = text_dims(text, scale);
                let lb = BBox { x0: x, y0: ly, x1: x + lw, y1: ly + lh };
                line_boxes.push(Annotation {
                    level: Level::Line,
                    text: text.clone(),
                    bbox: lb,
                });
                layout.runs.push(Run {
                    text: text.clone(),
                    x,
                    y: ly,
                    scale,
                    ink,
                });
                placed += line.len();
            }
            layout.annotations.extend(line_boxes);
            layout.annotations.push(Annotation {
                level: Level::Paragraph,
                text: texts.join(" "),
                bbox: para,
            });
        }
        Ok(layout)
    }

    pub fn render(&self) -> Raster {
        let mut img = Raster::filled(self.width, self.height, self.paper);
        for r in &self.runs {
            draw_text(&mut img, &r.text, r.x, r.y, r.scale, r.ink);
        }
        img
    }

    pub fn to_doc(&self) -> SceneDoc {
        SceneDoc {
            image: Arc::new(self.render()),
            annotations: self.annotations.clone(),
            provenance: Provenance::Synthetic,
        }
    }

    pub fn into_doc(self) -> SceneDoc {
        SceneDoc {
            image: Arc::new(self.render()),
            annotations: self.annotations,
            provenance: Provenance::Synthetic,
        }
    }
}

/// Renders a synthetic scene of `words` lexicon words. Deterministic per seed.
pub fn synth_scene(seed: u64, words: usize, opts: SceneOptions) -> Result<SceneDoc, GenError> {
    Ok(SceneLayout::generate(seed, words, opts)?.into_doc())
}

/// How the area threshold compares: inclusive (`≤`) for training data,
/// strict (`<`) for the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    Inclusive,
    Strict,
}

pub fn area_ratio(bbox: &BBox, dims: (u32, u32)) -> f64 {
    bbox.area() as f64 / (dims.0 as u64 * dims.1 as u64) as f64
}

/// Annotations of `level` whose area is a small enough share of the image.
/// Order is preserved.
pub fn filter_small<'a, S: Annotated + ?Sized>(
    scene: &'a S,
    level: Level,
    threshold: f64,
    mode: FilterMode,
) -> Vec<&'a Annotation> {
    let dims = scene.dims();
    scene
        .annotations()
        .iter()
        .filter(|a| a.level == level)
        .filter(|a| {
            let r = area_ratio(&a.bbox, dims);
            match mode {
                FilterMode::Inclusive => r <= threshold,
                FilterMode::Strict => r < threshold,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::BANNED_PHRASES;

    fn small() -> SceneOptions {
        SceneOptions {
            width: 300,
            height: 200,
            max_scale: 3,
        }
    }

    #[test]
    fn ten_words_in_bounds() {
        let s = synth_scene(1, 10, SceneOptions::default()).unwrap();
        let words: Vec<_> = s.annotations.iter().filter(|a| a.level == Level::Word).collect();
        assert_eq!(words.len(), 10);
        assert!(s.annotations.iter().all(|a| a.bbox.fits_within(2048, 2048) && !a.text.is_empty()));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synth_scene(5, 12, small()).unwrap(), synth_scene(5, 12, small()).unwrap());
        assert_ne!(synth_scene(5, 12, small()).unwrap(), synth_scene(6, 12, small()).unwrap());
        assert!(matches!(synth_scene(1, 0, small()), Err(GenError::Precondition(_))));
    }

    #[test]
    fn overflow_when_canvas_too_small() {
        let tiny = SceneOptions {
            width: 20,
            height: 10,
            max_scale: 1,
        };
        assert!(matches!(synth_scene(3, 50, tiny), Err(GenError::Overflow { .. })));
    }

    #[test]
    fn hierarchy_nests() {
        for seed in 0..20 {
            let s = SceneLayout::generate(seed, 30, small()).unwrap();
            let ann = s.annotations();
            for w in ann.iter().filter(|a| a.level == Level::Word) {
                let line = ann
                    .iter()
                    .find(|l| l.level == Level::Line && l.bbox.contains(&w.bbox) && l.text.split(' ').any(|t| t == w.text));
                let line = line.expect("word inside a line");
                assert!(ann
                    .iter()
                    .any(|p| p.level == Level::Paragraph && p.bbox.contains(&line.bbox)));
            }
        }
    }

    #[test]
    fn ink_stays_inside_word_boxes() {
        let layout = SceneLayout::generate(11, 15, small()).unwrap();
        let img = layout.render();
        let words: Vec<_> = layout.annotations().iter().filter(|a| a.level == Level::Word).collect();
        for y in 0..img.height() {
            for x in 0..img.width() {
                if img.get(x, y) != layout.paper {
                    assert!(words.iter().any(|w| w.bbox.contains_point(x, y)), "stray ink at {x},{y}");
                }
            }
        }
    }

    #[test]
    fn filter_small_examples() {
        let layout = SceneLayout {
            width: 2048,
            height: 2048,
            paper: [255; 3],
            runs: vec![],
            annotations: vec![
                Annotation {
                    level: Level::Word,
                    text: "A".into(),
                    bbox: BBox::new(0, 0, 10, 10).unwrap(),
                },
                Annotation {
                    level: Level::Word,
                    text: "B".into(),
                    bbox: BBox::new(0, 0, 300, 300).unwrap(),
                },
            ],
        };
        let kept = filter_small(&layout, Level::Word, 1e-4, FilterMode::Strict);
        assert_eq!(kept.iter().map(|a| a.text.as_str()).collect::<Vec<_>>(), ["A"]);
        assert_eq!(filter_small(&layout, Level::Word, 1.0, FilterMode::Inclusive).len(), 2);
        assert!(filter_small(&layout, Level::Line, 1.0, FilterMode::Inclusive).is_empty());

        // inclusive and strict differ exactly at the boundary: 100/1,000,000
        let exact = SceneLayout {
            width: 1000,
            height: 1000,
            annotations: vec![Annotation {
                level: Level::Word,
                text: "C".into(),
                bbox: BBox::new(0, 0, 10, 10).unwrap(),
            }],
            ..layout
        };
        assert_eq!(filter_small(&exact, Level::Word, 1e-4, FilterMode::Inclusive).len(), 1);
        assert_eq!(filter_small(&exact, Level::Word, 1e-4, FilterMode::Strict).len(), 0);
    }

    #[test]
    fn lexicon_is_renderable_and_clean() {
        for w in LEXICON {
            assert!(w.chars().all(|c| super::super::font::glyph(c).is_some()), "{w}");
            let lower = w.to_lowercase();
            assert!(!BANNED_PHRASES.iter().any(|b| lower.contains(b)), "{w}");
        }
    }
}
