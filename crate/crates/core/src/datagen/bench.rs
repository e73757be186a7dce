//! Benchmark builders: the multi-tool benchmark, six-variant orientation
//! suites, and the five-way transformation diagnostic.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{area_ratio, filter_small, synth_scene, Annotated, FilterMode, SceneDoc, SceneLayout, SceneOptions};
use super::tasks::pick_question;
use super::templates::Template;
use super::{item_rng, GenConfig, GenError};
use crate::episode::{TaskSpec, TaskType};
use crate::raster::{apply_transform, detect_transform, BBox, Raster, ToolId, TransformKind};

/// One multi-tool benchmark item. Images are materialized on demand from the
/// referenced scene with [`MvToolItem::to_task`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvToolItem {
    pub id: String,
    pub scene: usize,
    pub template: Template,
    pub question: String,
    pub gold_answer: String,
    pub target_box: BBox,
    pub area_ratio: f64,
    /// The orientation tool that undoes the item's corruption.
    pub tool: ToolId,
}

impl MvToolItem {
    pub fn s_req(&self) -> Vec<ToolId> {
        vec![self.tool.clone(), ToolId::Crop]
    }

    pub fn to_task(&self, scene: &SceneDoc) -> Result<TaskSpec, GenError> {
        let k = self.tool.transform().expect("orientation tool");
        let s_req = self.s_req();
        let task = TaskSpec {
            id: self.id.clone(),
            question: self.question.clone(),
            initial_image: Arc::new(k.inverse().dihedral().apply(&scene.image)),
            canonical_image: scene.image.clone(),
            gold_answer: self.gold_answer.clone(),
            task_type: TaskType::MultiTool,
            max_turns: TaskSpec::default_max_turns(&s_req),
            s_req,
            target_box: Some(self.target_box),
            crop_windows: Vec::new(),
            faulty_step: None,
        };
        task.validate()?;
        Ok(task)
    }
}

/// Scene layouts for the benchmark; scene `i` depends only on (seed, i).
pub fn mvtool_scenes(cfg: &GenConfig, count: usize) -> Result<Vec<SceneLayout>, GenError> {
    (0..count)
        .map(|i| SceneLayout::generate(item_rng(cfg.seed ^ 0x5CE7E, i as u64).gen(), cfg.scene_words, cfg.scene))
        .collect()
}

/// Three stages per item: keep only annotations under the area threshold,
/// ask a templated question free of positional cues, and assign one of the
/// five orientation corruptions uniformly at random.
pub fn gen_mvtool<S: Annotated>(scenes: &[S], n: usize, cfg: &GenConfig) -> Result<Vec<MvToolItem>, GenError> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(GenError::Precondition("no scenes given".into()));
    }
    (0..n)
        .map(|i| {
            let mut rng: ChaCha8Rng = item_rng(cfg.seed, i as u64);
            let tool = ToolId::ORIENTATION[rng.gen_range(0..5)].clone();
            let first = rng.gen_range(0..scenes.len());
            let mut templates = Template::ALL;
            templates.shuffle(&mut rng);
            for offset in 0..scenes.len() {
                let s = (first + offset) % scenes.len();
                let scene = &scenes[s];
                for t in templates {
                    let small = filter_small(scene, t.level(), cfg.area_threshold, FilterMode::Strict);
                    if let Some((ann, q)) = pick_question(&small, scene.annotations(), &mut rng) {
                        return Ok(MvToolItem {
                            id: format!("mvtool-{}-{i:05}", cfg.seed),
                            scene: s,
                            template: q.template,
                            question: q.text,
                            gold_answer: q.gold,
                            target_box: ann.bbox,
                            area_ratio: area_ratio(&ann.bbox, scene.dims()),
                            tool,
                        });
                    }
                }
            }
            Err(GenError::NoCandidate(format!("item {i}: no scene has a small annotation")))
        })
        .collect()
}

/// A source item for orientation suites: a question over a canonical image.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseItem {
    pub id: String,
    pub question: String,
    pub gold_answer: String,
    pub image: Arc<Raster>,
}

/// Small synthetic base items: one templated question per scene.
pub fn orientation_base(seed: u64, n: usize, opts: SceneOptions, words: usize) -> Result<Vec<BaseItem>, GenError> {
    (0..n)
        .map(|i| {
            let mut rng: ChaCha8Rng = item_rng(seed, i as u64);
            for _ in 0..8 {
                let scene = synth_scene(rng.gen(), words, opts)?;
                let all: Vec<_> = scene.annotations.iter().collect();
                if let Some((_, q)) = pick_question(&all, &scene.annotations, &mut rng) {
                    return Ok(BaseItem {
                        id: format!("orient-{seed}-{i:05}"),
                        question: q.text,
                        gold_answer: q.gold,
                        image: scene.image,
                    });
                }
            }
            Err(GenError::NoCandidate(format!("base item {i}: no answerable annotation")))
        })
        .collect()
}

pub fn variant_name(tool: Option<&ToolId>) -> &str {
    tool.map_or("source", |t| t.name())
}

/// Source plus the five corrupted variants of every base item. Variant
/// `rotate90` needs `rotate90` to recover the canonical image, so its
/// initial image is the canonical one rotated by 270°.
pub fn gen_orientation_suite(base: &[BaseItem]) -> Result<Vec<TaskSpec>, GenError> {
    let mut out = Vec::with_capacity(base.len() * 6);
    for b in base {
        let variants = std::iter::once(None).chain(ToolId::ORIENTATION.iter().map(Some));
        for tool in variants {
            let (s_req, initial, task_type) = match tool {
                None => (vec![], b.image.clone(), TaskType::NoTool),
                Some(t) => {
                    let k = t.transform().expect("orientation tool");
                    (
                        vec![t.clone()],
                        Arc::new(k.inverse().dihedral().apply(&b.image)),
                        TaskType::SingleTool,
                    )
                }
            };
            let task = TaskSpec {
                id: format!("{}-{}", b.id, variant_name(tool)),
                question: b.question.clone(),
                initial_image: initial,
                canonical_image: b.image.clone(),
                gold_answer: b.gold_answer.clone(),
                task_type,
                max_turns: TaskSpec::default_max_turns(&s_req),
                s_req,
                target_box: None,
                crop_windows: Vec::new(),
                faulty_step: None,
            };
            task.validate()?;
            out.push(task);
        }
    }
    Ok(out)
}

/// Answer options of the diagnostic, in presentation order.
pub const DIAGNOSTIC_OPTIONS: [TransformKind; 5] = TransformKind::CORRUPTIONS;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticItem {
    pub id: String,
    pub source: usize,
    /// The transform applied to the source; also the gold option.
    pub transform: TransformKind,
    pub image: Arc<Raster>,
}

impl DiagnosticItem {
    pub fn prompt(&self) -> String {
        let letters = ['A', 'B', 'C', 'D', 'E'];
        let opts: Vec<String> = DIAGNOSTIC_OPTIONS
            .iter()
            .zip(letters)
            .map(|(k, l)| format!("({l}) {}", k.name()))
            .collect();
        format!(
            "The second image is the first one after a single transformation. Which one? {}",
            opts.join(" ")
        )
    }

    pub fn gold_letter(&self) -> char {
        let i = DIAGNOSTIC_OPTIONS.iter().position(|k| *k == self.transform).unwrap();
        (b'A' + i as u8) as char
    }
}

/// The unique diagnostic option mapping `source` onto `observed`, if any.
pub fn solve_diagnostic(source: &Raster, observed: &Raster) -> Option<TransformKind> {
    let hits: Vec<_> = detect_transform(source, observed)
        .into_iter()
        .filter(|k| DIAGNOSTIC_OPTIONS.contains(k))
        .collect();
    match hits.as_slice() {
        [k] => Some(*k),
        _ => None,
    }
}

/// Whether some non-identity symmetry of `img` makes options indistinguishable.
pub fn is_ambiguous(img: &Raster) -> bool {
    detect_transform(img, img).len() > 1
}

/// One five-way item per image, with the transform drawn uniformly.
/// Images with any dihedral symmetry are excluded.
pub fn gen_diagnostic(images: &[Arc<Raster>], seed: u64) -> Vec<DiagnosticItem> {
    images
        .iter()
        .enumerate()
        .filter_map(|(i, img)| {
            let mut rng: ChaCha8Rng = item_rng(seed, i as u64);
            let k = DIAGNOSTIC_OPTIONS[rng.gen_range(0..5)];
            if is_ambiguous(img) {
                return None;
            }
            Some(DiagnosticItem {
                id: format!("diag-{seed}-{i:05}"),
                source: i,
                transform: k,
                image: Arc::new(apply_transform(img, k)),
            })
        })
        .collect()
}

/// Canonical images for the diagnostic: small synthetic text scenes.
pub fn diagnostic_images(seed: u64, n: usize) -> Result<Vec<Arc<Raster>>, GenError> {
    let opts = SceneOptions {
        width: 96,
        height: 64,
        max_scale: 2,
    };
    (0..n)
        .map(|i| Ok(synth_scene(item_rng(seed, i as u64).gen(), 4, opts)?.image))
        .collect()
}
