use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{filter_small, synth_scene, Annotated, Annotation, FilterMode, Level, SceneDoc};
use super::templates::{instantiate, Question, Template};
use super::{item_rng, GenConfig, GenError};
use crate::episode::{orientation_composite, TaskSpec, TaskType};
use crate::raster::{BBox, ToolId};

/// How the scripted faulty first step of an error-handling task fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    UnknownTool,
    BadArgs,
    ParseError,
    RuntimeError,
}

impl FaultKind {
    pub const ALL: [FaultKind; 4] = [
        FaultKind::UnknownTool,
        FaultKind::BadArgs,
        FaultKind::ParseError,
        FaultKind::RuntimeError,
    ];
}

/// Sampled type and tools for one task, before an image is chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskMeta {
    pub task_type: TaskType,
    pub s_req: Vec<ToolId>,
    pub fault: Option<FaultKind>,
}

pub fn sample_task_type<R: Rng>(cfg: &GenConfig, rng: &mut R) -> TaskType {
    let dist = WeightedIndex::new(cfg.type_proportions).expect("validated proportions");
    TaskType::ALL[dist.sample(rng)]
}

const MUST_USE: [ToolId; 6] = [
    ToolId::Rotate90,
    ToolId::Rotate180,
    ToolId::Rotate270,
    ToolId::FlipHorizontal,
    ToolId::FlipVertical,
    ToolId::Crop,
];

pub fn sample_meta<R: Rng>(task_type: TaskType, rng: &mut R) -> TaskMeta {
    let orientation = |rng: &mut R| ToolId::ORIENTATION[rng.gen_range(0..5)].clone();
    let (s_req, fault) = match task_type {
        TaskType::SingleTool => (vec![MUST_USE[rng.gen_range(0..6)].clone()], None),
        TaskType::MultiTool => (vec![orientation(rng), ToolId::Crop], None),
        TaskType::MultiCrop => (vec![ToolId::Crop; rng.gen_range(2..=3)], None),
        TaskType::ErrorHandling => (vec![orientation(rng)], Some(FaultKind::ALL[rng.gen_range(0..4)])),
        TaskType::NoTool => (vec![], None),
    };
    TaskMeta {
        task_type,
        s_req,
        fault,
    }
}

/// A failing first program for an error-handling task whose fix is
/// `required`. The failure message always names the offending tool.
pub fn faulty_program(kind: FaultKind, required: &ToolId, image_dims: (u32, u32)) -> String {
    let (w, h) = image_dims;
    match kind {
        FaultKind::UnknownTool => match required {
            ToolId::FlipHorizontal | ToolId::FlipVertical => "flip(axis=\"h\")".into(),
            _ => "rotate(angle=90)".into(),
        },
        // the wrong tool, called with an argument it does not take
        FaultKind::BadArgs => match required {
            ToolId::FlipHorizontal => "rotate90(direction=\"cw\")".into(),
            _ => "flip-horizontal(direction=\"cw\")".into(),
        },
        FaultKind::ParseError => format!("{required}("),
        FaultKind::RuntimeError => format!("crop(x0={w}, y0={h}, x1={}, y1={})", w + 16, h + 16),
    }
}

/// Name of the first tool called in `program`, as written.
pub fn first_tool_name(program: &str) -> &str {
    let s = program.trim_start();
    let end = s.find(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_')).unwrap_or(s.len());
    &s[..end]
}

/// A coarse-to-fine zoom chain `w_1 ⊃ … ⊃ w_n` with `w_n = target` and
/// each window at most `shrink` times the area of the previous one.
pub fn multicrop_windows<R: Rng>(
    target: BBox,
    dims: (u32, u32),
    n: usize,
    shrink: f64,
    rng: &mut R,
) -> Result<Vec<BBox>, GenError> {
    if n < 2 {
        return Err(GenError::Precondition(format!("a zoom chain needs at least 2 steps, got {n}")));
    }
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(GenError::Precondition(format!("shrink factor must lie in (0, 1), got {shrink}")));
    }
    let (iw, ih) = dims;
    if !target.fits_within(iw, ih) {
        return Err(GenError::Precondition("target exceeds the image".into()));
    }
    let infeasible = || GenError::Infeasible(format!("{n} windows shrinking by {shrink} cannot end at {target:?} in {iw}x{ih}"));
    let grow = (1.0 / shrink).sqrt();
    let mut chain = vec![target];
    let mut cur = target;
    for _ in 1..n {
        let inner = cur.area() as f64;
        let fits = |w: u32, h: u32| inner <= shrink * (w as u64 * h as u64) as f64;
        let mut w = ((cur.width() as f64 * grow).ceil() as u32).clamp(cur.width(), iw);
        let mut h = ((cur.height() as f64 * grow).ceil() as u32).clamp(cur.height(), ih);
        while !fits(w, h) && h < ih {
            h += 1;
        }
        while !fits(w, h) && w < iw {
            w += 1;
        }
        if !fits(w, h) {
            return Err(infeasible());
        }
        let x0 = rng.gen_range(cur.x1.saturating_sub(w)..=cur.x0.min(iw - w));
        let y0 = rng.gen_range(cur.y1.saturating_sub(h)..=cur.y0.min(ih - h));
        cur = BBox {
            x0,
            y0,
            x1: x0 + w,
            y1: y0 + h,
        };
        chain.push(cur);
    }
    chain.reverse();
    Ok(chain)
}

/// Keep an RL item iff its rollouts are neither all correct nor all wrong.
pub fn difficulty_filter(results: &[bool]) -> Result<bool, GenError> {
    if results.len() < 2 {
        return Err(GenError::Precondition(format!("need at least 2 rollouts, got {}", results.len())));
    }
    let ok = results.iter().filter(|r| **r).count();
    Ok(ok >= 1 && ok < results.len())
}

/// Picks an annotation the template set can ask about, trying candidates
/// in random order.
pub(crate) fn pick_question<'a, R: Rng>(
    candidates: &[&'a Annotation],
    all: &[Annotation],
    rng: &mut R,
) -> Option<(&'a Annotation, Question)> {
    let mut order: Vec<_> = candidates.to_vec();
    order.shuffle(rng);
    order.into_iter().find_map(|a| {
        let template = Template::ALL.into_iter().find(|t| t.level() == a.level)?;
        instantiate(template, a, all, rng).map(|q| (a, q))
    })
}

const LEVELS: [Level; 3] = [Level::Word, Level::Line, Level::Paragraph];

/// Builds a task on `scene`: picks a question target (small annotations
/// only when a crop is required), corrupts the canonical image with the
/// inverse of the required orientation tools, and attaches the zoom chain
/// or faulty step the type calls for.
pub fn make_task<R: Rng>(
    id: String,
    scene: &SceneDoc,
    meta: &TaskMeta,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<TaskSpec, GenError> {
    let crops = meta.s_req.iter().filter(|t| **t == ToolId::Crop).count();
    let candidates: Vec<&Annotation> = if crops > 0 {
        LEVELS
            .iter()
            .flat_map(|l| filter_small(scene, *l, cfg.area_threshold, FilterMode::Inclusive))
            .collect()
    } else {
        scene.annotations.iter().collect()
    };
    let no_candidate = || GenError::NoCandidate(format!("no usable annotation for a {} task", meta.task_type));
    let mut pool = candidates;
    let (target, question, windows) = loop {
        let (ann, q) = pick_question(&pool, &scene.annotations, rng).ok_or_else(no_candidate)?;
        let windows = if meta.task_type == TaskType::MultiCrop {
            match multicrop_windows(ann.bbox, scene.dims(), crops, cfg.shrink_factor, rng) {
                Ok(w) => w,
                Err(GenError::Infeasible(_)) => {
                    pool.retain(|a| !std::ptr::eq(*a, ann));
                    continue;
                }
                Err(e) => return Err(e),
            }
        } else {
            Vec::new()
        };
        break (ann, q, windows);
    };
    let canonical = scene.image.clone();
    let corruption = orientation_composite(&meta.s_req).inverse();
    let initial = Arc::new(corruption.apply(&canonical));
    let faulty_step = meta.fault.map(|k| {
        let required = meta.s_req.first().expect("error-handling tasks require a tool");
        faulty_program(k, required, initial.dims())
    });
    let task = TaskSpec {
        id,
        question: question.text,
        initial_image: initial,
        canonical_image: canonical,
        gold_answer: question.gold,
        task_type: meta.task_type,
        max_turns: TaskSpec::default_max_turns(&meta.s_req),
        s_req: meta.s_req.clone(),
        target_box: (crops > 0).then_some(target.bbox),
        crop_windows: windows,
        faulty_step,
    };
    task.validate()?;
    Ok(task)
}

const SCENE_ATTEMPTS: usize = 8;

/// The `index`-th task of a generated training set. Items depend only on
/// (seed, index), so sets can be generated in any order or in parallel.
pub fn sft_task(cfg: &GenConfig, index: usize) -> Result<TaskSpec, GenError> {
    let mut rng: ChaCha8Rng = item_rng(cfg.seed, index as u64);
    let task_type = sample_task_type(cfg, &mut rng);
    let meta = sample_meta(task_type, &mut rng);
    let id = format!("sft-{}-{index:05}", cfg.seed);
    let mut last = None;
    for _ in 0..SCENE_ATTEMPTS {
        let scene = synth_scene(rng.gen(), cfg.scene_words, cfg.scene)?;
        match make_task(id.clone(), &scene, &meta, cfg, &mut rng) {
            Ok(t) => return Ok(t),
            Err(e @ (GenError::NoCandidate(_) | GenError::Infeasible(_))) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

pub fn gen_sft(cfg: &GenConfig, n: usize) -> Result<Vec<TaskSpec>, GenError> {
    cfg.validate()?;
    (0..n).map(|i| sft_task(cfg, i)).collect()
}
