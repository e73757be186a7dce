//! Dataset and benchmark generation from synthetic text scenes.
//!
//! Every item is derived from `(seed, index)` alone so generation is
//! reproducible and order-independent.

mod bench;
mod config;
pub mod font;
mod import;
mod scene;
mod tasks;
mod templates;

pub use bench::{
    diagnostic_images, gen_diagnostic, gen_mvtool, gen_orientation_suite, is_ambiguous, mvtool_scenes,
    orientation_base, solve_diagnostic, variant_name, BaseItem, DiagnosticItem, MvToolItem, DIAGNOSTIC_OPTIONS,
};
pub use config::GenConfig;
pub use import::import_scenes;
pub use scene::{
    area_ratio, filter_small, synth_scene, Annotated, Annotation, FilterMode, Level, Provenance, SceneDoc,
    SceneLayout, SceneOptions, LEXICON,
};
pub use tasks::{
    difficulty_filter, faulty_program, first_tool_name, gen_sft, make_task, multicrop_windows, sample_meta,
    sample_task_type, sft_task, FaultKind, TaskMeta,
};
pub use templates::{count_letter, has_positional_cue, instantiate, Question, Template, BANNED_PHRASES};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::episode::InvalidTask;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("scene overflow: placed {placed} of {requested} words before the retry budget ran out")]
    Overflow { placed: usize, requested: usize },
    #[error("no candidate: {0}")]
    NoCandidate(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    InvalidTask(#[from] InvalidTask),
    #[error("import line {line}: {message}")]
    Import { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// Independent RNG stream for item `index` under `seed`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
