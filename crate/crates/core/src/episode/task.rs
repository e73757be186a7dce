use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BBox, Dihedral, Raster, ToolId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskType {
    SingleTool,
    MultiTool,
    MultiCrop,
    ErrorHandling,
    NoTool,
}

impl TaskType {
    pub const ALL: [TaskType; 5] = [
        TaskType::SingleTool,
        TaskType::MultiTool,
        TaskType::MultiCrop,
        TaskType::ErrorHandling,
        TaskType::NoTool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskType::SingleTool => "single-tool",
            TaskType::MultiTool => "multi-tool",
            TaskType::MultiCrop => "multi-crop",
            TaskType::ErrorHandling => "error-handling",
            TaskType::NoTool => "no-tool",
        }
    }
}

impl std::fmt::Display for TaskType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid task '{id}': {reason}")]
pub struct InvalidTask {
    pub id: String,
    pub reason: String,
}

/// One task: question, corrupted and canonical images, gold answer, and the
/// metadata the reward engine needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: String,
    pub question: String,
    pub initial_image: Arc<Raster>,
    pub canonical_image: Arc<Raster>,
    pub gold_answer: String,
    pub task_type: TaskType,
    /// Must-use tools in prescribed order; empty means none.
    pub s_req: Vec<ToolId>,
    /// Region of interest in canonical coordinates; present iff crop is required.
    pub target_box: Option<BBox>,
    /// Planned zoom chain for multi-crop tasks, coarse to fine, in canonical
    /// coordinates; one window per crop entry of `s_req`. Empty otherwise.
    pub crop_windows: Vec<BBox>,
    pub max_turns: u32,
    /// Scripted faulty first program for error-handling tasks.
    pub faulty_step: Option<String>,
}

impl TaskSpec {
    /// Default turn budget: the required tools plus three spare turns.
    pub fn default_max_turns(s_req: &[ToolId]) -> u32 {
        s_req.len() as u32 + 3
    }

    /// Composition of the required orientation tools, in order.
    pub fn correction(&self) -> Dihedral {
        orientation_composite(&self.s_req)
    }

    /// The orientation applied to the canonical image to produce the initial one.
    pub fn corruption(&self) -> Dihedral {
        self.correction().inverse()
    }

    pub fn requires(&self, tool: &ToolId) -> bool {
        self.s_req.contains(tool)
    }

    pub fn validate(&self) -> Result<(), InvalidTask> {
        let fail = |reason: String| {
            Err(InvalidTask {
                id: self.id.clone(),
                reason,
            })
        };
        if self.id.is_empty() {
            return fail("id is empty".into());
        }
        if self.max_turns == 0 {
            return fail("max_turns must be positive".into());
        }
        if self.gold_answer.trim().is_empty() {
            return fail("gold answer is empty".into());
        }
        if let Some(t) = self.s_req.iter().find(|t| !t.is_must_use()) {
            return fail(format!("'{t}' is not a must-use tool"));
        }
        if self.s_req.is_empty() != (self.task_type == TaskType::NoTool) {
            return fail(format!(
                "task type {} is inconsistent with {} required tools",
                self.task_type,
                self.s_req.len()
            ));
        }
        let needs_crop = self.requires(&ToolId::Crop);
        match self.target_box {
            Some(_) if !needs_crop => return fail("target box given but crop is not required".into()),
            None if needs_crop => return fail("crop is required but no target box is given".into()),
            Some(b) if !b.fits_within(self.canonical_image.width(), self.canonical_image.height()) => {
                return fail("target box exceeds the canonical image".into())
            }
            _ => {}
        }
        let crops = self.s_req.iter().filter(|t| **t == ToolId::Crop).count();
        if self.task_type == TaskType::MultiCrop && (crops < 2 || self.crop_windows.is_empty()) {
            return fail("multi-crop task needs at least two crops and a window chain".into());
        }
        if !self.crop_windows.is_empty() {
            if self.crop_windows.len() != crops {
                return fail(format!(
                    "{} crop windows for {crops} required crops",
                    self.crop_windows.len()
                ));
            }
            let (w, h) = self.canonical_image.dims();
            if self.crop_windows.iter().any(|b| !b.fits_within(w, h)) {
                return fail("crop window exceeds the canonical image".into());
            }
            let nested = self
                .crop_windows
                .windows(2)
                .all(|p| p[0].contains(&p[1]) && p[1].area() < p[0].area());
            let last = self.crop_windows[crops - 1];
            if !nested || !self.target_box.is_some_and(|t| last.contains(&t)) {
                return fail("crop windows must shrink strictly and end around the target".into());
            }
        }
        if self.task_type == TaskType::ErrorHandling && self.faulty_step.is_none() {
            return fail("error-handling task without a faulty step".into());
        }
        if self.correction().apply(&self.initial_image) != *self.canonical_image {
            return fail("required orientation tools do not restore the canonical image".into());
        }
        Ok(())
    }
}

pub(crate) fn orientation_composite(tools: &[ToolId]) -> Dihedral {
    tools
        .iter()
        .filter_map(ToolId::transform)
        .fold(Dihedral::IDENTITY, |acc, k| acc.then(k.dihedral()))
}
