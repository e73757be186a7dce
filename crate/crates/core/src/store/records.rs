//! Serializable forms of tasks, trajectories and diagnostic items. Images
//! are replaced by [`ImageRef`]s into the store.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ImageRef, ImageStore, StoreError};
use crate::datagen::DiagnosticItem;
use crate::episode::{AgentAction, StepOutcome, TaskSpec, TaskType, Termination, Trajectory, Turn};
use crate::raster::{BBox, ToolId, TransformKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub question: String,
    pub initial_image: ImageRef,
    pub canonical_image: ImageRef,
    pub gold_answer: String,
    pub task_type: TaskType,
    pub s_req: Vec<ToolId>,
    pub target_box: Option<BBox>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub crop_windows: Vec<BBox>,
    pub max_turns: u32,
    pub faulty_step: Option<String>,
}

impl TaskRecord {
    pub fn store(task: &TaskSpec, images: &ImageStore) -> Result<Self, StoreError> {
        Ok(Self {
            id: task.id.clone(),
            question: task.question.clone(),
            initial_image: images.put(&task.initial_image)?,
            canonical_image: images.put(&task.canonical_image)?,
            gold_answer: task.gold_answer.clone(),
            task_type: task.task_type,
            s_req: task.s_req.clone(),
            target_box: task.target_box,
            crop_windows: task.crop_windows.clone(),
            max_turns: task.max_turns,
            faulty_step: task.faulty_step.clone(),
        })
    }

    /// Loads images (verifying checksums) and re-validates the task.
    pub fn load(&self, images: &ImageStore) -> Result<TaskSpec, StoreError> {
        let task = TaskSpec {
            id: self.id.clone(),
            question: self.question.clone(),
            initial_image: images.get(&self.initial_image)?,
            canonical_image: images.get(&self.canonical_image)?,
            gold_answer: self.gold_answer.clone(),
            task_type: self.task_type,
            s_req: self.s_req.clone(),
            target_box: self.target_box,
            crop_windows: self.crop_windows.clone(),
            max_turns: self.max_turns,
            faulty_step: self.faulty_step.clone(),
        };
        task.validate().map_err(|e| StoreError::Invalid(e.to_string()))?;
        Ok(task)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub action: AgentAction,
    pub outcome: Option<StepOutcome>,
    pub image_after: ImageRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub task_id: String,
    /// Name of the policy that produced the trajectory, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    pub turns: Vec<TurnRecord>,
    pub final_answer: Option<String>,
    pub termination: Option<Termination>,
}

impl TrajectoryRecord {
    pub fn store(traj: &Trajectory, policy: Option<&str>, images: &ImageStore) -> Result<Self, StoreError> {
        let turns = traj
            .turns
            .iter()
            .map(|t| {
                Ok(TurnRecord {
                    action: t.action.clone(),
                    outcome: t.outcome.clone(),
                    image_after: images.put(&t.image_after)?,
                })
            })
            .collect::<Result<_, StoreError>>()?;
        Ok(Self {
            task_id: traj.task_id.clone(),
            policy: policy.map(str::to_string),
            turns,
            final_answer: traj.final_answer.clone(),
            termination: traj.termination,
        })
    }

    pub fn load(&self, images: &ImageStore) -> Result<Trajectory, StoreError> {
        let turns = self
            .turns
            .iter()
            .map(|t| {
                Ok(Turn {
                    action: t.action.clone(),
                    outcome: t.outcome.clone(),
                    image_after: images.get(&t.image_after)?,
                })
            })
            .collect::<Result<_, StoreError>>()?;
        Ok(Trajectory {
            task_id: self.task_id.clone(),
            turns,
            final_answer: self.final_answer.clone(),
            termination: self.termination,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub id: String,
    pub prompt: String,
    pub source_image: ImageRef,
    pub image: ImageRef,
    pub options: Vec<TransformKind>,
    pub gold: TransformKind,
    pub gold_letter: char,
}

impl DiagnosticRecord {
    pub fn store(item: &DiagnosticItem, source: &Arc<crate::raster::Raster>, images: &ImageStore) -> Result<Self, StoreError> {
        Ok(Self {
            id: item.id.clone(),
            prompt: item.prompt(),
            source_image: images.put(source)?,
            image: images.put(&item.image)?,
            options: crate::datagen::DIAGNOSTIC_OPTIONS.to_vec(),
            gold: item.transform,
            gold_letter: item.gold_letter(),
        })
    }
}
