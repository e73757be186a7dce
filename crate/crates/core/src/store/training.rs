//! Supervised training examples: the dialogue of a trajectory as role-tagged
//! segments, where only assistant text carries loss.

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::episode::{AgentAction, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    User,
    Assistant,
    ToolReturn,
}

/// A segment whose mask is 1 exactly for assistant text. The invariant is
/// enforced on construction and on deserialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSegment")]
pub struct TrainingSegment {
    role: Role,
    text: String,
    mask: u8,
}

#[derive(Deserialize)]
struct RawSegment {
    role: Role,
    text: String,
    mask: u8,
}

impl TryFrom<RawSegment> for TrainingSegment {
    type Error = String;

    fn try_from(raw: RawSegment) -> Result<Self, String> {
        let seg = TrainingSegment::new(raw.role, raw.text);
        if seg.mask != raw.mask {
            return Err(format!("{:?} segment with mask {} (expected {})", raw.role, raw.mask, seg.mask));
        }
        Ok(seg)
    }
}

impl TrainingSegment {
    pub fn new(role: Role, text: impl Into<String>) -> Self {
        Self {
            role,
            text: text.into(),
            mask: u8::from(role == Role::Assistant),
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn mask(&self) -> u8 {
        self.mask
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub task_id: String,
    pub segments: Vec<TrainingSegment>,
}

impl TrainingExample {
    /// The assistant actions in order; replaying them reproduces the trajectory.
    pub fn actions(&self) -> Vec<AgentAction> {
        self.segments
            .iter()
            .filter(|s| s.role == Role::Assistant)
            .map(|s| AgentAction::new(s.text.clone()))
            .collect()
    }
}

/// `[user prompt, assistant, tool-return, assistant, …]`. Feedback after the
/// final turn is omitted since the model never conditions on it.
pub fn to_training_example(traj: &Trajectory, prompt: &str) -> Result<TrainingExample, StoreError> {
    if !traj.is_terminated() {
        return Err(StoreError::NotTerminated(traj.task_id.clone()));
    }
    let mut segments = vec![TrainingSegment::new(Role::User, prompt)];
    for (i, turn) in traj.turns.iter().enumerate() {
        segments.push(TrainingSegment::new(Role::Assistant, turn.action.raw_text.clone()));
        if i + 1 < traj.turns.len() {
            segments.push(TrainingSegment::new(Role::ToolReturn, turn.feedback()));
        }
    }
    Ok(TrainingExample {
        task_id: traj.task_id.clone(),
        segments,
    })
}

/// Share of characters that carry loss.
pub fn mask_fraction(ex: &TrainingExample) -> f64 {
    let (mut on, mut all) = (0usize, 0usize);
    for s in &ex.segments {
        let n = s.text.chars().count();
        all += n;
        if s.mask == 1 {
            on += n;
        }
    }
    if all == 0 {
        0.0
    } else {
        on as f64 / all as f64
    }
}
