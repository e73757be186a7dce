//! Dense trajectory reward: outcome, must-use strategy credit, trajectory
//! match, group-inferred tool necessity, optional-tool bonus and penalties.
//!
//! Scoring is two-phase. [`score`] is pure per trajectory; once every
//! rollout of a task is scored, [`finalize_group`] assigns the necessity
//! bonus and updates totals.

mod config;

pub use config::{ConfigError, RewardConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{check_answer, format_ok, TaskSpec, Trajectory, ViewTracker};
use crate::raster::{iou, ToolCategory, ToolId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("trajectory for '{0}' has not terminated")]
    NotTerminated(String),
    #[error("task '{0}' has no required tools")]
    NoRequirement(String),
    #[error("trajectory is for task '{traj}', not '{task}'")]
    TaskMismatch { traj: String, task: String },
    #[error("group has {got} scored trajectories, expected {expected}")]
    IncompleteGroup { expected: usize, got: usize },
    #[error("group mixes tasks '{0}' and '{1}'")]
    MixedGroup(String, String),
}

/// One strategy credit: `amount` earned for `tool` at `turn` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCredit {
    pub tool: ToolId,
    pub turn: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Penalties {
    pub turn_limit: u8,
    pub poor_reasoning: u8,
    pub inappropriate_tool: u8,
}

impl Penalties {
    pub fn sum(&self) -> u8 {
        self.turn_limit + self.poor_reasoning + self.inappropriate_tool
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub task_id: String,
    pub r_acc: u8,
    pub r_fmt: u8,
    pub must_use_total: f64,
    pub ledger: Vec<ToolCredit>,
    pub traj_match: f64,
    pub nec_bonus: f64,
    pub opt_bonus: f64,
    pub penalties: Penalties,
    /// Whether a non-required enhancement tool was executed successfully;
    /// decides group membership for the necessity bonus.
    pub used_optional: bool,
    /// Best crop IoU against the target, if the task requires a crop.
    pub best_iou: Option<f64>,
    pub total: f64,
}

impl RewardBreakdown {
    /// Recombines the components under `cfg`.
    pub fn combine(&self, cfg: &RewardConfig) -> f64 {
        let outcome = f64::from(self.r_acc) + cfg.w_fmt * f64::from(self.r_fmt);
        let strategy =
            cfg.w_must * (self.must_use_total + self.traj_match) + cfg.w_sugg * (self.nec_bonus + self.opt_bonus);
        outcome + cfg.beta1 * strategy - cfg.beta2 * f64::from(self.penalties.sum())
    }
}

/// (r_acc, r_fmt) of a finished trajectory.
pub fn outcome_reward(traj: &Trajectory, task: &TaskSpec) -> Result<(u8, u8), RewardError> {
    if !traj.is_terminated() {
        return Err(RewardError::NotTerminated(traj.task_id.clone()));
    }
    let acc = traj
        .final_answer
        .as_deref()
        .is_some_and(|a| check_answer(a, &task.gold_answer));
    Ok((acc as u8, format_ok(traj) as u8))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MustUse {
    pub total: f64,
    pub ledger: Vec<ToolCredit>,
    /// Best crop IoU reached, if crop is required.
    pub best_iou: Option<f64>,
}

/// Strategy credit for required tools. Each of the `N` entries of `s_req`
/// carries a budget of 1/N. Categorical tools earn it at their first
/// successful execution; the crop entries earn it in proportion to the IoU
/// improvement over the best crop so far, measured in canonical
/// coordinates. Calls inside failed programs earn nothing.
pub fn must_use_reward(traj: &Trajectory, task: &TaskSpec) -> Result<MustUse, RewardError> {
    if task.s_req.is_empty() {
        return Err(RewardError::NoRequirement(task.id.clone()));
    }
    let n = task.s_req.len() as f64;
    let crops = task.s_req.iter().filter(|t| **t == ToolId::Crop).count();
    let crop_budget = crops as f64 / n;
    let mut pending: Vec<&ToolId> = task.s_req.iter().filter(|t| **t != ToolId::Crop).collect();
    let mut categorical = 0usize;
    let mut best = 0.0f64;
    let mut ledger = Vec::new();
    let mut view = ViewTracker::for_task(task);

    for (turn, t) in traj.turns.iter().enumerate() {
        let Some(outcome) = &t.outcome else { continue };
        for step in outcome.applied() {
            let region = view.apply(step);
            if step.tool == ToolId::Crop {
                let (Some(region), Some(target)) = (region, task.target_box) else {
                    continue;
                };
                let score = iou(&region, &target);
                if crops > 0 && score > best {
                    ledger.push(ToolCredit {
                        tool: ToolId::Crop,
                        turn,
                        amount: crop_budget * (score - best),
                    });
                    best = score;
                }
            } else if let Some(i) = pending.iter().position(|p| **p == step.tool) {
                pending.swap_remove(i);
                categorical += 1;
                ledger.push(ToolCredit {
                    tool: step.tool.clone(),
                    turn,
                    amount: 1.0 / n,
                });
            }
        }
    }
    // The crop increments telescope to budget·best; computing it directly
    // keeps totals exact for the common best = 1 case.
    let total = categorical as f64 / n + crop_budget * best;
    Ok(MustUse {
        total,
        ledger,
        best_iou: (crops > 0).then_some(best),
    })
}

/// True iff the successfully executed calls are exactly `s_req`, in order,
/// and no code turn failed.
pub fn traj_match(traj: &Trajectory, task: &TaskSpec) -> bool {
    if task.s_req.is_empty() || traj.failed_turns() > 0 {
        return false;
    }
    traj.executed().map(|a| &a.tool).eq(task.s_req.iter())
}

/// Whether a successfully executed call used an optional (enhancement) tool
/// outside `s_req`.
pub fn uses_optional(traj: &Trajectory, task: &TaskSpec) -> bool {
    traj.executed()
        .any(|a| a.tool.category() == ToolCategory::Enhancement && !task.requires(&a.tool))
}

pub fn penalties(
    traj: &Trajectory,
    task: &TaskSpec,
    r_acc: u8,
    best_iou: Option<f64>,
    cfg: &RewardConfig,
) -> Penalties {
    let budget = task.s_req.len() + 1;
    let turn_limit = traj.code_turns() > budget;
    let poor_reasoning = r_acc == 1 && best_iou.is_some_and(|b| b < cfg.iou_floor);
    let inappropriate_tool = task.s_req.is_empty() && traj.executed().any(|a| a.tool.is_orientation());
    Penalties {
        turn_limit: turn_limit as u8,
        poor_reasoning: poor_reasoning as u8,
        inappropriate_tool: inappropriate_tool as u8,
    }
}

/// Phase one: every component except the group necessity bonus.
pub fn score(traj: &Trajectory, task: &TaskSpec, cfg: &RewardConfig) -> Result<RewardBreakdown, RewardError> {
    if traj.task_id != task.id {
        return Err(RewardError::TaskMismatch {
            traj: traj.task_id.clone(),
            task: task.id.clone(),
        });
    }
    let (r_acc, r_fmt) = outcome_reward(traj, task)?;
    let must = if task.s_req.is_empty() {
        MustUse {
            total: 0.0,
            ledger: Vec::new(),
            best_iou: None,
        }
    } else {
        must_use_reward(traj, task)?
    };
    let used_optional = uses_optional(traj, task);
    let mut b = RewardBreakdown {
        task_id: task.id.clone(),
        r_acc,
        r_fmt,
        must_use_total: must.total,
        ledger: must.ledger,
        traj_match: if traj_match(traj, task) { cfg.traj_match_bonus } else { 0.0 },
        nec_bonus: 0.0,
        opt_bonus: if used_optional && r_acc == 1 { cfg.optional_tool_bonus } else { 0.0 },
        penalties: penalties(traj, task, r_acc, must.best_iou, cfg),
        used_optional,
        best_iou: must.best_iou,
        total: 0.0,
    };
    b.total = b.combine(cfg);
    Ok(b)
}

/// Partition of one task's rollouts by optional-tool use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub k: usize,
    pub tool_size: usize,
    pub tool_successes: usize,
    pub notool_size: usize,
    pub notool_successes: usize,
}

impl GroupStats {
    pub fn from_breakdowns(group: &[RewardBreakdown], group_k: usize) -> Result<Self, RewardError> {
        if group.len() != group_k {
            return Err(RewardError::IncompleteGroup {
                expected: group_k,
                got: group.len(),
            });
        }
        if let Some(b) = group.iter().find(|b| b.task_id != group[0].task_id) {
            return Err(RewardError::MixedGroup(group[0].task_id.clone(), b.task_id.clone()));
        }
        let mut s = GroupStats {
            k: group_k,
            tool_size: 0,
            tool_successes: 0,
            notool_size: 0,
            notool_successes: 0,
        };
        for b in group {
            let ok = usize::from(b.r_acc);
            if b.used_optional {
                s.tool_size += 1;
                s.tool_successes += ok;
            } else {
                s.notool_size += 1;
                s.notool_successes += ok;
            }
        }
        Ok(s)
    }

    pub fn successes(&self) -> usize {
        self.tool_successes + self.notool_successes
    }
}

/// Inferred tool necessity: the accuracy gap between tool-using and
/// non-tool-using rollouts, granted only when the tool group does strictly
/// better and the no-tool group has at most one success.
pub fn necessity_reward(g: &GroupStats) -> f64 {
    if g.tool_size == 0 || g.notool_size == 0 {
        return 0.0;
    }
    let tool = g.tool_successes as f64 / g.tool_size as f64;
    let notool = g.notool_successes as f64 / g.notool_size as f64;
    if tool > notool && g.notool_successes <= 1 {
        (tool - notool).max(0.0)
    } else {
        0.0
    }
}

/// Phase two: adds r_nec to every successful tool-using rollout and
/// refreshes totals.
pub fn finalize_group(group: &mut [RewardBreakdown], cfg: &RewardConfig) -> Result<GroupStats, RewardError> {
    let stats = GroupStats::from_breakdowns(group, cfg.group_k)?;
    let r_nec = necessity_reward(&stats);
    for b in group.iter_mut() {
        b.nec_bonus = if b.used_optional && b.r_acc == 1 { r_nec } else { 0.0 };
        b.total = b.combine(cfg);
    }
    Ok(stats)
}
