//! Scripted agents. They read task metadata directly (they are fixtures,
//! not solvers) so rewards of their trajectories have closed forms.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::datagen::{difficulty_filter, GenError, LEXICON};
use crate::episode::{AgentAction, Environment, InvalidTask, TaskSpec, Trajectory, ViewTracker};
use crate::raster::{detect_transform, BBox, Raster, ToolId, TransformKind};
use crate::reward::{finalize_group, score, GroupStats, RewardBreakdown, RewardConfig, RewardError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Oracle,
    TrialAndError,
    RewardHacker,
    Clumsy,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Oracle,
        PolicyKind::TrialAndError,
        PolicyKind::RewardHacker,
        PolicyKind::Clumsy,
        PolicyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Oracle => "oracle",
            PolicyKind::TrialAndError => "trial-and-error",
            PolicyKind::RewardHacker => "reward-hacker",
            PolicyKind::Clumsy => "clumsy",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown policy '{s}' (expected one of: {})", names.join(", "))
            })
    }
}

/// Forces the final answer regardless of what the policy would say.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerMode {
    Gold,
    Wrong,
}

pub const WRONG_ANSWER: &str = "I cannot read it";

/// Program appended (with `|`) to the first code turn of a policy.
pub const GRAYSCALE: &str = "grayscale()";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub kind: PolicyKind,
    pub seed: u64,
    /// Optional tool program piped after the first step (or run alone on
    /// tasks without required tools).
    pub extra: Option<String>,
    pub answer: Option<AnswerMode>,
}

impl Policy {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            seed: 0,
            extra: None,
            answer: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_extra(mut self, program: &str) -> Self {
        self.extra = Some(program.to_string());
        self
    }

    pub fn with_answer(mut self, mode: AnswerMode) -> Self {
        self.answer = Some(mode);
        self
    }

    /// The next action given the turns so far. Pure in (self, task, history).
    pub fn act(&self, task: &TaskSpec, history: &Trajectory) -> AgentAction {
        match self.kind {
            PolicyKind::Oracle => self.oracle(task, history, 0),
            PolicyKind::TrialAndError => self.trial_and_error(task, history),
            PolicyKind::RewardHacker => self.hacker(task, history),
            PolicyKind::Clumsy => self.clumsy(task, history),
            PolicyKind::Random => self.random(task, history),
        }
    }

    fn answer(&self, task: &TaskSpec, natural_ok: bool, think: &str) -> AgentAction {
        let ok = match self.answer {
            Some(AnswerMode::Gold) => true,
            Some(AnswerMode::Wrong) => false,
            None => natural_ok,
        };
        AgentAction::answer(think, if ok { &task.gold_answer } else { WRONG_ANSWER })
    }

    fn with_first_extra(&self, program: String, history: &Trajectory) -> String {
        match &self.extra {
            Some(extra) if history.code_turns() == 0 => format!("{program} | {extra}"),
            _ => program,
        }
    }

    /// Executes `s_req` one entry per turn, then answers. `skip` successful
    /// turns at the start of the history are not counted as progress.
    fn oracle(&self, task: &TaskSpec, history: &Trajectory, skip: usize) -> AgentAction {
        let progress = successful_turns(history).saturating_sub(skip);
        if let Some(step) = task.s_req.get(progress) {
            let view = tracker(task, history);
            let program = match step {
                ToolId::Crop => crop_program(&view, crop_window(task, progress)),
                t => format!("{t}()"),
            };
            let program = self.with_first_extra(program, history);
            return AgentAction::code(&format!("Required step {} of {}: {step}.", progress + 1, task.s_req.len()), &program);
        }
        if task.s_req.is_empty() && history.code_turns() == 0 {
            if let Some(extra) = &self.extra {
                return AgentAction::code("An optional enhancement may help.", extra);
            }
        }
        self.answer(task, true, "The image is ready to read.")
    }

    /// Rotates by 90°, 180°, 270° in turn until the working image matches
    /// the canonical one, then crops if needed and answers.
    fn trial_and_error(&self, task: &TaskSpec, history: &Trajectory) -> AgentAction {
        const CYCLE: [ToolId; 3] = [ToolId::Rotate90, ToolId::Rotate180, ToolId::Rotate270];
        let current = current_image(task, history);
        let crops_done = history.executed().filter(|a| a.tool == ToolId::Crop).count();
        let upright = crops_done > 0 || is_canonical(&task.canonical_image, &current);
        if !upright {
            let tried = successful_turns(history);
            return match CYCLE.get(tried) {
                Some(t) => AgentAction::code("Try another rotation.", &self.with_first_extra(format!("{t}()"), history)),
                None => self.answer(task, false, "No rotation makes it readable."),
            };
        }
        let crops_needed = task.s_req.iter().filter(|t| **t == ToolId::Crop).count();
        if crops_done < crops_needed {
            let view = tracker(task, history);
            let idx = task.s_req.len() - crops_needed + crops_done;
            let program = self.with_first_extra(crop_program(&view, crop_window(task, idx)), history);
            return AgentAction::code("Zoom in on the text.", &program);
        }
        if history.code_turns() == 0 {
            if let Some(extra) = &self.extra {
                return AgentAction::code("An optional enhancement may help.", extra);
            }
        }
        self.answer(task, true, "Upright now.")
    }

    /// Solves the task, then keeps rotating until one turn is left and
    /// answers from whatever orientation it ends up in.
    fn hacker(&self, task: &TaskSpec, history: &Trajectory) -> AgentAction {
        if successful_turns(history) < task.s_req.len() {
            return self.oracle(task, history, 0);
        }
        let turns_left = task.max_turns as usize - history.turns.len();
        if turns_left > 1 {
            return AgentAction::code("More tool calls cannot hurt.", "rotate90()");
        }
        let upright = tracker(task, history).orientation().is_identity();
        self.answer(task, upright, "Answering now.")
    }

    /// Starts with a failing call (the task's scripted faulty step when it
    /// has one), reads the error, then proceeds like the oracle.
    fn clumsy(&self, task: &TaskSpec, history: &Trajectory) -> AgentAction {
        let Some(first) = history.turns.first() else {
            let faulty = task
                .faulty_step
                .clone()
                .unwrap_or_else(|| "flip-horizontal(direction=\"cw\")".to_string());
            return AgentAction::code("Flip it first.", &faulty);
        };
        // a faulty step that unexpectedly worked counts as progress
        let skip = usize::from(first.outcome.as_ref().is_some_and(|o| o.is_ok()));
        self.oracle(task, history, skip)
    }

    fn random(&self, task: &TaskSpec, history: &Trajectory) -> AgentAction {
        let mut rng = turn_rng(self.seed, &task.id, history.turns.len());
        let turns_left = task.max_turns as usize - history.turns.len();
        if turns_left <= 1 || rng.gen_bool(0.3) {
            let words: Vec<&str> = (0..rng.gen_range(1..=2))
                .map(|_| *LEXICON.choose(&mut rng).unwrap())
                .collect();
            return AgentAction::answer("Guessing.", &words.join(" "));
        }
        let (w, h) = current_image(task, history).dims();
        let calls: Vec<String> = (0..rng.gen_range(1..=2)).map(|_| random_call(&mut rng, w, h)).collect();
        AgentAction::code("Trying something.", &calls.join(" | "))
    }
}

fn random_call<R: Rng>(rng: &mut R, w: u32, h: u32) -> String {
    let tool = &ToolId::BUILTIN[rng.gen_range(0..ToolId::BUILTIN.len())];
    match tool {
        ToolId::Crop => {
            let x0 = rng.gen_range(0..=w as i64 + 4);
            let y0 = rng.gen_range(0..=h as i64 + 4);
            format!(
                "crop(x0={x0}, y0={y0}, x1={}, y1={})",
                x0 + rng.gen_range(-2..=w as i64),
                y0 + rng.gen_range(-2..=h as i64)
            )
        }
        ToolId::Brightness | ToolId::Contrast => format!("{tool}(factor={:.2})", rng.gen_range(-0.5..2.5)),
        ToolId::Blur => format!("blur(radius={})", rng.gen_range(0..6)),
        _ if rng.gen_bool(0.1) => format!("{tool}(strength=2)"),
        _ => format!("{tool}()"),
    }
}

fn turn_rng(seed: u64, task_id: &str, turn: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(task_id.as_bytes());
    h.update((turn as u64).to_le_bytes());
    let digest = h.finalize();
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(digest[..8].try_into().unwrap()))
}

fn successful_turns(history: &Trajectory) -> usize {
    history
        .turns
        .iter()
        .filter(|t| t.outcome.as_ref().is_some_and(|o| o.is_ok()))
        .count()
}

fn tracker(task: &TaskSpec, history: &Trajectory) -> ViewTracker {
    let mut view = ViewTracker::for_task(task);
    for step in history.executed() {
        view.apply(step);
    }
    view
}

fn current_image(task: &TaskSpec, history: &Trajectory) -> Arc<Raster> {
    history
        .turns
        .last()
        .map_or_else(|| task.initial_image.clone(), |t| t.image_after.clone())
}

fn is_canonical(canonical: &Raster, current: &Raster) -> bool {
    detect_transform(canonical, current).contains(&TransformKind::Identity)
}

/// Canonical-coordinate window for the crop at `s_req[index]`.
fn crop_window(task: &TaskSpec, index: usize) -> BBox {
    let nth = task.s_req[..index].iter().filter(|t| **t == ToolId::Crop).count();
    task.crop_windows
        .get(nth)
        .copied()
        .or(task.target_box)
        .expect("crop tasks carry a target box")
}

fn crop_program(view: &ViewTracker, window: BBox) -> String {
    let b = view
        .to_view(&window)
        .expect("the planned window stays inside the working image");
    format!("crop(x0={}, y0={}, x1={}, y1={})", b.x0, b.y0, b.x1, b.y1)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error(transparent)]
    InvalidTask(#[from] InvalidTask),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("a group needs {expected} policies, got {got}")]
    GroupSize { expected: usize, got: usize },
}

/// Runs one episode to termination.
pub fn rollout(env: &Environment, policy: &Policy, task: &Arc<TaskSpec>) -> Result<Trajectory, InvalidTask> {
    let mut ep = env.reset(task.clone())?;
    while !ep.is_done() {
        let action = policy.act(task, ep.trajectory());
        ep.step(action).expect("episode is live");
    }
    Ok(ep.into_trajectory())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRollout {
    pub trajectories: Vec<Trajectory>,
    pub breakdowns: Vec<RewardBreakdown>,
    pub stats: GroupStats,
}

/// One rollout per policy (`cfg.group_k` of them), scored and finalized as
/// a group.
pub fn rollout_group(
    env: &Environment,
    policies: &[Policy],
    task: &Arc<TaskSpec>,
    cfg: &RewardConfig,
) -> Result<GroupRollout, PolicyError> {
    if policies.len() != cfg.group_k {
        return Err(PolicyError::GroupSize {
            expected: cfg.group_k,
            got: policies.len(),
        });
    }
    let trajectories = policies
        .iter()
        .map(|p| rollout(env, p, task))
        .collect::<Result<Vec<_>, _>>()?;
    let mut breakdowns = trajectories
        .iter()
        .map(|t| score(t, task, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = finalize_group(&mut breakdowns, cfg)?;
    Ok(GroupRollout {
        trajectories,
        breakdowns,
        stats,
    })
}

/// The default rollout mix for RL filtering: a spread of competent and
/// weak policies, so easy and hard items separate.
pub fn default_mix(k: usize, seed: u64) -> Vec<Policy> {
    (0..k)
        .map(|i| match i % 4 {
            0 => Policy::new(PolicyKind::TrialAndError),
            1 => Policy::new(PolicyKind::Clumsy),
            _ => Policy::new(PolicyKind::Random).with_seed(seed.wrapping_add(i as u64)),
        })
        .collect()
}

/// Keeps tasks whose group has at least one success and one failure.
pub fn rl_filter(
    env: &Environment,
    task: &Arc<TaskSpec>,
    mix: &[Policy],
    cfg: &RewardConfig,
) -> Result<(bool, GroupRollout), PolicyError> {
    let group = rollout_group(env, mix, task, cfg)?;
    let results: Vec<bool> = group.breakdowns.iter().map(|b| b.r_acc == 1).collect();
    Ok((difficulty_filter(&results)?, group))
}
