//! Multi-turn episodes: present a task, run tool programs from `<code>`
//! blocks against the working image, feed back results or error logs, and
//! stop on an `<answer>` or when the turn budget runs out.

mod action;
mod task;
mod view;

pub use action::{check_answer, normalize_answer, ActionKind, AgentAction};
pub use task::{InvalidTask, TaskSpec, TaskType};
pub use view::ViewTracker;

pub(crate) use task::orientation_composite;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Raster;
use crate::toolprog::{AppliedTool, ExecErrorKind, ExecOutcome, Interpreter};

pub const ANSWER_RECEIPT: &str = "ANSWER RECEIVED";
pub const FORMAT_ERROR: &str = "FORMAT ERROR: expected a <code> or <answer> block";

/// Execution result of a code turn, without the image (kept on the turn).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum StepOutcome {
    Ok {
        applied: Vec<AppliedTool>,
        log: String,
    },
    Error {
        kind: ExecErrorKind,
        message: String,
        line: usize,
        col: usize,
        applied_prefix: Vec<AppliedTool>,
    },
}

impl StepOutcome {
    pub fn from_exec(outcome: &ExecOutcome) -> Self {
        match outcome {
            ExecOutcome::Success { applied, log, .. } => StepOutcome::Ok {
                applied: applied.clone(),
                log: log.clone(),
            },
            ExecOutcome::Failure(f) => StepOutcome::Error {
                kind: f.kind,
                message: f.message.clone(),
                line: f.span.line,
                col: f.span.col,
                applied_prefix: f.applied_prefix.clone(),
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, StepOutcome::Ok { .. })
    }

    /// Calls whose effect was kept.
    pub fn applied(&self) -> &[AppliedTool] {
        match self {
            StepOutcome::Ok { applied, .. } => applied,
            StepOutcome::Error { .. } => &[],
        }
    }

    pub fn feedback(&self) -> String {
        match self {
            StepOutcome::Ok { applied, .. } => crate::toolprog::exec_format_ok(applied),
            StepOutcome::Error {
                kind,
                message,
                line,
                col,
                ..
            } => crate::toolprog::exec_format_error(*kind, message, *line, *col),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub action: AgentAction,
    /// Present iff the action was a code action.
    pub outcome: Option<StepOutcome>,
    pub image_after: Arc<Raster>,
}

impl Turn {
    pub fn is_code(&self) -> bool {
        self.outcome.is_some()
    }

    /// Text the environment returned for this turn.
    pub fn feedback(&self) -> String {
        match (&self.outcome, self.action.kind()) {
            (Some(o), _) => o.feedback(),
            (None, ActionKind::Answer(_)) => ANSWER_RECEIPT.to_string(),
            (None, _) => FORMAT_ERROR.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Answered,
    TurnBudgetExhausted,
    Aborted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub task_id: String,
    pub turns: Vec<Turn>,
    pub final_answer: Option<String>,
    /// `None` while the episode is still running.
    pub termination: Option<Termination>,
}

impl Trajectory {
    pub fn is_terminated(&self) -> bool {
        self.termination.is_some()
    }

    pub fn code_turns(&self) -> usize {
        self.turns.iter().filter(|t| t.is_code()).count()
    }

    pub fn failed_turns(&self) -> usize {
        self.turns
            .iter()
            .filter(|t| t.outcome.as_ref().is_some_and(|o| !o.is_ok()))
            .count()
    }

    /// Every successfully executed call, in order.
    pub fn executed(&self) -> impl Iterator<Item = &AppliedTool> {
        self.turns
            .iter()
            .filter_map(|t| t.outcome.as_ref())
            .flat_map(|o| o.applied())
    }
}

/// Every turn is `<think>…</think>` followed by exactly one `<code>` or
/// `<answer>` block.
pub fn format_ok(traj: &Trajectory) -> bool {
    traj.turns.iter().all(|t| t.action.well_formed())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub prompt: String,
    pub image: Arc<Raster>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub feedback: String,
    pub image: Arc<Raster>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EpisodeError {
    #[error("episode has already terminated")]
    EpisodeTerminated,
}

/// Builds episodes. Holds the interpreter (and thus the tool registry).
#[derive(Debug, Clone, Default)]
pub struct Environment {
    interp: Interpreter,
}

impl Environment {
    pub fn new(interp: Interpreter) -> Self {
        Self { interp }
    }

    pub fn interpreter(&self) -> &Interpreter {
        &self.interp
    }

    pub fn reset(&self, task: Arc<TaskSpec>) -> Result<Episode, InvalidTask> {
        task.validate()?;
        Ok(Episode {
            interp: self.interp.clone(),
            image: task.initial_image.clone(),
            traj: Trajectory {
                task_id: task.id.clone(),
                turns: Vec::new(),
                final_answer: None,
                termination: None,
            },
            task,
        })
    }

    /// Re-runs recorded actions from a fresh reset.
    pub fn replay(&self, task: Arc<TaskSpec>, actions: &[AgentAction]) -> Result<Trajectory, ReplayError> {
        let mut ep = self.reset(task)?;
        for a in actions {
            ep.step(a.clone())?;
        }
        Ok(ep.into_trajectory())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    InvalidTask(#[from] InvalidTask),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
}

/// One running episode. Single owner; step it until `done`.
#[derive(Debug, Clone)]
pub struct Episode {
    task: Arc<TaskSpec>,
    interp: Interpreter,
    image: Arc<Raster>,
    traj: Trajectory,
}

impl Episode {
    pub fn task(&self) -> &Arc<TaskSpec> {
        &self.task
    }

    pub fn observation(&self) -> Observation {
        Observation {
            prompt: render_prompt(&self.task, &self.interp),
            image: self.task.initial_image.clone(),
        }
    }

    pub fn image(&self) -> &Arc<Raster> {
        &self.image
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.traj
    }

    pub fn is_done(&self) -> bool {
        self.traj.is_terminated()
    }

    pub fn turns_left(&self) -> u32 {
        self.task.max_turns.saturating_sub(self.traj.turns.len() as u32)
    }

    pub fn abort(&mut self) {
        if !self.is_done() {
            self.traj.termination = Some(Termination::Aborted);
        }
    }

    pub fn step(&mut self, action: AgentAction) -> Result<StepResult, EpisodeError> {
        if self.is_done() {
            return Err(EpisodeError::EpisodeTerminated);
        }
        let (outcome, feedback) = match action.kind() {
            ActionKind::Answer(answer) => {
                self.traj.final_answer = Some(answer.trim().to_string());
                self.traj.termination = Some(Termination::Answered);
                (None, ANSWER_RECEIPT.to_string())
            }
            ActionKind::Code(source) => {
                let exec = self.interp.run(&source, &self.image);
                let feedback = exec.feedback();
                let step = StepOutcome::from_exec(&exec);
                if let ExecOutcome::Success { result, .. } = exec {
                    self.image = Arc::new(result);
                }
                (Some(step), feedback)
            }
            ActionKind::Malformed => (None, FORMAT_ERROR.to_string()),
        };
        self.traj.turns.push(Turn {
            action,
            outcome,
            image_after: self.image.clone(),
        });
        if !self.is_done() && self.traj.turns.len() as u32 >= self.task.max_turns {
            self.traj.termination = Some(Termination::TurnBudgetExhausted);
        }
        Ok(StepResult {
            feedback,
            image: self.image.clone(),
            done: self.is_done(),
        })
    }
}

/// The opening user message: question, tool list and the expected reply format.
pub fn render_prompt(task: &TaskSpec, interp: &Interpreter) -> String {
    format!(
        "{}\n\n{}\nReply with <think>reasoning</think> followed by either <code>tool program</code> \
         or <answer>final answer</answer>. You have {} turns.",
        task.question,
        interp.registry().doc(),
        task.max_turns
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{apply_transform, ToolId, TransformKind};

    fn canonical() -> Arc<Raster> {
        Arc::new(Raster::from_fn(8, 5, |x, y| [x as u8 * 30, y as u8 * 40, 9]))
    }

    fn task(s_req: Vec<ToolId>) -> Arc<TaskSpec> {
        let c = canonical();
        let corruption = task::orientation_composite(&s_req).inverse();
        Arc::new(TaskSpec {
            id: "ep".into(),
            question: "What does the sign say?".into(),
            initial_image: Arc::new(corruption.apply(&c)),
            canonical_image: c,
            gold_answer: "Busy Bees".into(),
            task_type: if s_req.is_empty() {
                TaskType::NoTool
            } else {
                TaskType::SingleTool
            },
            max_turns: TaskSpec::default_max_turns(&s_req),
            s_req,
            target_box: None,
            crop_windows: vec![],
            faulty_step: None,
        })
    }

    #[test]
    fn reset_observations() {
        let env = Environment::default();
        let ep = env.reset(task(vec![])).unwrap();
        assert_eq!(*ep.observation().image, *canonical());
        assert!(ep.observation().prompt.contains("crop(x0: int"));

        let ep = env.reset(task(vec![ToolId::Rotate180])).unwrap();
        assert_eq!(
            *ep.observation().image,
            apply_transform(&canonical(), TransformKind::Rot180)
        );

        let mut bad = (*task(vec![])).clone();
        bad.max_turns = 0;
        assert!(env.reset(Arc::new(bad)).is_err());
    }

    #[test]
    fn correction_restores_canonical() {
        let env = Environment::default();
        let mut ep = env.reset(task(vec![ToolId::Rotate180])).unwrap();
        let r = ep.step(AgentAction::code("upside down", "rotate180()")).unwrap();
        assert_eq!(*r.image, *canonical());
        assert_eq!(r.feedback, "EXEC OK applied=[rotate180]");
        assert!(!r.done);
    }

    #[test]
    fn failure_keeps_image_and_continues() {
        let env = Environment::default();
        let mut ep = env.reset(task(vec![ToolId::Rotate90])).unwrap();
        let before = ep.image().clone();
        let r = ep.step(AgentAction::code("oops", "rotate90(")).unwrap();
        assert!(r.feedback.starts_with("EXEC ERROR ParseError: unclosed '(' in call to 'rotate90'"));
        assert_eq!(r.image, before);
        assert!(!r.done);
        // a failing second call discards the successful first one
        let r = ep.step(AgentAction::code("again", "rotate90() | nope()")).unwrap();
        assert!(r.feedback.starts_with("EXEC ERROR UnknownTool"));
        assert_eq!(*r.image, *before);
        assert_eq!(ep.trajectory().failed_turns(), 2);
    }

    #[test]
    fn answer_terminates() {
        let env = Environment::default();
        let mut ep = env.reset(task(vec![])).unwrap();
        let r = ep.step(AgentAction::answer("easy", "busy bees")).unwrap();
        assert!(r.done);
        assert_eq!(ep.trajectory().termination, Some(Termination::Answered));
        assert_eq!(ep.trajectory().final_answer.as_deref(), Some("busy bees"));
        assert_eq!(
            ep.step(AgentAction::answer("", "x")).unwrap_err(),
            EpisodeError::EpisodeTerminated
        );
    }

    #[test]
    fn budget_exhaustion() {
        let env = Environment::default();
        let mut ep = env.reset(task(vec![ToolId::Rotate90])).unwrap();
        for i in 0..4 {
            let r = ep.step(AgentAction::code("", "grayscale()")).unwrap();
            assert_eq!(r.done, i == 3);
        }
        let t = ep.into_trajectory();
        assert_eq!(t.termination, Some(Termination::TurnBudgetExhausted));
        assert_eq!(t.final_answer, None);
        assert_eq!(t.code_turns(), 4);
    }

    #[test]
    fn malformed_turn_has_no_outcome() {
        let env = Environment::default();
        let mut ep = env.reset(task(vec![])).unwrap();
        let r = ep.step(AgentAction::new("hmm")).unwrap();
        assert_eq!(r.feedback, FORMAT_ERROR);
        assert!(!ep.trajectory().turns[0].is_code());
        assert!(!format_ok(ep.trajectory()));
    }

    #[test]
    fn format_checks() {
        let env = Environment::default();
        let mut ep = env.reset(task(vec![ToolId::Rotate90])).unwrap();
        ep.step(AgentAction::code("a", "rotate90()")).unwrap();
        ep.step(AgentAction::answer("b", "x")).unwrap();
        assert!(format_ok(ep.trajectory()));

        let mut ep = env.reset(task(vec![ToolId::Rotate90])).unwrap();
        ep.step(AgentAction::new("<think>a<code>rotate90()</code>")).unwrap();
        ep.step(AgentAction::answer("b", "x")).unwrap();
        assert!(!format_ok(ep.trajectory()));

        let mut ep = env.reset(task(vec![])).unwrap();
        ep.step(AgentAction::new("<think>b</think><answer>x</answer> done!")).unwrap();
        assert!(!format_ok(ep.trajectory()));
    }

    #[test]
    fn replay_is_deterministic() {
        let env = Environment::default();
        let t = task(vec![ToolId::Rotate90]);
        let actions = vec![
            AgentAction::code("", "flip-horizontal(axis=1)"),
            AgentAction::code("", "rotate90() | contrast()"),
            AgentAction::answer("", "Busy Bees"),
        ];
        let a = env.replay(t.clone(), &actions).unwrap();
        let b = env.replay(t, &actions).unwrap();
        assert_eq!(a, b);
        let feedback: Vec<_> = a.turns.iter().map(Turn::feedback).collect();
        assert_eq!(
            feedback,
            [
                "EXEC ERROR BadArgs: flip-horizontal: unexpected argument 'axis' at 1:1",
                "EXEC OK applied=[rotate90, contrast]",
                ANSWER_RECEIPT
            ]
        );
    }
}
