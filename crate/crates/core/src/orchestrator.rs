//! Task planner state machine and safety monitor.

use std::io::BufRead;
use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::PlannerError;
use crate::geometry::Twist6;
use crate::strategies::{run_skill, select_strategy, Executor, GraspRequest, GraspResult, Outcome};
use crate::world::NoiseModel;

/// Ordered so that the most restrictive status compares greatest.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SafetyStatus {
    #[default]
    Clear,
    /// A person is near: reduced speed.
    Alert,
    /// A person is inside the work area: halt.
    Stop,
}

impl SafetyStatus {
    fn to_u8(self) -> u8 {
        self as u8
    }

    fn from_u8(v: u8) -> Self {
        match v {
            0 => SafetyStatus::Clear,
            1 => SafetyStatus::Alert,
            _ => SafetyStatus::Stop,
        }
    }
}

/// A status report from one safety source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyEvent {
    pub t: f64,
    pub status: SafetyStatus,
}

/// Stop dominates Alert dominates Clear.
pub fn combine(statuses: impl IntoIterator<Item = SafetyStatus>) -> SafetyStatus {
    statuses.into_iter().max().unwrap_or_default()
}

/// Filters a commanded EE twist through the safety status.
///
/// Alert scales the whole twist uniformly so that no axis exceeds
/// `v_cap_alert` times its limit in `v_max`; Stop yields the zero twist.
pub fn apply_safety(status: SafetyStatus, cmd: &Twist6, v_cap_alert: f64, v_max: &Twist6) -> Twist6 {
    match status {
        SafetyStatus::Clear => cmd.clone(),
        SafetyStatus::Stop => Twist6::zero(cmd.frame.clone()),
        SafetyStatus::Alert => {
            let c = cmd.to_vector();
            let m = v_max.to_vector();
            let mut k: f64 = 1.0;
            for i in 0..6 {
                let cap = v_cap_alert * m[i].abs();
                if c[i].abs() > cap {
                    k = k.min(cap / c[i].abs());
                }
            }
            Twist6::from_vector(&(c * k), cmd.frame.clone())
        }
    }
}

/// Anything the control loop can poll for the latest safety status.
pub trait SafetySource: Send {
    fn status(&mut self, t: f64) -> SafetyStatus;
}

/// Always clear.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoHumans;

impl SafetySource for NoHumans {
    fn status(&mut self, _t: f64) -> SafetyStatus {
        SafetyStatus::Clear
    }
}

/// Replay of timestamped status events. The status holds from its timestamp
/// until the next event.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SafetyTrace {
    events: Vec<SafetyEvent>,
}

impl SafetyTrace {
    pub fn new(mut events: Vec<SafetyEvent>) -> Self {
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self { events }
    }

    pub fn events(&self) -> &[SafetyEvent] {
        &self.events
    }

    /// Reads one JSON `{t, status}` record per line.
    pub fn from_json_lines(r: impl BufRead) -> Result<Self, String> {
        let mut events = vec![];
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: SafetyEvent = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
            events.push(ev);
        }
        Ok(Self::new(events))
    }

    pub fn at(&self, t: f64) -> SafetyStatus {
        let i = self.events.partition_point(|e| e.t <= t);
        if i == 0 {
            SafetyStatus::Clear
        } else {
            self.events[i - 1].status
        }
    }
}

impl SafetySource for SafetyTrace {
    fn status(&mut self, t: f64) -> SafetyStatus {
        self.at(t)
    }
}

/// Lock-free status cell shared between a monitor thread and the control loop.
#[derive(Clone, Debug, Default)]
pub struct SafetyChannel {
    cell: Arc<AtomicU8>,
}

impl SafetyChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, status: SafetyStatus) {
        self.cell.store(status.to_u8(), Ordering::Release);
    }

    pub fn latest(&self) -> SafetyStatus {
        SafetyStatus::from_u8(self.cell.load(Ordering::Acquire))
    }
}

impl SafetySource for SafetyChannel {
    fn status(&mut self, _t: f64) -> SafetyStatus {
        self.latest()
    }
}

/// Several sources merged by dominance.
pub struct MergedSafety(pub Vec<Box<dyn SafetySource>>);

impl SafetySource for MergedSafety {
    fn status(&mut self, t: f64) -> SafetyStatus {
        combine(self.0.iter_mut().map(|s| s.status(t)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlannerState {
    Idle,
    AwaitVision,
    SelectStrategy,
    DispatchSkill,
    AwaitResult,
    ConfirmVision,
    CallHuman,
    Done,
}

/// What to do when vision disagrees with a successful skill report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictPolicy {
    /// Trust vision: treat the step as failed.
    PreferVision,
    /// Trust the skill: the step is done.
    PreferSkill,
    #[default]
    AlwaysHuman,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub max_retries: u32,
    pub conflict_policy: ConflictPolicy,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { max_retries: 2, conflict_policy: ConflictPolicy::AlwaysHuman }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlannerEvent {
    Start,
    VisionReady,
    StrategySelected,
    NoStrategy,
    Dispatched,
    SkillSucceeded,
    SkillFailed,
    VisionConfirmed,
    VisionConflict,
    HumanResolved,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlannerAction {
    RequestVision,
    SelectStrategy,
    /// Send the skill request; `reobserve` asks for a fresh vision estimate first.
    Dispatch { reobserve: bool },
    Wait,
    RequestConfirmation,
    CallHuman,
    Finish,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Planner {
    pub state: PlannerState,
    pub retry_count: u32,
}

impl Default for Planner {
    fn default() -> Self {
        Self { state: PlannerState::Idle, retry_count: 0 }
    }
}

/// One transition of the task planner.
pub fn planner_step(
    p: &Planner,
    event: PlannerEvent,
    cfg: &PlannerConfig,
) -> Result<(Planner, PlannerAction), PlannerError> {
    use PlannerAction as A;
    use PlannerEvent as E;
    use PlannerState as S;
    let go = |state, action| Ok((Planner { state, retry_count: p.retry_count }, action));
    let retry_or_human = || {
        if p.retry_count < cfg.max_retries {
            Ok((Planner { state: S::DispatchSkill, retry_count: p.retry_count + 1 }, A::Dispatch { reobserve: true }))
        } else {
            Ok((Planner { state: S::CallHuman, retry_count: p.retry_count }, A::CallHuman))
        }
    };
    match (p.state, event) {
        (S::Idle, E::Start) => go(S::AwaitVision, A::RequestVision),
        (S::AwaitVision, E::VisionReady) => go(S::SelectStrategy, A::SelectStrategy),
        (S::SelectStrategy, E::StrategySelected) => go(S::DispatchSkill, A::Dispatch { reobserve: false }),
        (S::SelectStrategy, E::NoStrategy) => go(S::CallHuman, A::CallHuman),
        (S::DispatchSkill, E::Dispatched) => go(S::AwaitResult, A::Wait),
        (S::AwaitResult, E::SkillSucceeded) => go(S::ConfirmVision, A::RequestConfirmation),
        (S::AwaitResult, E::SkillFailed) => retry_or_human(),
        (S::ConfirmVision, E::VisionConfirmed) => go(S::Done, A::Finish),
        (S::ConfirmVision, E::VisionConflict) => match cfg.conflict_policy {
            ConflictPolicy::PreferVision => retry_or_human(),
            ConflictPolicy::PreferSkill => go(S::Done, A::Finish),
            ConflictPolicy::AlwaysHuman => go(S::CallHuman, A::CallHuman),
        },
        (S::CallHuman, E::HumanResolved) => go(S::Done, A::Finish),
        (state, event) => Err(PlannerError::IllegalTransition {
            state: format!("{state:?}"),
            event: format!("{event:?}"),
        }),
    }
}

/// Summary of one planner-driven task.
#[derive(Clone, Debug)]
pub struct TaskReport {
    pub final_state: PlannerState,
    pub transitions: Vec<(PlannerState, PlannerEvent, PlannerState)>,
    pub attempts: Vec<GraspResult>,
}

/// Drives the planner for one target object: vision, strategy selection,
/// skill dispatch, retries with fresh vision draws, and confirmation.
pub struct TaskRunner<'a, R: Rng> {
    pub config: PlannerConfig,
    pub noise: NoiseModel,
    pub rng: &'a mut R,
}

impl<R: Rng> TaskRunner<'_, R> {
    pub fn run(&mut self, exec: &mut Executor, target: &str, expected_min_mass: f64) -> Result<TaskReport, PlannerError> {
        let mut planner = Planner::default();
        let mut transitions = vec![];
        let mut attempts = vec![];
        let mut estimate = None;
        let mut strategies = vec![];
        let mut event = PlannerEvent::Start;
        loop {
            let (next, action) = planner_step(&planner, event, &self.config)?;
            transitions.push((planner.state, event, next.state));
            planner = next;
            event = match action {
                PlannerAction::RequestVision => {
                    estimate = exec.world.observe(target, &self.noise, self.rng).ok();
                    PlannerEvent::VisionReady
                }
                PlannerAction::SelectStrategy => {
                    let props = exec.world.body(target).ok().and_then(|b| b.spec.props);
                    match props.map(|p| select_strategy(&p)) {
                        Some(Ok(list)) => {
                            strategies = list;
                            PlannerEvent::StrategySelected
                        }
                        _ => PlannerEvent::NoStrategy,
                    }
                }
                PlannerAction::Dispatch { reobserve } => {
                    if reobserve {
                        estimate = exec.world.observe(target, &self.noise, self.rng).ok();
                    }
                    let (Some(est), Some(&strategy)) = (estimate.clone(), strategies.first()) else {
                        return Ok(TaskReport { final_state: planner.state, transitions, attempts });
                    };
                    let (next, _) = planner_step(&planner, PlannerEvent::Dispatched, &self.config)?;
                    transitions.push((planner.state, PlannerEvent::Dispatched, next.state));
                    planner = next;
                    let req = GraspRequest::new(strategy, est, expected_min_mass);
                    let result = run_skill(&req, exec);
                    let ok = result.outcome == Outcome::Succeeded;
                    attempts.push(result);
                    if ok {
                        PlannerEvent::SkillSucceeded
                    } else {
                        PlannerEvent::SkillFailed
                    }
                }
                PlannerAction::RequestConfirmation => {
                    let gone = exec.world.body(target).map(|b| b.removed).unwrap_or(false);
                    if gone {
                        PlannerEvent::VisionConfirmed
                    } else {
                        PlannerEvent::VisionConflict
                    }
                }
                PlannerAction::CallHuman => PlannerEvent::HumanResolved,
                PlannerAction::Wait => unreachable!("dispatch is resolved synchronously"),
                PlannerAction::Finish => {
                    return Ok(TaskReport { final_state: planner.state, transitions, attempts });
                }
            };
        }
    }
}
