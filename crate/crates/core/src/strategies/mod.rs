//! Grasping skills: the common skill wrapper, the three tool-specific
//! strategies, the open-loop baseline and strategy selection.

mod baseline;
mod executor;
mod finger_a;
mod finger_b;
mod table;
mod telemetry;
mod vacuum_c;

pub use vacuum_c::{use_both_cups, MAX_REORIENTATIONS_BOTH, MAX_REORIENTATIONS_SINGLE, REORIENTATION_STEP};
pub use executor::{CommandRecord, Executor, Grip, DEFAULT_ALERT_CAP};
pub use table::*;
pub use telemetry::*;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::{ContactEvent, SelectionMatrices};
use crate::geometry::{desired_tcp_pose, Frame, ObjectEstimate, Wrench6};
use crate::world::{down, CloseStatus, GripperKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraspHints {
    pub initial_opening: Option<f64>,
    pub expect_rotary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspRequest {
    pub strategy: StrategyId,
    pub estimate: ObjectEstimate,
    pub expected_min_mass: f64,
    #[serde(default)]
    pub hints: GraspHints,
}

impl GraspRequest {
    pub fn new(strategy: StrategyId, estimate: ObjectEstimate, expected_min_mass: f64) -> Self {
        Self { strategy, estimate, expected_min_mass, hints: GraspHints::default() }
    }
}

/// Which body runs inside the tool-strategy phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Body {
    Strategy,
    Baseline,
}

type Step<T> = Result<T, FailureReason>;

/// Runs a grasp request with the strategy matching its gripper.
pub fn run_skill(req: &GraspRequest, exec: &mut Executor) -> GraspResult {
    run_with(req, exec, Body::Strategy)
}

/// Open-loop control condition: same wrapper, no force feedback inside.
pub fn baseline_skill(req: &GraspRequest, exec: &mut Executor) -> GraspResult {
    run_with(req, exec, Body::Baseline)
}

fn enter(exec: &mut Executor, phases: &mut Vec<SkillPhase>, phase: SkillPhase) {
    phases.push(phase);
    exec.set_phase(phase);
    exec.record(Event::PhaseStart);
}

fn run_with(req: &GraspRequest, exec: &mut Executor, body: Body) -> GraspResult {
    let mut phases = vec![];
    let outcome = match main_sequence(req, exec, body, &mut phases) {
        Ok(()) => Outcome::Succeeded,
        Err(FailureReason::SafetyAbort) => {
            abort(exec, &mut phases);
            Outcome::Failed(FailureReason::SafetyAbort)
        }
        Err(reason) => {
            exec.set_deadline(f64::INFINITY);
            enter(exec, &mut phases, SkillPhase::ReportFail);
            exec.record(Event::Failure { reason });
            match report_fail_and_return(exec, &mut phases) {
                Ok(()) => Outcome::Failed(reason),
                Err(_) => {
                    abort(exec, &mut phases);
                    Outcome::Failed(FailureReason::SafetyAbort)
                }
            }
        }
    };
    GraspResult { outcome, phases, telemetry: exec.take_telemetry() }
}

/// A safety stop ends the skill on the spot: report once and stay put.
fn abort(exec: &mut Executor, phases: &mut Vec<SkillPhase>) {
    if !phases.contains(&SkillPhase::ReportFail) {
        enter(exec, phases, SkillPhase::ReportFail);
    }
    exec.record(Event::SafetyStop);
    exec.record(Event::Failure { reason: FailureReason::SafetyAbort });
}

fn main_sequence(req: &GraspRequest, exec: &mut Executor, body: Body, phases: &mut Vec<SkillPhase>) -> Step<()> {
    let kind = req.strategy.gripper();
    if exec.world.gripper().kind != kind {
        enter(exec, phases, SkillPhase::ToolChange);
        exec.world.mount(kind);
        exec.record(Event::ToolMounted { gripper: kind });
    }
    enter(exec, phases, SkillPhase::MoveSafe);
    let speed = exec.cfg.free_speed;
    let safe = exec.world.safe_ee_pose();
    exec.move_to(&safe, speed)?;

    let plan = Plan::new(&req.estimate, exec)?;
    enter(exec, phases, SkillPhase::MovePrePose);
    exec.move_tcp(plan.rotation, plan.pre_point(&plan.center), speed)?;

    enter(exec, phases, SkillPhase::ToolStrategy);
    exec.set_deadline(exec.time() + exec.skill.timeout);
    let result = match (body, kind) {
        (Body::Baseline, _) => baseline::baseline_body(req, &plan, exec),
        (Body::Strategy, GripperKind::A) => finger_a::strategy_a(req, &plan, exec),
        (Body::Strategy, GripperKind::B) => finger_b::strategy_b(req, &plan, exec),
        (Body::Strategy, GripperKind::C) => vacuum_c::strategy_c(req, &plan, exec),
    };
    exec.set_deadline(f64::INFINITY);
    result?;

    enter(exec, phases, SkillPhase::Deliver);
    rise_to_safe_height(exec)?;
    let release = exec.skill.release_position;
    exec.move_tcp(down(), release, speed)?;
    match exec.world.deliver() {
        Some(id) => exec.record(Event::Delivered { id }),
        None => return Err(FailureReason::NothingGrasped),
    }
    if exec.world.gripper().is_finger() {
        let w = exec.world.gripper().max_opening;
        exec.open_to(w)?;
    }
    enter(exec, phases, SkillPhase::ReturnSafe);
    let safe = exec.world.safe_ee_pose();
    exec.move_to(&safe, speed)?;
    Ok(())
}

fn report_fail_and_return(exec: &mut Executor, phases: &mut Vec<SkillPhase>) -> Step<()> {
    release_gripper(exec)?;
    enter(exec, phases, SkillPhase::ReturnSafe);
    rise_to_safe_height(exec)?;
    let safe = exec.world.safe_ee_pose();
    let speed = exec.cfg.free_speed;
    exec.move_to(&safe, speed)?;
    Ok(())
}

fn release_gripper(exec: &mut Executor) -> Step<()> {
    if exec.world.gripper().is_finger() {
        let w = exec.world.gripper().max_opening;
        exec.open_to(w)?;
    } else if exec.world.vacuum_on() {
        exec.world.vacuum(false, &[]).map_err(|_| FailureReason::NothingGrasped)?;
    }
    Ok(())
}

/// Straight up (base z) to the safe pose's height, keeping the orientation.
fn rise_to_safe_height(exec: &mut Executor) -> Step<()> {
    let tcp = exec.tcp();
    let z = exec.skill.safe_position.z;
    if tcp.translation.z < z {
        let target = Vector3::new(tcp.translation.x, tcp.translation.y, z);
        let speed = exec.cfg.free_speed;
        exec.move_tcp(tcp.rotation, target, speed)?;
    }
    Ok(())
}

/// Goal geometry derived from the vision estimate.
#[derive(Clone, Debug)]
pub(crate) struct Plan {
    /// `^B R_TCP` at the goal.
    pub rotation: Matrix3<f64>,
    pub center: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub approach: Vector3<f64>,
    /// Finger closing axis (TCP x).
    pub closing: Vector3<f64>,
    pub d_safety: f64,
}

impl Plan {
    fn new(est: &ObjectEstimate, exec: &Executor) -> Step<Plan> {
        let goal = desired_tcp_pose(est).map_err(|_| FailureReason::NoContact)?;
        let r = goal.rotation;
        Ok(Plan {
            rotation: r,
            center: est.center,
            normal: est.normal.normalize(),
            approach: r.column(2).into(),
            closing: r.column(0).into(),
            d_safety: exec.world.gripper().d_safety,
        })
    }

    pub fn pre_point(&self, c: &Vector3<f64>) -> Vector3<f64> {
        c + self.normal * self.d_safety
    }
}

fn record_contact(exec: &mut Executor, ev: &ContactEvent, start: &Vector3<f64>, dir: &Vector3<f64>) {
    let travelled = (exec.tcp().translation - start).dot(dir);
    match ev {
        ContactEvent::Contact { .. } => exec.record(Event::Contact { travelled }),
        ContactEvent::NoContact { .. } => exec.record(Event::NoContact { travelled }),
    }
}

/// Closes the fingers while the TCP complies along x, y and about z.
///
/// Returns once both fingers hold the target force with a small finger force
/// difference and a small net FT force, or when closing cannot progress.
fn compliant_close(exec: &mut Executor, target: f64, tactile: bool) -> Step<CloseStatus> {
    let sel = SelectionMatrices::with_force_axes(&[2, 3, 4]);
    let params = exec.params_in(Frame::TCP, Wrench6::zero(Frame::TCP), Default::default());
    let ee_t_tcp = exec.world.gripper().tcp_pose();
    let dt = exec.cfg.dt;
    let small_diff = exec.skill.small_force_difference;
    let small_ft = exec.skill.small_ft_force;
    let (mut stalled, mut settled, mut gripped_for) = (0.0, 0usize, 0.0);
    loop {
        let status = exec.hybrid_tick(&sel, &params, &ee_t_tcp, Grip::Close(target))?.unwrap_or(CloseStatus::Met);
        match status {
            CloseStatus::Met => return Ok(status),
            CloseStatus::Closing => stalled = 0.0,
            CloseStatus::Stalled => {
                stalled += dt;
                if stalled > 0.5 {
                    return Ok(status);
                }
            }
            CloseStatus::Gripped => {
                gripped_for += dt;
                let diff_ok = !tactile
                    || exec
                        .world
                        .finger_pair()
                        .map(|p| crate::sensing::finger_force_difference(&p) < small_diff)
                        .unwrap_or(true);
                let f = exec.wrench().force;
                let ft_ok = (f.x * f.x + f.y * f.y).sqrt() < small_ft;
                settled = if diff_ok && ft_ok { settled + 1 } else { 0 };
                if settled >= 10 || gripped_for > 1.0 {
                    return Ok(status);
                }
            }
        }
    }
}

/// Guarded lift against the approach direction. Returns the pulling force
/// when the lift is resisted.
fn guarded_lift(exec: &mut Executor, plan: &Plan, distance: f64, expected_min_mass: f64) -> Step<Option<f64>> {
    let p = exec.world.params().clone();
    let threshold = p.f_pull + expected_min_mass * p.gravity;
    let up = -plan.approach;
    let speed = exec.cfg.approach_speed;
    match exec.guarded(&up, speed, threshold, distance)? {
        ContactEvent::Contact { wrench, pose, .. } => {
            let force = (pose.rotation * wrench.force).dot(&up);
            exec.record(Event::PullDetected { force });
            Ok(Some(force))
        }
        ContactEvent::NoContact { .. } => Ok(None),
    }
}

fn opening_for(req: &GraspRequest, exec: &Executor) -> f64 {
    let max = exec.world.gripper().max_opening;
    req.hints.initial_opening.map(|w| w.min(max)).unwrap_or(max)
}

fn require_weight(exec: &mut Executor, tare: f64, expected_min_mass: f64) -> Step<()> {
    if exec.weight_check(tare, expected_min_mass)?.passed {
        Ok(())
    } else {
        Err(FailureReason::WeightCheckFailed)
    }
}

/// Distance along the approach from the TCP back to the pre-pose plane.
fn depth_below_pre(exec: &Executor, plan: &Plan) -> f64 {
    (exec.tcp().translation - plan.pre_point(&plan.center)).dot(&plan.approach).max(0.0)
}

/// Clearance taken after a guarded contact before closing, m.
const BACK_OFF: f64 = 0.001;

fn back_off(exec: &mut Executor, plan: &Plan) -> Step<()> {
    let here = exec.tcp();
    let speed = exec.cfg.approach_speed;
    exec.move_tcp(here.rotation, here.translation - plan.approach * BACK_OFF, speed)?;
    Ok(())
}
