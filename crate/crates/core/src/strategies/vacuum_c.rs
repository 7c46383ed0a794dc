//! Vacuum gripper: cup selection from the estimated dimensions, compliant
//! seating, and 45° reorientations between attempts.

use nalgebra::{Vector3, Vector6};

use super::{
    depth_below_pre, guarded_lift, record_contact, Event, Executor, FailureReason, GraspRequest, Grip, Pivot, Plan,
    Step,
};
use crate::control::SelectionMatrices;
use crate::geometry::{rotation_about, so3_log, Frame, Pose, Wrench6};

/// Rotation between successive attempts.
pub const REORIENTATION_STEP: f64 = std::f64::consts::FRAC_PI_4;
/// Reorientations allowed about the center with both cups in use.
pub const MAX_REORIENTATIONS_BOTH: usize = 3;
/// Reorientations allowed about a single selected cup.
pub const MAX_REORIENTATIONS_SINGLE: usize = 7;

/// Cup selection: both cups when the surface accommodates their footprint.
pub fn use_both_cups(long_dim: f64, spacing: f64, diameter: f64) -> bool {
    long_dim >= spacing + diameter
}

pub(super) fn strategy_c(req: &GraspRequest, plan: &Plan, exec: &mut Executor) -> Step<()> {
    let g = exec.world.gripper().clone();
    let centers = g.cup_centers();
    let both = centers.len() > 1 && use_both_cups(req.estimate.long_dim(), g.cup_spacing, g.cup_diameter);
    let (cups, pivot, about, cup_offset, max_rotations) = if both {
        (vec![true; centers.len()], plan.center, Pivot::Center, Vector3::zeros(), MAX_REORIENTATIONS_BOTH)
    } else {
        let mut mask = vec![false; centers.len()];
        mask[0] = true;
        (mask, plan.center, Pivot::Cup, centers[0], MAX_REORIENTATIONS_SINGLE)
    };
    exec.record(Event::CupMode { cups: cups.iter().filter(|&&c| c).count() });

    let mut rotation = plan.rotation;
    let mut target = pivot - rotation * cup_offset;
    let speed = exec.cfg.free_speed;
    exec.move_tcp(rotation, plan.pre_point(&target), speed)?;
    let tare = exec.tare()?;
    let m = req.expected_min_mass;
    let mut k = 0;
    loop {
        if attempt(plan, &target, &cups, &cup_offset, exec, tare, m)? {
            return Ok(());
        }
        if k >= max_rotations {
            return Err(FailureReason::WeightCheckFailed);
        }
        let turn = rotation_about(&plan.approach, REORIENTATION_STEP);
        let before = exec.tcp().rotation;
        rotation = turn * rotation;
        target = pivot + turn * (target - pivot);
        exec.move_tcp(rotation, plan.pre_point(&target), speed)?;
        let angle = so3_log(&(exec.tcp().rotation * before.transpose())).norm();
        exec.record(Event::Reorientation { angle, about });
        k += 1;
    }
}

/// Descend, seat, seal, lift and check. On failure the vacuum is released
/// and the tool returns to the pre-pose.
fn attempt(
    plan: &Plan,
    target: &Vector3<f64>,
    cups: &[bool],
    cup_offset: &Vector3<f64>,
    exec: &mut Executor,
    tare: f64,
    m: f64,
) -> Step<bool> {
    let rotation = exec.tcp().rotation;
    let start = exec.tcp().translation;
    let reach = 2.0 * plan.d_safety;
    let (approach, threshold) = (exec.cfg.approach_speed, exec.cfg.contact_threshold);
    let ev = exec.guarded(&plan.approach, approach, threshold, reach)?;
    record_contact(exec, &ev, &start, &plan.approach);
    if ev.is_contact() {
        seat(exec, cup_offset)?;
    }
    let sealed = exec.world.vacuum(true, cups).map_err(|_| FailureReason::NothingGrasped)?;
    exec.record(Event::Seal { sealed });
    if sealed {
        let dist = depth_below_pre(exec, plan).max(exec.skill.lift_height);
        if guarded_lift(exec, plan, dist, m)?.is_none() && exec.weight_check(tare, m)?.passed {
            return Ok(true);
        }
    }
    exec.world.vacuum(false, &[]).map_err(|_| FailureReason::NothingGrasped)?;
    exec.move_tcp(rotation, plan.pre_point(target), approach)?;
    Ok(false)
}

/// Presses the cups on with a set force, compliant in tilt so the rims
/// align with the surface.
fn seat(exec: &mut Executor, cup_offset: &Vector3<f64>) -> Step<()> {
    let frame = Frame::new("Cup");
    let tcp = exec.world.gripper().tcp_pose();
    let ee_t_cup = tcp
        .compose(&Pose::from_translation(*cup_offset, Frame::TCP, frame.clone()))
        .expect("frames chain");
    let press = exec.skill.cup_press_force;
    let desired = Wrench6::new(Vector3::new(0.0, 0.0, press), Vector3::zeros(), frame.clone());
    let sel = SelectionMatrices::with_force_axes(&[0, 1, 5]);
    let params = exec.params_in(frame, desired, Vector6::zeros());
    let dt = exec.cfg.dt;
    let mut settled = 0;
    let mut t = 0.0;
    while t < 1.5 && settled < 20 {
        exec.hybrid_tick(&sel, &params, &ee_t_cup, Grip::Hold)?;
        let w = exec.wrench_in(&ee_t_cup);
        let ok = (w.force.z - press).abs() < 0.5 && w.torque.x.abs() < 0.05 && w.torque.y.abs() < 0.05;
        settled = if ok { settled + 1 } else { 0 };
        t += dt;
    }
    Ok(())
}
