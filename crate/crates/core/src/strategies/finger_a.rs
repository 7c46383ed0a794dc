//! Tactile finger gripper: compliant closing, fingertip re-advance and
//! rotation about the center of pressure to free rotary fixtures.

use nalgebra::Vector6;

use super::{
    back_off, compliant_close, depth_below_pre, guarded_lift, opening_for, record_contact, require_weight, Event, Executor,
    FailureReason, GraspRequest, Grip, Plan, Step,
};
use crate::control::SelectionMatrices;
use crate::geometry::{Frame, Pose, Wrench6};
use crate::sensing::{combined_cop, cop_at_tip, cop_frame, CoP};
use crate::world::CloseStatus;

pub(super) fn strategy_a(req: &GraspRequest, plan: &Plan, exec: &mut Executor) -> Step<()> {
    let tare = exec.tare()?;
    let opening = opening_for(req, exec);
    exec.open_to(opening)?;

    let start = exec.tcp().translation;
    let reach = plan.d_safety + exec.world.gripper().grasp_depth + exec.skill.overshoot;
    let (speed, threshold) = (exec.cfg.approach_speed, exec.cfg.contact_threshold);
    let ev = exec.guarded(&plan.approach, speed, threshold, reach)?;
    record_contact(exec, &ev, &start, &plan.approach);
    if ev.is_contact() {
        back_off(exec, plan)?;
    }

    grasp_with_advances(plan, exec)?;
    let grasp_pose = exec.world.ee_pose().clone();
    let m = req.expected_min_mass;
    let dist = depth_below_pre(exec, plan).max(exec.skill.lift_height);
    if guarded_lift(exec, plan, dist, m)?.is_none() {
        return require_weight(exec, tare, m);
    }
    exec.move_to(&grasp_pose, speed)?;
    loop {
        if rotate_until_free(exec, plan, m)? {
            let dist = depth_below_pre(exec, plan).max(exec.skill.lift_height);
            if guarded_lift(exec, plan, dist, m)?.is_none() {
                return require_weight(exec, tare, m);
            }
        }
        regrip(exec, &grasp_pose)?;
    }
}

/// Closes, checks the CoP and re-advances by a fixed step while the object
/// sits only at the fingertips.
fn grasp_with_advances(plan: &Plan, exec: &mut Executor) -> Step<()> {
    let max_opening = exec.world.gripper().max_opening;
    let mut advances = 0;
    loop {
        let force = exec.skill.grip_force;
        let start = exec.tcp();
        let status = compliant_close(exec, force, true)?;
        let held = match status {
            CloseStatus::Met => None,
            _ => exec.world.finalize_grasp().ok(),
        };
        exec.record(Event::Grasp { held: held.clone() });
        let (pad_contact, at_tip) = cop_check(exec);
        exec.record(Event::CopCheck { pad_contact, at_tip });
        if held.is_some() && pad_contact && !at_tip {
            return Ok(());
        }
        if advances >= exec.skill.max_advances {
            return match held {
                Some(_) => Ok(()),
                None => Err(FailureReason::NothingGrasped),
            };
        }
        let width = match status {
            CloseStatus::Met => max_opening,
            _ => (exec.world.opening() + 0.01).min(max_opening),
        };
        exec.open_to(width)?;
        let before = match status {
            CloseStatus::Met => start,
            _ => exec.tcp(),
        };
        let target = before.translation + plan.approach * exec.skill.advance_step;
        let speed = exec.cfg.approach_speed;
        exec.move_tcp(before.rotation, target, speed)?;
        let distance = (exec.tcp().translation - before.translation).dot(&plan.approach);
        exec.record(Event::Advance { distance });
        advances += 1;
    }
}

fn current_cop(exec: &mut Executor) -> Option<CoP> {
    let pair = exec.world.finger_pair()?;
    combined_cop(&pair.left, &pair.right).ok()
}

fn cop_check(exec: &mut Executor) -> (bool, bool) {
    let Some(pair) = exec.world.finger_pair() else { return (false, false) };
    let band = exec.skill.tip_band.unwrap_or(pair.left.cell_pitch());
    match combined_cop(&pair.left, &pair.right) {
        Ok(cop) => (true, cop_at_tip(&cop, band)),
        Err(_) => (false, false),
    }
}

/// `^EE T_CoP` of the current grasp, or the TCP when no pad is loaded.
fn cop_pose(exec: &mut Executor) -> Pose {
    let z_tcp = exec.world.gripper().tcp_offset.z;
    match current_cop(exec) {
        Some(cop) => cop_frame(z_tcp, &cop),
        None => exec.world.gripper().tcp_pose().relabel(Frame::EE, Frame::COP),
    }
}

/// Rotates in fixed steps about the CoP y-axis, probing with a short lift
/// after each step. Returns true once the object comes free.
fn rotate_until_free(exec: &mut Executor, plan: &Plan, m: f64) -> Step<bool> {
    let (step, max) = (exec.skill.rotation_step, exec.skill.rotation_max);
    let mut total = 0.0;
    while total < max - 1e-12 {
        let angle = step.min(max - total);
        rotate_step(exec, angle)?;
        total += angle;
        exec.hold(5)?;
        let pose = cop_pose(exec);
        let torque = exec.wrench_in(&pose).torque.y;
        exec.record(Event::RotationAttempt { angle, total, torque });
        if torque.abs() > exec.skill.rotation_torque_limit {
            return Err(FailureReason::FixtureUnreleasable);
        }
        let here = exec.world.ee_pose().clone();
        if guarded_lift(exec, plan, exec.skill.release_probe, m)?.is_none() {
            return Ok(true);
        }
        let speed = exec.cfg.approach_speed;
        exec.move_to(&here, speed)?;
    }
    Ok(false)
}

/// One rotation increment about the CoP y-axis, compliant in the other axes.
fn rotate_step(exec: &mut Executor, angle: f64) -> Step<()> {
    let (dt, w_max) = (exec.cfg.dt, exec.cfg.max_angular);
    let cycles = (angle.abs() / (0.5 * w_max * dt)).ceil().max(1.0);
    let s = angle / (cycles * dt * w_max);
    let sel = SelectionMatrices::with_force_axes(&[0, 2, 3, 4, 5]);
    let scaling = Vector6::new(0.0, s, 0.0, 0.0, 0.0, 0.0);
    let params = exec.params_in(Frame::COP, Wrench6::zero(Frame::COP), scaling);
    for _ in 0..cycles as usize {
        let pose = cop_pose(exec);
        exec.hybrid_tick(&sel, &params, &pose, Grip::Hold)?;
    }
    Ok(())
}

/// Opens, returns to the upright grasp pose and closes again.
fn regrip(exec: &mut Executor, upright: &Pose) -> Step<()> {
    exec.record(Event::Regrip);
    let w = exec.world.gripper().max_opening;
    exec.open_to(w)?;
    let speed = exec.cfg.approach_speed;
    exec.move_to(upright, speed)?;
    let force = exec.skill.grip_force;
    compliant_close(exec, force, true)?;
    let held = exec.world.finalize_grasp().ok();
    exec.record(Event::Grasp { held });
    Ok(())
}
