//! Slim-fingered gripper: direct attempt, then a lateral edge search on
//! either side of the estimate.

use nalgebra::Vector3;

use super::{
    back_off, compliant_close, depth_below_pre, guarded_lift, record_contact, Event, Executor, FailureReason, GraspRequest,
    Plan, Step,
};
use crate::control::ContactEvent;
use crate::world::CloseStatus;

pub(super) fn strategy_b(req: &GraspRequest, plan: &Plan, exec: &mut Executor) -> Step<()> {
    let tare = exec.tare()?;
    let l_width = exec.world.gripper().max_opening;
    exec.open_to(l_width)?;
    let mut last = match attempt(req, plan, &plan.center, exec, tare)? {
        None => return Ok(()),
        Some(reason) => reason,
    };
    let mut found_edge = false;
    for side in [1i8, -1] {
        let Some(center) = search_side(req, plan, side, exec)? else { continue };
        found_edge = true;
        match attempt(req, plan, &center, exec, tare)? {
            None => return Ok(()),
            Some(reason) => last = reason,
        }
    }
    Err(if found_edge { last } else { FailureReason::NoContact })
}

/// One grasp at `center`. Returns the failure reason of an unsuccessful
/// attempt, after reopening and backing off to the pre-pose.
fn attempt(
    req: &GraspRequest,
    plan: &Plan,
    center: &Vector3<f64>,
    exec: &mut Executor,
    tare: f64,
) -> Step<Option<FailureReason>> {
    let speed = exec.cfg.free_speed;
    exec.move_tcp(plan.rotation, plan.pre_point(center), speed)?;
    let start = exec.tcp().translation;
    let reach = plan.d_safety + exec.world.gripper().finger_length;
    let (approach, threshold) = (exec.cfg.approach_speed, exec.cfg.contact_threshold);
    let ev = exec.guarded(&plan.approach, approach, threshold, reach)?;
    record_contact(exec, &ev, &start, &plan.approach);
    if ev.is_contact() {
        back_off(exec, plan)?;
    }

    let force = exec.skill.grip_force;
    let status = compliant_close(exec, force, false)?;
    let held = match status {
        CloseStatus::Met => None,
        _ => exec.world.finalize_grasp().ok(),
    };
    exec.record(Event::Grasp { held: held.clone() });
    let reason = if held.is_none() {
        FailureReason::NothingGrasped
    } else {
        let dist = depth_below_pre(exec, plan).max(exec.skill.lift_height);
        let m = req.expected_min_mass;
        if guarded_lift(exec, plan, dist, m)?.is_none() && exec.weight_check(tare, m)?.passed {
            return Ok(None);
        }
        FailureReason::WeightCheckFailed
    };
    let w = exec.world.gripper().max_opening;
    exec.open_to(w)?;
    let back = exec.tcp();
    exec.move_tcp(back.rotation, plan.pre_point(center), approach)?;
    Ok(Some(reason))
}

/// Contact this far above the estimated surface marks an obstruction, m.
const BLOCKED_HEIGHT: f64 = 0.003;
/// Half-width steps further out after a sweep passed over the object.
const MAX_STEP_OUTS: usize = 2;

/// Lowers the open gripper beside the estimate and sweeps toward it until a
/// finger touches the object. Returns the corrected grasp center.
fn search_side(req: &GraspRequest, plan: &Plan, side: i8, exec: &mut Executor) -> Step<Option<Vector3<f64>>> {
    let g = exec.world.gripper().clone();
    let l_width = g.max_opening;
    let s = side as f64;
    let offset = exec.skill.search_factor * l_width;
    let start = plan.center + plan.closing * (s * offset);
    let speed = exec.cfg.free_speed;
    exec.move_tcp(plan.rotation, plan.pre_point(&start), speed)?;
    let measured = (exec.tcp().translation - plan.pre_point(&plan.center)).dot(&plan.closing);
    exec.record(Event::SearchOffset { side, offset: measured, l_width });

    let (approach, threshold) = (exec.cfg.approach_speed, exec.cfg.contact_threshold);
    let reach = plan.d_safety + g.finger_length;
    let mut start = start;
    let mut step_outs = 0;
    loop {
        let top = exec.tcp().translation;
        let ev = exec.guarded(&plan.approach, approach, threshold, reach)?;
        record_contact(exec, &ev, &top, &plan.approach);
        let height = (exec.tcp().translation - plan.center).dot(&plan.normal);
        let landed = ev.is_contact() && height > -g.grasp_depth;
        if landed && height > BLOCKED_HEIGHT {
            exec.record(Event::SideBlocked { side });
            exec.move_tcp(plan.rotation, plan.pre_point(&start), approach)?;
            return Ok(None);
        }
        let r = exec.tcp().rotation;
        let raised = exec.tcp().translation - plan.approach * 0.002;
        exec.move_tcp(r, raised, approach)?;

        let sweep = -plan.closing * s;
        let search = exec.cfg.search_speed;
        let travel = 2.2 * l_width;
        let ev = exec.guarded(&sweep, search, threshold, travel)?;
        let here = exec.tcp();
        let up = here.translation - plan.approach * depth_below_pre(exec, plan);
        exec.move_tcp(here.rotation, up, approach)?;
        if let ContactEvent::Contact { .. } = ev {
            let edge = here.translation - plan.closing * (s * (0.5 * exec.world.opening() + g.finger_thickness));
            let center = edge - plan.closing * (s * 0.5 * req.estimate.short_dim());
            let center = center + plan.normal * (plan.center - center).dot(&plan.normal);
            exec.record(Event::EdgeFound { side, edge, center });
            return Ok(Some(center));
        }
        exec.record(Event::NoContact { travelled: travel });
        if !landed || step_outs == MAX_STEP_OUTS {
            return Ok(None);
        }
        start += plan.closing * (s * 0.5 * l_width);
        exec.move_tcp(plan.rotation, plan.pre_point(&start), approach)?;
        step_outs += 1;
    }
}
