//! Open-loop control condition: position-only grasp at the estimate.

use nalgebra::Vector3;

use super::vacuum_c::use_both_cups;
use super::{require_weight, Event, Executor, FailureReason, GraspRequest, Grip, Plan, Step};
use crate::geometry::{Frame, Twist6};
use crate::world::{CloseStatus, GripperKind};

/// Depth the vacuum cups are pushed past the estimated surface, m.
const CUP_PRESS_DEPTH: f64 = 0.001;

/// Moves straight to the estimated grasp pose, actuates once, lifts back to
/// the pre-pose and weighs. No force feedback is used on the way.
pub(super) fn baseline_body(req: &GraspRequest, plan: &Plan, exec: &mut Executor) -> Step<()> {
    let g = exec.world.gripper().clone();
    let tare = exec.tare()?;
    let speed = exec.cfg.approach_speed;
    let m = req.expected_min_mass;
    if g.is_finger() {
        exec.open_to(g.max_opening)?;
        let goal = plan.center + plan.approach * g.grasp_depth;
        exec.move_tcp(plan.rotation, goal, speed)?;
        close_blind(exec)?;
        let held = exec.world.finalize_grasp().ok();
        exec.record(Event::Grasp { held: held.clone() });
        if held.is_none() {
            return Err(FailureReason::NothingGrasped);
        }
    } else {
        debug_assert_eq!(g.kind, GripperKind::C);
        let centers = g.cup_centers();
        let both = centers.len() > 1 && use_both_cups(req.estimate.long_dim(), g.cup_spacing, g.cup_diameter);
        let (cups, offset) = if both {
            (vec![true; centers.len()], Vector3::zeros())
        } else {
            let mut mask = vec![false; centers.len()];
            mask[0] = true;
            (mask, centers[0])
        };
        let goal = plan.center - plan.rotation * offset + plan.approach * CUP_PRESS_DEPTH;
        exec.move_tcp(plan.rotation, plan.pre_point(&goal), speed)?;
        exec.move_tcp(plan.rotation, goal, speed)?;
        let sealed = exec.world.vacuum(true, &cups).map_err(|_| FailureReason::NothingGrasped)?;
        exec.record(Event::Seal { sealed });
    }
    let here = exec.tcp();
    let up = here.translation - plan.approach * plan.d_safety;
    exec.move_tcp(here.rotation, up, speed)?;
    require_weight(exec, tare, m)
}

fn close_blind(exec: &mut Executor) -> Step<()> {
    let force = exec.skill.grip_force;
    let zero = Twist6::zero(Frame::EE);
    let mut stalled = 0;
    loop {
        match exec.tick(&zero, Grip::Close(force))? {
            Some(CloseStatus::Closing) => stalled = 0,
            Some(CloseStatus::Stalled) => {
                stalled += 1;
                if stalled > 100 {
                    return Ok(());
                }
            }
            _ => return Ok(()),
        }
    }
}
