mod common;

use nalgebra::Vector3;

use common::*;
use forcegrasp::geometry::desired_tcp_pose;
use forcegrasp::strategies::{
    baseline_skill, phases_well_formed, Event, FailureReason, GraspRequest, Outcome, Pivot, StrategyId,
    MAX_REORIENTATIONS_SINGLE, REORIENTATION_STEP,
};
use forcegrasp::world::{Fixture, GripperKind, GripperModel};

fn rotations(r: &forcegrasp::strategies::GraspResult) -> usize {
    count(r, |e| matches!(e, Event::RotationAttempt { .. }))
}

fn reorientations(r: &forcegrasp::strategies::GraspResult) -> Vec<f64> {
    r.events()
        .filter_map(|e| match e {
            Event::Reorientation { angle, .. } => Some(*angle),
            _ => None,
        })
        .collect()
}

fn assert_delivered(r: &forcegrasp::strategies::GraspResult, id: &str) {
    assert_eq!(r.outcome, Outcome::Succeeded, "{:#?}", r.events().collect::<Vec<_>>());
    assert!(phases_well_formed(&r.phases), "{:?}", r.phases);
    assert!(r.events().any(|e| matches!(e, Event::WeightCheck { passed: true, .. })));
    assert!(r.events().any(|e| matches!(e, Event::Delivered { id: d } if d == id)));
}

#[test]
fn bulb_needs_rotation_to_leave_its_fixture() {
    let s = scene("el");
    let (mut exec, est, m) = setup(&s, "bulb");
    let r = run(StrategyId::A, &mut exec, est, m);
    assert_delivered(&r, "bulb");
    assert!(rotations(&r) >= 1);
}

#[test]
fn bulb_with_center_error_still_released() {
    let s = scene("el");
    for offset in [Vector3::new(0.008, 0.0, 0.0), Vector3::new(0.0, 0.008, 0.0), Vector3::new(0.0, -0.008, 0.0)] {
        let (mut exec, est, m) = setup(&s, "bulb");
        let r = run(StrategyId::A, &mut exec, shifted(&est, offset), m);
        assert_delivered(&r, "bulb");
        assert!(rotations(&r) >= 1, "offset {offset:?}");
    }
}

#[test]
fn free_object_needs_no_rotation() {
    let s = scene("mw");
    let (mut exec, est, m) = setup(&s, "magnetron");
    let r = run(StrategyId::A, &mut exec, est, m);
    assert_delivered(&r, "magnetron");
    assert_eq!(rotations(&r), 0);
}

#[test]
fn rigid_fixture_is_reported_before_timeout() {
    let mut s = scene("el");
    s.objects.iter_mut().find(|o| o.id == "bulb").unwrap().fixture = Fixture::Rigid;
    let (mut exec, est, m) = setup(&s, "bulb");
    let start = exec.time();
    let r = run(StrategyId::A, &mut exec, est, m);
    assert_eq!(r.outcome, Outcome::Failed(FailureReason::FixtureUnreleasable));
    assert!(phases_well_formed(&r.phases));
    assert!(rotations(&r) >= 1);
    assert!(r.telemetry.iter().all(|t| t.t - start < s.skill.timeout + 60.0));
}

#[test]
fn advances_are_exactly_one_centimetre() {
    let s = scene("el");
    let (mut exec, est, m) = setup(&s, "bulb");
    let r = run(StrategyId::A, &mut exec, shifted(&est, Vector3::new(0.0, 0.0, 0.012)), m);
    let advances: Vec<f64> = r
        .events()
        .filter_map(|e| match e {
            Event::Advance { distance } => Some(*distance),
            _ => None,
        })
        .collect();
    assert!(!advances.is_empty());
    for d in advances {
        assert!((d - 0.01).abs() < 1e-9, "advance {d}");
    }
}

#[test]
fn battery_offset_found_by_side_search() {
    let s = scene("el");
    let w = GripperModel::default_for(GripperKind::B).max_opening;
    let (_, est, _) = setup(&s, "battery");
    let closing: Vector3<f64> = desired_tcp_pose(&est).unwrap().rotation.column(0).into();
    for sign in [1.0, -1.0] {
        let (mut exec, est, m) = setup(&s, "battery");
        let r = run(StrategyId::B, &mut exec, shifted(&est, closing * (sign * 0.8 * w)), m);
        assert_delivered(&r, "battery");
        assert!(r.events().any(|e| matches!(e, Event::SearchOffset { .. })), "sign {sign}");
        assert!(r.events().any(|e| matches!(e, Event::EdgeFound { .. })), "sign {sign}");
    }
}

#[test]
fn battery_without_noise_needs_no_search() {
    let s = scene("el");
    let (mut exec, est, m) = setup(&s, "battery");
    let r = run(StrategyId::B, &mut exec, est, m);
    assert_delivered(&r, "battery");
    assert_eq!(count(&r, |e| matches!(e, Event::SearchOffset { .. })), 0);
}

#[test]
fn search_offset_is_exactly_one_point_two_widths() {
    let s = scene("el");
    let (mut exec, est, m) = setup(&s, "battery");
    let r = run(StrategyId::B, &mut exec, shifted(&est, Vector3::new(0.0, 0.0, 0.04)), m);
    let offsets: Vec<(f64, f64)> = r
        .events()
        .filter_map(|e| match e {
            Event::SearchOffset { offset, l_width, .. } => Some((*offset, *l_width)),
            _ => None,
        })
        .collect();
    assert!(!offsets.is_empty());
    for (o, w) in offsets {
        assert!((o.abs() - 1.2 * w).abs() < 1e-9, "offset {o} width {w}");
    }
}

#[test]
fn absent_object_fails_with_no_contact() {
    let full = scene("el");
    let (_, est, m) = setup(&full, "battery");
    let mut s = full.clone();
    s.objects.retain(|o| o.id != "battery");
    let mut world = forcegrasp::world::World::new(s, 1).unwrap();
    world.prepare_for("bulb").unwrap();
    let mut exec = forcegrasp::strategies::Executor::new(world);
    let r = run(StrategyId::B, &mut exec, est, m);
    assert_eq!(r.outcome, Outcome::Failed(FailureReason::NoContact));
    assert_eq!(count(&r, |e| matches!(e, Event::SearchOffset { .. })), 2);
    assert!(phases_well_formed(&r.phases));
}

#[test]
fn large_cover_uses_both_cups_centered() {
    let s = scene("pct");
    let (mut exec, est, m) = setup(&s, "cover");
    let center = est.center;
    let r = run(StrategyId::C, &mut exec, est, m);
    assert_delivered(&r, "cover");
    assert!(r.events().any(|e| matches!(e, Event::CupMode { cups: 2 })));
    assert!(reorientations(&r).is_empty());
    let seal = r.telemetry.iter().find(|t| matches!(t.event, Event::Seal { sealed: true })).unwrap();
    let d = seal.pose.translation - center;
    assert!(d.x.hypot(d.y) < 0.003, "off center by {d:?}");
}

#[test]
fn narrow_surface_shifts_target_to_one_cup() {
    let s = scene("pct");
    let g = GripperModel::default_for(GripperKind::C);
    let (mut exec, est, m) = setup(&s, "cooler");
    let center = est.center;
    let r = run(StrategyId::C, &mut exec, est, m);
    assert_delivered(&r, "cooler");
    assert!(r.events().any(|e| matches!(e, Event::CupMode { cups: 1 })));
    let seal = r.telemetry.iter().find(|t| matches!(t.event, Event::Seal { sealed: true })).unwrap();
    let d = seal.pose.translation - center;
    assert!((d.x.hypot(d.y) - 0.5 * g.cup_spacing).abs() < 0.003, "shift {d:?}");
}

#[test]
fn blocked_orientations_are_skipped_in_single_cup_mode() {
    let target = object(serde_json::json!({
        "id": "plate", "shape": "box", "center": [0.45, 0.0, 0.05], "dims": [0.05, 0.05],
        "height": 0.04, "mass": 0.2
    }));
    let probe = custom_scene(vec![target.clone()]);
    let (_, est, _) = setup(&probe, "plate");
    let g = GripperModel::default_for(GripperKind::C);
    let c = g.cup_centers();
    let r0 = desired_tcp_pose(&est).unwrap().rotation;
    let posts: Vec<_> = (0..2)
        .map(|k| {
            let turn = forcegrasp::geometry::rotation_about(&r0.column(2).into(), REORIENTATION_STEP * k as f64);
            let p = est.center + turn * r0 * (c[1] - c[0]);
            object(serde_json::json!({
                "id": format!("post{k}"), "shape": "box", "center": [p.x, p.y, 0.08], "dims": [0.04, 0.04],
                "height": 0.07, "role": "obstacle", "mass": 1.0
            }))
        })
        .collect();
    let mut objects = vec![target];
    objects.extend(posts);
    let s = custom_scene(objects);
    let (mut exec, est, m) = setup(&s, "plate");
    let r = run(StrategyId::C, &mut exec, est, m);
    assert_delivered(&r, "plate");
    let turns = reorientations(&r);
    assert_eq!(turns.len(), 2);
    assert!(turns.len() <= MAX_REORIENTATIONS_SINGLE);
    for a in turns {
        assert!((a - REORIENTATION_STEP).abs() < 1e-9, "angle {a}");
    }
    assert!(r.events().all(|e| !matches!(e, Event::Reorientation { about: Pivot::Center, .. })));
}

#[test]
fn timeout_leaves_robot_at_safe_pose() {
    let mut s = scene("el");
    s.skill.timeout = 1.0;
    let (mut exec, est, m) = setup(&s, "bulb");
    let r = run(StrategyId::A, &mut exec, est, m);
    assert_eq!(r.outcome, Outcome::Failed(FailureReason::Timeout));
    assert!(phases_well_formed(&r.phases));
    let safe = exec.world.safe_ee_pose();
    assert!((exec.world.ee_pose().translation - safe.translation).norm() < 1e-6);
    assert!(exec.world.held().is_none());
}

#[test]
fn baseline_succeeds_without_noise() {
    let s = scene("mw");
    let (mut exec, est, m) = setup(&s, "magnetron");
    let r = baseline_skill(&GraspRequest::new(StrategyId::A, est, m), &mut exec);
    assert_delivered(&r, "magnetron");
    assert!(r.events().all(|e| !matches!(e, Event::Contact { .. } | Event::Advance { .. })));
}

#[test]
fn baseline_misses_beyond_half_the_finger_clearance() {
    let s = scene("mw");
    let g = GripperModel::default_for(GripperKind::A);
    let (_, est, _) = setup(&s, "magnetron");
    let r0 = desired_tcp_pose(&est).unwrap().rotation;
    let closing: Vector3<f64> = r0.column(0).into();
    let width = s.object("magnetron").unwrap().true_dims.min();
    let clearance = g.max_opening - width;
    let (mut exec, est, m) = setup(&s, "magnetron");
    let off = closing * (0.5 * clearance + 0.5 * width + g.finger_thickness + 0.005);
    let r = baseline_skill(&GraspRequest::new(StrategyId::A, shifted(&est, off), m), &mut exec);
    assert_eq!(r.outcome, Outcome::Failed(FailureReason::NothingGrasped));
}

#[test]
fn baseline_cup_half_off_the_edge_fails_weight_check() {
    let s = scene("pct");
    let obj = s.object("cover").unwrap();
    let (mut exec, est, m) = setup(&s, "cover");
    let r0 = desired_tcp_pose(&est).unwrap().rotation;
    let along_cups: Vector3<f64> = r0.column(1).into();
    let half_extent = 0.5 * (obj.true_dims.x * along_cups.x.abs() + obj.true_dims.y * along_cups.y.abs());
    let g = GripperModel::default_for(GripperKind::C);
    let off = along_cups * (half_extent - 0.5 * g.cup_spacing);
    let r = baseline_skill(&GraspRequest::new(StrategyId::C, shifted(&est, off), m), &mut exec);
    assert_eq!(r.outcome, Outcome::Failed(FailureReason::WeightCheckFailed));
}
