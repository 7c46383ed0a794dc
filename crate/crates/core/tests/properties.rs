use nalgebra::{Matrix6, Vector2, Vector3, Vector6};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use forcegrasp::control::{hybrid_command, ControllerParams, SelectionMatrices};
use forcegrasp::geometry::{
    compose, desired_tcp_pose, invert, orthonormality_residual, power, so3_exp, so3_log, transform_twist,
    transform_wrench, Frame, ObjectEstimate, Pose, Twist6, Wrench6,
};
use forcegrasp::harness::{derive_seed, wilson_interval};
use forcegrasp::orchestrator::{
    apply_safety, combine, planner_step, ConflictPolicy, Planner, PlannerConfig, PlannerEvent, SafetyStatus,
};
use forcegrasp::sensing::{compute_cop, PressureImage};
use forcegrasp::strategies::phases_well_formed;
use forcegrasp::strategies::SkillPhase;
use forcegrasp::world::{observe, NoiseModel, MIN_DIM};

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-r..r).prop_map(Vector3::from)
}

fn vec6(r: f64) -> impl Strategy<Value = Vector6<f64>> {
    prop::array::uniform6(-r..r).prop_map(|a| Vector6::from_column_slice(&a))
}

fn pose(from: &'static str, to: &'static str) -> impl Strategy<Value = Pose> {
    (vec3(3.0), vec3(1.0))
        .prop_map(move |(w, t)| Pose::new(so3_exp(&w), t, Frame::new(from), Frame::new(to)).unwrap())
}

fn status() -> impl Strategy<Value = SafetyStatus> {
    prop_oneof![Just(SafetyStatus::Clear), Just(SafetyStatus::Alert), Just(SafetyStatus::Stop)]
}

fn planner_event() -> impl Strategy<Value = PlannerEvent> {
    use PlannerEvent::*;
    prop::sample::select(vec![
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
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn twist_transport_round_trips(t in pose("A", "B"), v in vec6(2.0)) {
        let tw = Twist6::from_vector(&v, Frame::new("B"));
        let there = transform_twist(&t, &tw).unwrap();
        prop_assert_eq!(&there.frame, &Frame::new("A"));
        let back = transform_twist(&invert(&t), &there).unwrap();
        prop_assert!((back.to_vector() - v).norm() < 1e-9);
    }

    #[test]
    fn power_is_frame_invariant(t in pose("A", "B"), v in vec6(2.0), w in vec6(50.0)) {
        let tw = Twist6::from_vector(&v, Frame::new("B"));
        let wr = Wrench6::from_vector(&w, Frame::new("B"));
        let p0 = power(&tw, &wr);
        let p1 = power(&transform_twist(&t, &tw).unwrap(), &transform_wrench(&t, &wr).unwrap());
        prop_assert!((p0 - p1).abs() < 1e-9 * (1.0 + p0.abs()));
    }

    #[test]
    fn composition_with_inverse_is_identity(t in pose("A", "B")) {
        let id = compose(&t, &invert(&t)).unwrap();
        prop_assert!((id.rotation - nalgebra::Matrix3::identity()).norm() < 1e-12);
        prop_assert!(id.translation.norm() < 1e-12);
        prop_assert!(orthonormality_residual(&t.rotation) < 1e-12);
    }

    #[test]
    fn mismatched_frames_are_rejected(t in pose("A", "B"), v in vec6(1.0)) {
        prop_assert!(transform_twist(&t, &Twist6::from_vector(&v, Frame::new("C"))).is_err());
        prop_assert!(transform_wrench(&t, &Wrench6::from_vector(&v, Frame::new("A"))).is_err());
    }

    #[test]
    fn so3_log_inverts_exp(w in vec3(1.7)) {
        prop_assume!(w.norm() < 3.1);
        prop_assert!((so3_log(&so3_exp(&w)) - w).norm() < 1e-9);
    }

    #[test]
    fn grasp_pose_approaches_against_the_normal(n in vec3(1.0), c in vec3(0.5), d in (0.01..0.3f64, 0.01..0.3f64)) {
        prop_assume!(n.norm() > 0.1);
        let n = n.normalize();
        let est = ObjectEstimate::new(c, n, Vector2::new(d.0, d.1)).unwrap();
        let goal = desired_tcp_pose(&est).unwrap();
        prop_assert!(orthonormality_residual(&goal.rotation) < 1e-9);
        prop_assert!((goal.approach() + n).norm() < 1e-9);
        prop_assert!((goal.translation - c).norm() < 1e-12);
    }

    #[test]
    fn hybrid_axes_are_exclusive(mask in prop::array::uniform6(any::<bool>()), s in vec6(1.0), f in vec6(30.0), fd in vec6(30.0), k in prop::array::uniform6(0.001..1.0f64)) {
        let sel = SelectionMatrices::new(mask.map(|m| !m), mask).unwrap();
        let vmax = Twist6::new(Vector3::repeat(0.5), Vector3::repeat(0.1), Frame::EE);
        let gain = Matrix6::from_diagonal(&Vector6::from_column_slice(&k));
        let p = ControllerParams::new(gain, s, vmax.clone(), Wrench6::from_vector(&fd, Frame::EE), 0.002).unwrap();
        let u = hybrid_command(&sel, &p, &Wrench6::from_vector(&f, Frame::EE)).to_vector();
        let vm = vmax.to_vector();
        for i in 0..6 {
            let expected = if mask[i] { k[i] * (fd[i] - f[i]) } else { s[i] * vm[i] };
            prop_assert_eq!(u[i], expected);
        }
    }

    #[test]
    fn cop_lies_inside_the_array(rows in 1usize..12, cols in 1usize..8, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.0..1.0)).collect();
        let img = PressureImage::new(rows, cols, 0.004, p).unwrap();
        let cop = compute_cop(&img).unwrap();
        let x = cop.position_in_finger;
        prop_assert!(x.x >= -1e-12 && x.x <= (rows - 1) as f64 * 0.004 + 1e-12);
        prop_assert!(x.y >= -1e-12 && x.y <= (cols - 1) as f64 * 0.004 + 1e-12);
        let scaled = compute_cop(&img.scaled(3.5)).unwrap();
        prop_assert!((scaled.position_in_finger - x).norm() < 1e-12);
    }

    #[test]
    fn noiseless_observation_is_the_truth(c in vec3(0.5), n in vec3(1.0), d in (0.01..0.3f64, 0.01..0.3f64), seed in any::<u64>()) {
        prop_assume!(n.norm() > 0.1);
        let n = n.normalize();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let est = observe(&c, &n, &Vector2::new(d.0, d.1), &NoiseModel::default().scaled(0.0), &mut rng);
        prop_assert_eq!(est.center, c);
        prop_assert!((est.normal - n).norm() < 1e-12);
        prop_assert_eq!(est.dims, Vector2::new(d.0, d.1));
    }

    #[test]
    fn noisy_observation_stays_valid(c in vec3(0.5), d in (0.001..0.3f64, 0.001..0.3f64), scale in 0.0..8.0f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let est = observe(&c, &Vector3::z(), &Vector2::new(d.0, d.1), &NoiseModel::default().scaled(scale), &mut rng);
        prop_assert!((est.normal.norm() - 1.0).abs() < 1e-12);
        prop_assert!(est.dims.iter().all(|&x| x >= MIN_DIM));
        prop_assert!(est.validate().is_ok());
    }

    #[test]
    fn safety_filter_contract(st in status(), v in vec6(2.0), cap in 0.05..1.0f64) {
        let vmax = Twist6::new(Vector3::repeat(0.5), Vector3::repeat(0.1), Frame::EE);
        let cmd = Twist6::from_vector(&v, Frame::EE);
        let out = apply_safety(st, &cmd, cap, &vmax).to_vector();
        match st {
            SafetyStatus::Clear => prop_assert_eq!(out, v),
            SafetyStatus::Stop => prop_assert!(out.iter().all(|x| *x == 0.0)),
            SafetyStatus::Alert => {
                let vm = vmax.to_vector();
                for i in 0..6 {
                    prop_assert!(out[i].abs() <= cap * vm[i] * (1.0 + 1e-12));
                }
                prop_assert!(out.dot(&v) >= 0.0);
                prop_assert!((out.normalize().dot(&v.normalize()) - 1.0).abs() < 1e-9 || v.norm() < 1e-12 || out.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn stop_dominates_any_mix(sts in prop::collection::vec(status(), 0..8)) {
        let c = combine(sts.iter().copied());
        prop_assert_eq!(c, sts.iter().copied().max().unwrap_or(SafetyStatus::Clear));
        let mut rev = sts.clone();
        rev.reverse();
        prop_assert_eq!(combine(rev), c);
    }

    #[test]
    fn planner_retries_stay_bounded(events in prop::collection::vec(planner_event(), 0..60), max in 0u32..4, policy in 0..3u8) {
        let cfg = PlannerConfig {
            max_retries: max,
            conflict_policy: [ConflictPolicy::PreferVision, ConflictPolicy::PreferSkill, ConflictPolicy::AlwaysHuman][policy as usize],
        };
        let mut p = Planner::default();
        for e in events {
            match planner_step(&p, e, &cfg) {
                Ok((next, _)) => {
                    prop_assert!(next.retry_count <= max);
                    prop_assert!(next.retry_count >= p.retry_count);
                    p = next;
                }
                Err(_) => {}
            }
        }
    }

    #[test]
    fn seeds_are_pure(master in any::<u64>(), a in "[a-z]{1,8}", b in "[a-z]{1,8}") {
        prop_assert_eq!(derive_seed(master, &[&a, &b]), derive_seed(master, &[&a, &b]));
        if a != b {
            prop_assert_ne!(derive_seed(master, &[&a, &b]), derive_seed(master, &[&b, &a]));
        }
    }

    #[test]
    fn wilson_interval_brackets_the_rate(n in 1usize..2000, frac in 0.0..=1.0f64) {
        let k = ((n as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(k, n, 1.96);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn phase_grammar_accepts_only_the_two_endings(tool in any::<bool>(), ok in any::<bool>(), drop in 0usize..7) {
        use SkillPhase::*;
        let mut phases = vec![];
        if tool { phases.push(ToolChange); }
        phases.extend([MoveSafe, MovePrePose, ToolStrategy]);
        phases.extend(if ok { [Deliver, ReturnSafe] } else { [ReportFail, ReturnSafe] });
        prop_assert!(phases_well_formed(&phases));
        let i = drop % phases.len();
        if !(tool && i == 0) {
            let mut broken = phases.clone();
            broken.remove(i);
            prop_assert!(!phases_well_formed(&broken));
        }
    }
}
