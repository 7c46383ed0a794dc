use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use forcegrasp::harness::{prepare_trial, PreparedTrial, StrategyChoice, TrialSpec};
use forcegrasp::orchestrator::{SafetyEvent, SafetyStatus, SafetyTrace};
use forcegrasp::strategies::{
    baseline_skill, phases_aborted_prefix, run_skill, Executor, FailureReason, Outcome,
};
use forcegrasp::world::Scene;

use super::scene;

const CASES: [(&str, &str, StrategyChoice); 6] = [
    ("el", "bulb", StrategyChoice::A),
    ("el", "battery", StrategyChoice::B),
    ("pct", "cover", StrategyChoice::C),
    ("mw", "magnetron", StrategyChoice::A),
    ("pct", "cooler", StrategyChoice::C),
    ("el", "battery", StrategyChoice::Baseline),
];

/// Horizon over which random status changes are drawn, s.
const HORIZON: f64 = 20.0;

#[derive(Debug, Default)]
pub struct SafetyTally {
    pub traces: usize,
    pub stops: usize,
    pub alerts: usize,
    pub cycles: usize,
    pub violations: Vec<String>,
}

fn random_trace(rng: &mut ChaCha8Rng, start: f64) -> SafetyTrace {
    let n = rng.random_range(1..=4);
    let events = (0..n)
        .map(|_| {
            let status = match rng.random_range(0..3) {
                0 => SafetyStatus::Clear,
                1 => SafetyStatus::Alert,
                _ => SafetyStatus::Stop,
            };
            SafetyEvent { t: start + rng.random_range(0.0..HORIZON), status }
        })
        .collect();
    SafetyTrace::new(events)
}

/// Runs `n` trials under random injected safety traces and checks every
/// logged control cycle against the safety contract.
pub fn safety_campaign(n: usize, seed: u64) -> SafetyTally {
    let scenes: Vec<(&str, Scene)> = ["el", "pct", "mw"].iter().map(|s| (*s, scene(s))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = SafetyTally::default();
    for i in 0..n {
        let (scene_name, target, strategy) = CASES[rng.random_range(0..CASES.len())];
        let s = &scenes.iter().find(|(k, _)| *k == scene_name).unwrap().1;
        let spec = TrialSpec { target: target.into(), strategy, sigma_scale: 1.0, index: rng.random_range(0..500) };
        let PreparedTrial { exec, request, .. } = prepare_trial(s, &spec, seed).expect("trial prepares");
        let start = exec.time();
        let trace = random_trace(&mut rng, start);
        let cap = rng.random_range(0.1..0.5);
        let mut exec = Executor::with_safety(exec.world, Box::new(trace.clone()), cap);
        exec.enable_command_log();
        let v_max = exec.v_max().to_vector();
        let result = match strategy {
            StrategyChoice::Baseline => baseline_skill(&request, &mut exec),
            _ => run_skill(&request, &mut exec),
        };
        let log = exec.command_log().expect("log enabled");
        tally.traces += 1;
        tally.cycles += log.len();
        let mut fail = |msg: String| tally.violations.push(format!("trace {i} ({target} {strategy}): {msg}"));

        let mut halted = false;
        let mut first_stop = None;
        for c in log {
            let applied = c.applied.to_vector();
            match c.status {
                SafetyStatus::Stop => {
                    halted = true;
                    first_stop.get_or_insert(c.t);
                }
                SafetyStatus::Clear => halted = false,
                SafetyStatus::Alert => {}
            }
            if halted {
                if applied.iter().any(|v| *v != 0.0) || c.gripper_moved {
                    fail(format!("motion at t={} while stopped", c.t));
                }
                continue;
            }
            match c.status {
                SafetyStatus::Clear if c.applied != c.requested => fail(format!("clear command altered at t={}", c.t)),
                SafetyStatus::Alert => {
                    for k in 0..6 {
                        if applied[k].abs() > cap * v_max[k] * (1.0 + 1e-12) {
                            fail(format!("axis {k} exceeds alert cap at t={}", c.t));
                        }
                    }
                }
                _ => {}
            }
        }
        if log.iter().any(|c| c.status == SafetyStatus::Alert) {
            tally.alerts += 1;
        }
        if let Some(ts) = first_stop {
            tally.stops += 1;
            if result.outcome != Outcome::Failed(FailureReason::SafetyAbort) {
                fail(format!("stop at t={ts} ended as {:?}", result.outcome));
            }
            if !phases_aborted_prefix(&result.phases) {
                fail(format!("phase log {:?} after stop", result.phases));
            }
            let after: Vec<_> = log.iter().filter(|c| c.t >= ts).collect();
            if after.len() > 1 {
                fail(format!("{} cycles issued after the stop", after.len()));
            }
        }
    }
    tally
}
