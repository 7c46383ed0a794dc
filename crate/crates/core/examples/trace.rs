//! Prints the telemetry of a single trial as JSON lines.
//!
//! `cargo run --example trace -- <scene.json> <target> <A|B|C|baseline> [sigma-scale] [index] [seed]`

use forcegrasp::harness::{run_trial, StrategyChoice, TrialSpec};
use forcegrasp::world::Scene;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 3 {
        eprintln!("usage: trace <scene.json> <target> <A|B|C|baseline> [sigma-scale] [index] [seed]");
        std::process::exit(2);
    }
    let scene = Scene::load(&args[0]).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(2)
    });
    let strategy: StrategyChoice = args[2].parse().expect("strategy");
    let sigma_scale = args.get(3).map(|s| s.parse().expect("sigma scale")).unwrap_or(0.0);
    let index = args.get(4).map(|s| s.parse().expect("index")).unwrap_or(0);
    let seed = args.get(5).map(|s| s.parse().expect("seed")).unwrap_or(0);
    let spec = TrialSpec { target: args[1].clone(), strategy, sigma_scale, index };
    let (record, result) = run_trial(&scene, &spec, seed).expect("trial runs");
    print!("{}", result.to_json_lines());
    println!("{}", serde_json::to_string(&record).expect("record serializes"));
}
