#![allow(dead_code)]

pub mod safety;

use std::path::PathBuf;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use forcegrasp::geometry::ObjectEstimate;
use forcegrasp::harness::expected_min_mass;
use forcegrasp::strategies::{run_skill, Event, Executor, GraspRequest, GraspResult, StrategyId};
use forcegrasp::world::{ObjectSpec, Scene, World};

pub fn scene_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenes").join(format!("{name}.json"))
}

pub fn scene(name: &str) -> Scene {
    Scene::load(scene_path(name)).expect("shipped scene loads")
}

/// World prepared for `target` and its noiseless estimate.
pub fn setup(scene: &Scene, target: &str) -> (Executor, ObjectEstimate, f64) {
    let mut world = World::new(scene.clone(), 1).expect("world builds");
    world.prepare_for(target).expect("target exists");
    let noise = scene.noise.scaled(0.0);
    let est = world.observe(target, &noise, &mut ChaCha8Rng::seed_from_u64(0)).expect("observe");
    let m = expected_min_mass(scene.object(target).expect("target"));
    (Executor::new(world), est, m)
}

pub fn shifted(est: &ObjectEstimate, offset: Vector3<f64>) -> ObjectEstimate {
    let mut e = est.clone();
    e.center += offset;
    e
}

pub fn run(strategy: StrategyId, exec: &mut Executor, est: ObjectEstimate, m: f64) -> GraspResult {
    run_skill(&GraspRequest::new(strategy, est, m), exec)
}

pub fn count(result: &GraspResult, pred: impl Fn(&Event) -> bool) -> usize {
    result.events().filter(|e| pred(e)).count()
}

pub fn object(json: serde_json::Value) -> ObjectSpec {
    serde_json::from_value(json).expect("object spec parses")
}

/// Flat floor plus the given objects, default everything else.
pub fn custom_scene(objects: Vec<ObjectSpec>) -> Scene {
    let mut all = vec![object(serde_json::json!({
        "id": "floor", "shape": "box", "center": [0.45, 0.0, 0.0], "dims": [0.6, 0.6],
        "height": 0.02, "role": "obstacle", "mass": 10.0
    }))];
    all.extend(objects);
    let text = serde_json::json!({ "schema_version": 1, "name": "custom", "objects": all }).to_string();
    Scene::from_json(&text, "custom").expect("custom scene is valid")
}
