//! Seeded Monte Carlo campaigns over targets, strategies and noise scales,
//! with resumable trial logs and aggregate reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::HarnessError;
use crate::strategies::{
    baseline_skill, run_skill, select_strategy, Executor, FailureReason, GraspRequest, GraspResult, Outcome,
    StrategyId,
};
use crate::world::{GripperKind, ObjectSpec, Role, Scene, World};

/// Default trials per cell.
pub const DEFAULT_TRIALS: usize = 500;
/// Fraction of the true mass the weight check expects.
pub const EXPECTED_MASS_FRACTION: f64 = 0.5;

pub const TRIALS_FILE: &str = "trials.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TABLE: &str = "report.txt";
pub const TRIALS_CSV: &str = "trials.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyChoice {
    A,
    B,
    C,
    Baseline,
}

impl StrategyChoice {
    pub const ALL: [StrategyChoice; 4] = [StrategyChoice::A, StrategyChoice::B, StrategyChoice::C, StrategyChoice::Baseline];

    pub fn strategy(self) -> Option<StrategyId> {
        match self {
            StrategyChoice::A => Some(StrategyId::A),
            StrategyChoice::B => Some(StrategyId::B),
            StrategyChoice::C => Some(StrategyId::C),
            StrategyChoice::Baseline => None,
        }
    }
}

impl From<StrategyId> for StrategyChoice {
    fn from(s: StrategyId) -> Self {
        match s {
            StrategyId::A => StrategyChoice::A,
            StrategyId::B => StrategyChoice::B,
            StrategyId::C => StrategyChoice::C,
        }
    }
}

impl fmt::Display for StrategyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyChoice::Baseline => write!(f, "baseline"),
            other => write!(f, "{other:?}"),
        }
    }
}

impl FromStr for StrategyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(StrategyChoice::A),
            "b" => Ok(StrategyChoice::B),
            "c" => Ok(StrategyChoice::C),
            "baseline" => Ok(StrategyChoice::Baseline),
            _ => Err(format!("unknown strategy `{s}` (expected A, B, C or baseline)")),
        }
    }
}

/// The strategy a choice resolves to for an object, if it is proposed there.
/// The baseline uses the object's preferred gripper.
pub fn resolve_strategy(obj: &ObjectSpec, choice: StrategyChoice) -> Option<StrategyId> {
    let proposed = select_strategy(&obj.props?).ok()?;
    match choice.strategy() {
        None => proposed.first().copied(),
        Some(s) => proposed.contains(&s).then_some(s),
    }
}

pub fn expected_min_mass(obj: &ObjectSpec) -> f64 {
    EXPECTED_MASS_FRACTION * obj.mass
}

#[derive(Clone, Debug)]
pub struct Campaign {
    pub scene_path: PathBuf,
    pub scene: Scene,
    /// Objects to grasp; empty means every target with known properties.
    pub targets: Vec<String>,
    pub trials: usize,
    pub multipliers: Vec<f64>,
    pub strategies: Vec<StrategyChoice>,
    pub master_seed: u64,
    pub out: Option<PathBuf>,
}

impl Campaign {
    pub fn load(scene_path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let scene = Scene::load(scene_path.as_ref())?;
        Ok(Self::for_scene(scene_path.as_ref().to_path_buf(), scene))
    }

    pub fn for_scene(scene_path: PathBuf, scene: Scene) -> Self {
        Self {
            scene_path,
            scene,
            targets: vec![],
            trials: DEFAULT_TRIALS,
            multipliers: vec![1.0],
            strategies: StrategyChoice::ALL.to_vec(),
            master_seed: 0,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Campaign("trials must be >= 1".into()));
        }
        if self.multipliers.is_empty() || self.multipliers.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(HarnessError::Campaign("sigma multipliers must be finite and >= 0".into()));
        }
        if self.strategies.is_empty() {
            return Err(HarnessError::Campaign("no strategy selected".into()));
        }
        for t in &self.targets {
            if self.scene.object(t).is_none() {
                return Err(HarnessError::Campaign(format!("unknown target `{t}`")));
            }
        }
        Ok(())
    }

    fn target_ids(&self) -> Vec<String> {
        if !self.targets.is_empty() {
            return self.targets.clone();
        }
        self.scene
            .objects
            .iter()
            .filter(|o| o.role == Role::Target && o.props.is_some())
            .map(|o| o.id.clone())
            .collect()
    }

    /// Every (target, strategy, multiplier, index) cell the campaign runs.
    /// Strategies not proposed for a target are skipped.
    pub fn trial_specs(&self) -> Vec<TrialSpec> {
        let mut specs = vec![];
        for target in self.target_ids() {
            let Some(obj) = self.scene.object(&target) else { continue };
            for &strategy in &self.strategies {
                if resolve_strategy(obj, strategy).is_none() {
                    continue;
                }
                for &sigma_scale in &self.multipliers {
                    for index in 0..self.trials {
                        specs.push(TrialSpec { target: target.clone(), strategy, sigma_scale, index });
                    }
                }
            }
        }
        specs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub target: String,
    pub strategy: StrategyChoice,
    pub sigma_scale: f64,
    pub index: usize,
}

impl TrialSpec {
    pub fn id(&self) -> String {
        format!("{}/{}/{}/{}", self.target, self.strategy, scale_key(self.sigma_scale), self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub target: String,
    pub strategy: StrategyChoice,
    pub gripper: GripperKind,
    pub sigma_scale: f64,
    pub index: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub failure_reason: Option<FailureReason>,
    pub phases: usize,
    /// Simulated duration of the skill, s.
    pub sim_time: f64,
}

fn scale_key(s: f64) -> String {
    format!("{s:?}")
}

/// SHA-256 based seed derivation from a master seed and labelled parts.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Seed of the vision draw. It leaves out the strategy so that all
/// strategies of a cell see the same estimates.
pub fn observation_seed(master: u64, noise_seed: u64, spec: &TrialSpec) -> u64 {
    let (n, s, i) = (noise_seed.to_string(), scale_key(spec.sigma_scale), spec.index.to_string());
    derive_seed(master, &["observe", &n, &spec.target, &s, &i])
}

/// Seed of the simulated world (sensor noise, seal draws).
pub fn trial_seed(master: u64, spec: &TrialSpec) -> u64 {
    let (st, s, i) = (spec.strategy.to_string(), scale_key(spec.sigma_scale), spec.index.to_string());
    derive_seed(master, &["trial", &spec.target, &st, &s, &i])
}

/// A prepared trial: the world after observation and the request to run.
pub struct PreparedTrial {
    pub exec: Executor,
    pub request: GraspRequest,
    pub seed: u64,
}

pub fn prepare_trial(scene: &Scene, spec: &TrialSpec, master_seed: u64) -> Result<PreparedTrial, HarnessError> {
    let obj = scene
        .object(&spec.target)
        .ok_or_else(|| HarnessError::Campaign(format!("unknown target `{}`", spec.target)))?;
    let strategy = resolve_strategy(obj, spec.strategy).ok_or_else(|| {
        HarnessError::Campaign(format!("strategy {} is not proposed for `{}`", spec.strategy, spec.target))
    })?;
    let seed = trial_seed(master_seed, spec);
    let mut world = World::new(scene.clone(), seed)?;
    world.prepare_for(&spec.target)?;
    let noise = scene.noise.scaled(spec.sigma_scale);
    let mut rng = ChaCha8Rng::seed_from_u64(observation_seed(master_seed, noise.seed, spec));
    let estimate = world.observe(&spec.target, &noise, &mut rng)?;
    let request = GraspRequest::new(strategy, estimate, expected_min_mass(obj));
    Ok(PreparedTrial { exec: Executor::new(world), request, seed })
}

/// Runs one trial and returns its record and the full skill result.
pub fn run_trial(scene: &Scene, spec: &TrialSpec, master_seed: u64) -> Result<(TrialRecord, GraspResult), HarnessError> {
    let PreparedTrial { mut exec, request, seed } = prepare_trial(scene, spec, master_seed)?;
    let start = exec.time();
    let result = match spec.strategy {
        StrategyChoice::Baseline => baseline_skill(&request, &mut exec),
        _ => run_skill(&request, &mut exec),
    };
    let record = TrialRecord {
        trial_id: spec.id(),
        target: spec.target.clone(),
        strategy: spec.strategy,
        gripper: request.strategy.gripper(),
        sigma_scale: spec.sigma_scale,
        index: spec.index,
        seed,
        outcome: result.outcome,
        failure_reason: result.outcome.reason(),
        phases: result.phases.len(),
        sim_time: exec.time() - start,
    };
    Ok((record, result))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub target: String,
    pub strategy: StrategyChoice,
    pub sigma_scale: f64,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub failures: BTreeMap<FailureReason, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scene: String,
    pub master_seed: u64,
    pub cells: Vec<CellSummary>,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn summarize(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(String, StrategyChoice, String), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.target.clone(), r.strategy, scale_key(r.sigma_scale))).or_default().push(r);
    }
    cells
        .into_values()
        .map(|rs| {
            let trials = rs.len();
            let successes = rs.iter().filter(|r| r.outcome.is_success()).count();
            let mut failures = BTreeMap::new();
            for r in &rs {
                if let Some(f) = r.failure_reason {
                    *failures.entry(f).or_insert(0) += 1;
                }
            }
            let (ci_low, ci_high) = wilson_interval(successes, trials, 1.96);
            CellSummary {
                target: rs[0].target.clone(),
                strategy: rs[0].strategy,
                sigma_scale: rs[0].sigma_scale,
                trials,
                successes,
                rate: successes as f64 / trials as f64,
                ci_low,
                ci_high,
                failures,
            }
        })
        .collect()
}

impl Report {
    pub fn new(scene: &str, master_seed: u64, records: &[TrialRecord]) -> Self {
        Self { scene: scene.to_string(), master_seed, cells: summarize(records) }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let header = ["target", "strategy", "sigma", "trials", "success", "rate", "95% CI", "failures"];
        let rows: Vec<[String; 8]> = self
            .cells
            .iter()
            .map(|c| {
                let failures: Vec<String> = c.failures.iter().map(|(k, v)| format!("{k}:{v}")).collect();
                [
                    c.target.clone(),
                    c.strategy.to_string(),
                    scale_key(c.sigma_scale),
                    c.trials.to_string(),
                    c.successes.to_string(),
                    format!("{:.3}", c.rate),
                    format!("[{:.3}, {:.3}]", c.ci_low, c.ci_high),
                    failures.join(" "),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for r in &rows {
            for (w, cell) in widths.iter_mut().zip(r.iter()) {
                *w = (*w).max(cell.len());
            }
        }
        let line = |cells: Vec<&str>| -> String {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = format!("scene: {}  master seed: {}\n", self.scene, self.master_seed);
        out += &line(header.to_vec());
        for r in &rows {
            out += &line(r.iter().map(String::as_str).collect());
        }
        out
    }
}

pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record([
        "trial_id", "target", "strategy", "gripper", "sigma_scale", "index", "seed", "succeeded", "failure_reason",
        "phases", "sim_time",
    ])
    .expect("in-memory csv");
    for r in records {
        w.write_record([
            r.trial_id.clone(),
            r.target.clone(),
            r.strategy.to_string(),
            r.gripper.to_string(),
            scale_key(r.sigma_scale),
            r.index.to_string(),
            r.seed.to_string(),
            r.outcome.is_success().to_string(),
            r.failure_reason.map(|f| f.to_string()).unwrap_or_default(),
            r.phases.to_string(),
            format!("{:.6}", r.sim_time),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

pub fn records_to_json_lines(records: &[TrialRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("record serializes") + "\n").collect()
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let display = path.display().to_string();
    let file = fs::File::open(path).map_err(|source| HarnessError::Io { path: display.clone(), source })?;
    let mut out = vec![];
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| HarnessError::Io { path: display.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| HarnessError::Record {
            path: display.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct CampaignOutput {
    pub records: Vec<TrialRecord>,
    pub report: Report,
}

pub fn run_campaign(c: &Campaign) -> Result<CampaignOutput, HarnessError> {
    run_campaign_with(c, |_, _| {})
}

/// Runs a campaign, calling `inspect` with every freshly run trial's result.
///
/// With an output directory, completed trials found in its log are skipped
/// and new ones are appended; the reports are rewritten at the end.
pub fn run_campaign_with<F>(c: &Campaign, inspect: F) -> Result<CampaignOutput, HarnessError>
where
    F: Fn(&TrialSpec, &GraspResult) + Sync,
{
    c.validate()?;
    let specs = c.trial_specs();
    let mut done: BTreeMap<String, TrialRecord> = BTreeMap::new();
    if let Some(dir) = &c.out {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
        let log = dir.join(TRIALS_FILE);
        if log.exists() {
            for r in read_records(&log)? {
                done.insert(r.trial_id.clone(), r);
            }
        }
    }
    let pending: Vec<&TrialSpec> = specs.iter().filter(|s| !done.contains_key(&s.id())).collect();
    let fresh: Vec<TrialRecord> = pending
        .par_iter()
        .map(|spec| {
            let (record, result) = run_trial(&c.scene, spec, c.master_seed)?;
            inspect(spec, &result);
            Ok(record)
        })
        .collect::<Result<_, HarnessError>>()?;
    if let Some(dir) = &c.out {
        let log = dir.join(TRIALS_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log)
            .map_err(|source| HarnessError::Io { path: log.display().to_string(), source })?;
        f.write_all(records_to_json_lines(&fresh).as_bytes())
            .map_err(|source| HarnessError::Io { path: log.display().to_string(), source })?;
    }
    for r in fresh {
        done.insert(r.trial_id.clone(), r);
    }
    let wanted: BTreeSet<String> = specs.iter().map(TrialSpec::id).collect();
    let records: Vec<TrialRecord> =
        specs.iter().filter_map(|s| done.get(&s.id()).cloned()).filter(|r| wanted.contains(&r.trial_id)).collect();
    let report = Report::new(&c.scene.name, c.master_seed, &records);
    if let Some(dir) = &c.out {
        write_reports(dir, &report, &records)?;
    }
    Ok(CampaignOutput { records, report })
}

pub fn write_reports(dir: &Path, report: &Report, records: &[TrialRecord]) -> Result<(), HarnessError> {
    for (name, body) in [
        (REPORT_JSON, report.to_json()),
        (REPORT_TABLE, report.to_table()),
        (TRIALS_CSV, records_to_csv(records)),
    ] {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|source| HarnessError::Io { path: p.display().to_string(), source })?;
    }
    Ok(())
}

/// Cells of non-baseline strategies whose success rate is below `min_rate`.
pub fn cells_below(report: &Report, min_rate: f64) -> Vec<&CellSummary> {
    report.cells.iter().filter(|c| c.strategy != StrategyChoice::Baseline && c.rate < min_rate).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_known_values() {
        let (lo, hi) = wilson_interval(90, 100, 1.96);
        assert!((lo - 0.8256).abs() < 1e-3 && (hi - 0.9448).abs() < 1e-3, "{lo} {hi}");
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn seeds_depend_on_every_part() {
        let spec = TrialSpec { target: "t".into(), strategy: StrategyChoice::A, sigma_scale: 1.0, index: 3 };
        let base = trial_seed(7, &spec);
        assert_eq!(base, trial_seed(7, &spec.clone()));
        assert_ne!(base, trial_seed(8, &spec));
        assert_ne!(base, trial_seed(7, &TrialSpec { index: 4, ..spec.clone() }));
        assert_ne!(base, trial_seed(7, &TrialSpec { strategy: StrategyChoice::Baseline, ..spec.clone() }));
        let b = TrialSpec { strategy: StrategyChoice::Baseline, ..spec.clone() };
        assert_eq!(observation_seed(7, 0, &spec), observation_seed(7, 0, &b));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in StrategyChoice::ALL {
            assert_eq!(s.to_string().parse::<StrategyChoice>().unwrap(), s);
        }
        assert!("D".parse::<StrategyChoice>().is_err());
    }
}
