//! Skill phases, telemetry records and grasp results.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Wrench6};
use crate::world::GripperKind;

/// Boxes of the common skill structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SkillPhase {
    ToolChange,
    MoveSafe,
    MovePrePose,
    ToolStrategy,
    Deliver,
    ReturnSafe,
    ReportFail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureReason {
    NoContact,
    NothingGrasped,
    WeightCheckFailed,
    FixtureUnreleasable,
    Timeout,
    SafetyAbort,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl From<crate::control::Interrupt> for FailureReason {
    fn from(i: crate::control::Interrupt) -> Self {
        match i {
            crate::control::Interrupt::SafetyHalt => FailureReason::SafetyAbort,
            crate::control::Interrupt::Timeout => FailureReason::Timeout,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Succeeded,
    Failed(FailureReason),
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Succeeded)
    }

    pub fn reason(&self) -> Option<FailureReason> {
        match self {
            Outcome::Succeeded => None,
            Outcome::Failed(r) => Some(*r),
        }
    }
}

/// Rotation axis used by a vacuum reorientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pivot {
    Center,
    Cup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Event {
    PhaseStart,
    ToolMounted { gripper: GripperKind },
    Contact { travelled: f64 },
    NoContact { travelled: f64 },
    Grasp { held: Option<String> },
    CopCheck { pad_contact: bool, at_tip: bool },
    /// Extra travel along the approach after a fingertip grasp, m.
    Advance { distance: f64 },
    /// Lateral offset of a search leg from the estimate, m.
    SearchOffset { side: i8, offset: f64, l_width: f64 },
    SideBlocked { side: i8 },
    EdgeFound { side: i8, edge: Vector3<f64>, center: Vector3<f64> },
    PullDetected { force: f64 },
    RotationAttempt { angle: f64, total: f64, torque: f64 },
    Regrip,
    CupMode { cups: usize },
    /// Rotation between successive vacuum attempts, rad.
    Reorientation { angle: f64, about: Pivot },
    Seal { sealed: bool },
    WeightCheck { delta_fz: f64, passed: bool, pulling: bool },
    Delivered { id: String },
    SafetyStop,
    Failure { reason: FailureReason },
}

/// One telemetry line `{t, phase, pose, wrench, event}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub t: f64,
    pub phase: SkillPhase,
    pub pose: Pose,
    pub wrench: Wrench6,
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspResult {
    pub outcome: Outcome,
    pub phases: Vec<SkillPhase>,
    pub telemetry: Vec<TelemetryRecord>,
}

impl GraspResult {
    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.telemetry.iter().map(|r| &r.event)
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.telemetry {
            out.push_str(&serde_json::to_string(r).expect("telemetry serializes"));
            out.push('\n');
        }
        out
    }
}

/// Whether a phase sequence follows the skill grammar
/// `ToolChange? MoveSafe MovePrePose ToolStrategy (Deliver ReturnSafe | ReportFail ReturnSafe)`.
pub fn phases_well_formed(phases: &[SkillPhase]) -> bool {
    use SkillPhase::*;
    let rest = match phases.first() {
        Some(ToolChange) => &phases[1..],
        _ => phases,
    };
    matches!(
        rest,
        [MoveSafe, MovePrePose, ToolStrategy, Deliver, ReturnSafe]
            | [MoveSafe, MovePrePose, ToolStrategy, ReportFail, ReturnSafe]
    )
}

/// Whether a safety-aborted sequence is a grammar prefix ended by `ReportFail`,
/// or a failure sequence cut short on its way back.
pub fn phases_aborted_prefix(phases: &[SkillPhase]) -> bool {
    use SkillPhase::*;
    let rest = match phases.first() {
        Some(ToolChange) => &phases[1..],
        _ => phases,
    };
    if rest == [MoveSafe, MovePrePose, ToolStrategy, ReportFail, ReturnSafe] {
        return true;
    }
    let Some((&ReportFail, head)) = rest.split_last() else { return false };
    let full = [MoveSafe, MovePrePose, ToolStrategy, Deliver, ReturnSafe];
    head.len() <= full.len() && head.iter().zip(full.iter()).all(|(a, b)| a == b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use SkillPhase::*;

    #[test]
    fn grammar_accepts_both_endings() {
        assert!(phases_well_formed(&[ToolChange, MoveSafe, MovePrePose, ToolStrategy, Deliver, ReturnSafe]));
        assert!(phases_well_formed(&[MoveSafe, MovePrePose, ToolStrategy, ReportFail, ReturnSafe]));
        assert!(!phases_well_formed(&[MoveSafe, ToolStrategy, Deliver, ReturnSafe]));
        assert!(!phases_well_formed(&[MoveSafe, MovePrePose, ToolStrategy, Deliver, ReportFail, ReturnSafe]));
    }

    #[test]
    fn aborted_prefixes() {
        assert!(phases_aborted_prefix(&[ToolChange, MoveSafe, ReportFail]));
        assert!(phases_aborted_prefix(&[MoveSafe, MovePrePose, ToolStrategy, ReportFail]));
        assert!(!phases_aborted_prefix(&[MovePrePose, ReportFail]));
        assert!(phases_aborted_prefix(&[MoveSafe, MovePrePose, ToolStrategy, ReportFail, ReturnSafe]));
        assert!(!phases_aborted_prefix(&[MoveSafe, MovePrePose, ToolStrategy, ReportFail, ReturnSafe, ReportFail]));
    }

    #[test]
    fn events_serialize_with_a_kind_tag() {
        let s = serde_json::to_string(&Event::Advance { distance: 0.01 }).unwrap();
        assert_eq!(s, r#"{"kind":"Advance","distance":0.01}"#);
    }
}
