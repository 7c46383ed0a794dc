//! Scene description: objects, grippers, noise and controller settings.
//!
//! Scenes are stored as JSON and carry a `schema_version`.

use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geometry::{Frame, Pose};
use crate::strategies::{ObjectProps, TableColumn};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Box,
    /// Horizontal cylinder lying along its longer planar dimension.
    Cylinder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    Flat,
    Laminated,
    Curved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Fixture {
    None,
    /// Joint about `axis` (base frame) through the object's volume center.
    Rotary { axis: Vector3<f64>, release_angle: f64 },
    Rigid,
}

impl Default for Fixture {
    fn default() -> Self {
        Fixture::None
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Target,
    /// Static scenery: housings, clutter, walls. Never attaches.
    Obstacle,
}

/// Ground truth of one scene object.
///
/// `center` is the center of the object's top (camera-facing) surface and
/// `dims` its planar extents along the local x and y axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub shape: Shape,
    #[serde(rename = "center")]
    pub true_center: Vector3<f64>,
    #[serde(rename = "normal", default = "up")]
    pub true_normal: Vector3<f64>,
    #[serde(rename = "dims")]
    pub true_dims: Vector2<f64>,
    pub height: f64,
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default = "default_surface")]
    pub surface: Surface,
    /// Surface kind of the side faces, when different from the top.
    #[serde(default)]
    pub side_surface: Option<Surface>,
    #[serde(default)]
    pub fixture: Fixture,
    #[serde(default)]
    pub role: Role,
    /// Width of a non-sealing groove across the middle of the top face.
    #[serde(default)]
    pub groove_width: f64,
    #[serde(default)]
    pub props: Option<ObjectProps>,
    #[serde(default)]
    pub table2: Vec<TableColumn>,
    /// Objects that must be removed before this one is reachable.
    #[serde(default)]
    pub covered_by: Vec<String>,
}

fn up() -> Vector3<f64> {
    Vector3::z()
}

fn default_mass() -> f64 {
    0.1
}

fn default_surface() -> Surface {
    Surface::Flat
}

impl ObjectSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mass > 0.0) {
            return Err("mass must be > 0".into());
        }
        if self.true_dims.iter().any(|&d| !(d > 0.0)) || !(self.height > 0.0) {
            return Err("dims and height must be > 0".into());
        }
        if (self.true_normal.norm() - 1.0).abs() > 1e-9 {
            return Err("normal must be a unit vector".into());
        }
        if let Fixture::Rotary { axis, release_angle } = &self.fixture {
            if !(*release_angle > 0.0 && *release_angle <= std::f64::consts::PI) {
                return Err("rotary release_angle must lie in (0, pi]".into());
            }
            if axis.norm() < 1e-9 {
                return Err("rotary axis must be non-zero".into());
            }
        }
        if self.groove_width < 0.0 {
            return Err("groove_width must be >= 0".into());
        }
        Ok(())
    }

    pub fn side_surface(&self) -> Surface {
        self.side_surface.unwrap_or(self.surface)
    }

    /// Cylinder radius (half the shorter planar dimension).
    pub fn radius(&self) -> f64 {
        0.5 * self.true_dims.min()
    }

    /// Extent along the local vertical axis.
    pub fn vertical_extent(&self) -> f64 {
        match self.shape {
            Shape::Box => self.height,
            Shape::Cylinder => self.true_dims.min(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Gaussian,
    /// Zero-mean uniform with the given standard deviation.
    Uniform,
}

/// Vision error model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_x: Vector3<f64>,
    /// Standard deviation of the normal's tilt angle, radians.
    pub sigma_n: f64,
    pub sigma_d: Vector2<f64>,
    #[serde(default)]
    pub distribution: Distribution,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            sigma_x: Vector3::zeros(),
            sigma_n: 0.0,
            sigma_d: Vector2::zeros(),
            distribution: Distribution::Gaussian,
            seed: 0,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            sigma_x: self.sigma_x * k,
            sigma_n: self.sigma_n * k,
            sigma_d: self.sigma_d * k,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sigma_x.iter().chain(self.sigma_d.iter()).any(|&s| !(s >= 0.0)) || !(self.sigma_n >= 0.0) {
            return Err("all sigmas must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GripperKind {
    /// Tactile fingers.
    A,
    /// Slim fingers.
    B,
    /// Vacuum cups.
    C,
}

impl std::fmt::Display for GripperKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TactileLayout {
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
}

impl Default for TactileLayout {
    fn default() -> Self {
        Self { rows: 8, cols: 4, pitch: 0.004 }
    }
}

/// Gripper geometry. The TCP sits at the fingertips (or cup rims) on the EE
/// z-axis; TCP z points along the approach direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperModel {
    pub kind: GripperKind,
    pub max_opening: f64,
    pub finger_length: f64,
    pub finger_width: f64,
    pub finger_thickness: f64,
    pub palm_height: f64,
    pub tactile: Option<TactileLayout>,
    pub payload: f64,
    pub cup_count: usize,
    pub cup_spacing: f64,
    pub cup_diameter: f64,
    pub cup_height: f64,
    pub bar_width: f64,
    /// `^EE p_TCP`.
    pub tcp_offset: Vector3<f64>,
    /// Pre-pose stand-off along the object normal.
    pub d_safety: f64,
    /// How far past the reported top surface the TCP goes for a finger grasp.
    pub grasp_depth: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self::default_for(GripperKind::A)
    }
}

impl GripperModel {
    pub fn default_for(kind: GripperKind) -> Self {
        match kind {
            GripperKind::A => Self {
                kind,
                max_opening: 0.10,
                finger_length: 0.040,
                finger_width: 0.016,
                finger_thickness: 0.008,
                palm_height: 0.03,
                tactile: Some(TactileLayout::default()),
                payload: 2.0,
                cup_count: 0,
                cup_spacing: 0.0,
                cup_diameter: 0.0,
                cup_height: 0.0,
                bar_width: 0.0,
                tcp_offset: Vector3::new(0.0, 0.0, 0.20),
                d_safety: 0.06,
                grasp_depth: 0.010,
            },
            GripperKind::B => Self {
                kind,
                max_opening: 0.036,
                finger_length: 0.030,
                finger_width: 0.008,
                finger_thickness: 0.003,
                palm_height: 0.02,
                tactile: None,
                payload: 1.0,
                cup_count: 0,
                cup_spacing: 0.0,
                cup_diameter: 0.0,
                cup_height: 0.0,
                bar_width: 0.0,
                tcp_offset: Vector3::new(0.0, 0.0, 0.18),
                d_safety: 0.06,
                grasp_depth: 0.012,
            },
            GripperKind::C => Self {
                kind,
                max_opening: 0.0,
                finger_length: 0.0,
                finger_width: 0.0,
                finger_thickness: 0.0,
                palm_height: 0.0,
                tactile: None,
                payload: 5.0,
                cup_count: 2,
                cup_spacing: 0.09,
                cup_diameter: 0.03,
                cup_height: 0.02,
                bar_width: 0.03,
                tcp_offset: Vector3::new(0.0, 0.0, 0.15),
                d_safety: 0.05,
                grasp_depth: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.kind {
            GripperKind::A | GripperKind::B => {
                if !(self.max_opening > 0.0 && self.finger_length > 0.0 && self.finger_width > 0.0) {
                    return Err("finger grippers need positive opening and finger size".into());
                }
                if self.cup_count != 0 {
                    return Err("finger grippers carry no cups".into());
                }
                if let Some(t) = self.tactile {
                    if t.rows == 0 || t.cols == 0 || !(t.pitch > 0.0) {
                        return Err("tactile layout must be non-empty".into());
                    }
                    if t.rows as f64 * t.pitch > self.finger_length + 1e-12 {
                        return Err("tactile array longer than the finger".into());
                    }
                }
            }
            GripperKind::C => {
                if !(1..=2).contains(&self.cup_count) {
                    return Err("cup_count must be 1 or 2".into());
                }
                if !(self.cup_diameter > 0.0) || (self.cup_count == 2 && !(self.cup_spacing > 0.0)) {
                    return Err("cups need positive diameter and spacing".into());
                }
                if self.max_opening != 0.0 {
                    return Err("vacuum gripper has no fingers".into());
                }
            }
        }
        Ok(())
    }

    /// `^EE T_TCP`.
    pub fn tcp_pose(&self) -> Pose {
        Pose::from_translation(self.tcp_offset, Frame::EE, Frame::TCP)
    }

    /// Cup centers in the TCP frame (cups lie along TCP y).
    pub fn cup_centers(&self) -> Vec<Vector3<f64>> {
        match self.cup_count {
            1 => vec![Vector3::zeros()],
            2 => vec![
                Vector3::new(0.0, 0.5 * self.cup_spacing, 0.0),
                Vector3::new(0.0, -0.5 * self.cup_spacing, 0.0),
            ],
            _ => vec![],
        }
    }

    pub fn is_finger(&self) -> bool {
        matches!(self.kind, GripperKind::A | GripperKind::B)
    }
}

/// The tool rack: one model per gripper kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolRack {
    #[serde(rename = "A")]
    pub a: GripperModel,
    #[serde(rename = "B")]
    pub b: GripperModel,
    #[serde(rename = "C")]
    pub c: GripperModel,
}

impl Default for ToolRack {
    fn default() -> Self {
        Self {
            a: GripperModel::default_for(GripperKind::A),
            b: GripperModel::default_for(GripperKind::B),
            c: GripperModel::default_for(GripperKind::C),
        }
    }
}

impl ToolRack {
    pub fn get(&self, kind: GripperKind) -> &GripperModel {
        match kind {
            GripperKind::A => &self.a,
            GripperKind::B => &self.b,
            GripperKind::C => &self.c,
        }
    }
}

/// Physics and sensor constants of the simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    /// Penalty stiffness, N/m.
    pub k_contact: f64,
    /// Cap on the contact force between the gripper and any one object, N.
    pub f_cap: f64,
    pub gravity: f64,
    /// Fixture translational stiffness, N/m, and force cap, N.
    pub k_fixture: f64,
    pub fixture_force_cap: f64,
    /// Fixture rotational stiffness, N·m/rad, and torque cap, N·m.
    pub k_fixture_rot: f64,
    pub fixture_torque_cap: f64,
    /// Coulomb friction coefficient used for the finger grasp stability cone.
    pub friction: f64,
    /// Minimum finger force counted as a grasping contact, N.
    pub grip_threshold: f64,
    /// Allowed cup rim height band relative to the surface: compression and gap, m.
    pub seal_compression: f64,
    pub seal_gap: f64,
    /// Vacuum seal success probability per surface kind.
    pub seal_prob_flat: f64,
    pub seal_prob_laminated: f64,
    pub seal_prob_curved: f64,
    pub finger_close_speed: f64,
    pub finger_open_speed: f64,
    pub ft_noise: crate::sensing::FtNoise,
    /// Readings averaged for a tare or weight check.
    pub weight_samples: usize,
    pub weight_tolerance: f64,
    /// Excess vertical force above the expected weight that counts as pulling, N.
    pub f_pull: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            k_contact: 1.0e4,
            f_cap: 50.0,
            gravity: 9.81,
            k_fixture: 1.0e4,
            fixture_force_cap: 100.0,
            k_fixture_rot: 20.0,
            fixture_torque_cap: 10.0,
            friction: 0.5,
            grip_threshold: 1.0,
            seal_compression: 0.003,
            seal_gap: 0.001,
            seal_prob_flat: 1.0,
            seal_prob_laminated: 0.0,
            seal_prob_curved: 0.3,
            finger_close_speed: 0.05,
            finger_open_speed: 0.1,
            ft_noise: crate::sensing::FtNoise::default(),
            weight_samples: 50,
            weight_tolerance: 0.2,
            f_pull: 15.0,
        }
    }
}

/// Controller and motion settings of the skill layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub dt: f64,
    /// Force gain, (m/s)/N, on translational axes.
    pub kp_force: f64,
    /// Torque gain, (rad/s)/(N·m), on rotational axes.
    pub kp_torque: f64,
    pub max_linear: f64,
    pub max_angular: f64,
    pub filter_cutoff_hz: f64,
    pub free_speed: f64,
    pub approach_speed: f64,
    pub search_speed: f64,
    pub contact_threshold: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            dt: 0.002,
            kp_force: 0.01,
            kp_torque: 2.0,
            max_linear: 0.5,
            max_angular: 1.5,
            filter_cutoff_hz: 50.0,
            free_speed: 0.5,
            approach_speed: 0.04,
            search_speed: 0.02,
            contact_threshold: 2.0,
        }
    }
}

/// Poses and thresholds shared by all skills.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkillConfig {
    /// TCP position of the safe pose (tool pointing down).
    pub safe_position: Vector3<f64>,
    /// TCP position where grasped objects are released.
    pub release_position: Vector3<f64>,
    /// Height of the lift before a weight check, m.
    pub lift_height: f64,
    /// Simulated time budget per strategy attempt, s.
    pub timeout: f64,
    /// Target grip force while closing, N.
    pub grip_force: f64,
    /// Finger force difference regarded as small, N.
    pub small_force_difference: f64,
    /// Net FT force regarded as small while closing, N.
    pub small_ft_force: f64,
    /// Approach past the goal when nothing is touched, m.
    pub overshoot: f64,
    /// Re-advance distance when the CoP sits at the fingertip, m.
    pub advance_step: f64,
    pub max_advances: usize,
    /// Tip band for the CoP check; `None` means the last array row.
    pub tip_band: Option<f64>,
    /// Strategy A rotation increment and per-grip maximum, rad.
    pub rotation_step: f64,
    pub rotation_max: f64,
    /// Torque about the rotation axis above which a fixture counts as rigid, N·m.
    pub rotation_torque_limit: f64,
    /// Lift probe after each rotation step, m.
    pub release_probe: f64,
    pub max_regrips: usize,
    /// Strategy B lateral search offset as a multiple of the opening width.
    pub search_factor: f64,
    /// Strategy C reorientation step, rad.
    pub reorientation_step: f64,
    /// Downward force while seating vacuum cups, N.
    pub cup_press_force: f64,
}

impl Default for SkillConfig {
    fn default() -> Self {
        Self {
            safe_position: Vector3::new(0.3, 0.0, 0.45),
            release_position: Vector3::new(0.0, 0.5, 0.35),
            lift_height: 0.03,
            timeout: 30.0,
            grip_force: 5.0,
            small_force_difference: 1.0,
            small_ft_force: 1.5,
            overshoot: 0.005,
            advance_step: 0.01,
            max_advances: 3,
            tip_band: None,
            rotation_step: 2f64.to_radians(),
            rotation_max: 30f64.to_radians(),
            rotation_torque_limit: 0.5,
            release_probe: 0.003,
            max_regrips: 4,
            search_factor: 1.2,
            reorientation_step: std::f64::consts::FRAC_PI_4,
            cup_press_force: 8.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub gripper: ToolRack,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub world: WorldParams,
    #[serde(default)]
    pub skill: SkillConfig,
}

impl Scene {
    pub fn from_json(text: &str, path: &str) -> Result<Scene, ConfigError> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scene.validate(path)?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scene, ConfigError> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p)
            .map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?;
        Self::from_json(&text, &p.display().to_string())
    }

    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        let field = |field: String, message: String| ConfigError::Field {
            path: path.to_string(),
            field,
            message,
        };
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version".into(),
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            if !seen.insert(o.id.as_str()) {
                return Err(field(format!("objects[{i}].id"), format!("duplicate id `{}`", o.id)));
            }
            o.validate().map_err(|m| field(format!("objects[{i}] ({})", o.id), m))?;
        }
        for (i, o) in self.objects.iter().enumerate() {
            if let Some(c) = o.covered_by.iter().find(|c| self.object(c).is_none()) {
                return Err(field(format!("objects[{i}].covered_by"), format!("unknown object `{c}`")));
            }
        }
        for (name, g) in [("A", &self.gripper.a), ("B", &self.gripper.b), ("C", &self.gripper.c)] {
            if format!("{}", g.kind) != name {
                return Err(field(format!("gripper.{name}.kind"), "kind does not match its slot".into()));
            }
            g.validate().map_err(|m| field(format!("gripper.{name}"), m))?;
        }
        self.noise.validate().map_err(|m| field("noise".into(), m))?;
        if !(self.controller.dt > 0.0) {
            return Err(field("controller.dt".into(), "must be > 0".into()));
        }
        if !(self.controller.kp_force > 0.0 && self.controller.kp_torque > 0.0) {
            return Err(field("controller.kp_*".into(), "gains must be > 0".into()));
        }
        Ok(())
    }

    pub fn object(&self, id: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }
}
