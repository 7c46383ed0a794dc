//! Tactile arrays, center-of-pressure estimation and the FT sensor model.
//!
//! A finger's pressure array lies on the inner face of the finger. Row 0 is at
//! the palm end, the last row touches the fingertip; columns run across the
//! finger. Array coordinates put the center of cell `(0, 0)` at the origin, so
//! cell `(r, c)` sits at `(r * pitch, c * pitch)`.

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::SensingError;
use crate::geometry::{Frame, Pose, Wrench6};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureImage {
    rows: usize,
    cols: usize,
    cell_pitch: f64,
    /// Row-major, `rows * cols` values in newtons per cell.
    pressures: Vec<f64>,
}

impl PressureImage {
    pub fn new(rows: usize, cols: usize, cell_pitch: f64, pressures: Vec<f64>) -> Result<Self, SensingError> {
        if rows == 0 || cols == 0 || pressures.len() != rows * cols {
            return Err(SensingError::BadShape { expected: rows * cols, found: pressures.len() });
        }
        if pressures.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(SensingError::NegativePressure);
        }
        Ok(Self { rows, cols, cell_pitch, pressures })
    }

    pub fn zeros(rows: usize, cols: usize, cell_pitch: f64) -> Self {
        Self { rows, cols, cell_pitch, pressures: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_pitch(&self) -> f64 {
        self.cell_pitch
    }

    pub fn pressures(&self) -> &[f64] {
        &self.pressures
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pressures[row * self.cols + col]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pressures[row * self.cols + col] = value.max(0.0);
    }

    pub fn total(&self) -> f64 {
        self.pressures.iter().sum()
    }

    /// Length of the array along the finger.
    pub fn length(&self) -> f64 {
        self.rows as f64 * self.cell_pitch
    }

    /// Distance from the fingertip to a point at along-finger array coordinate `x`.
    pub fn distance_from_tip(&self, x: f64) -> f64 {
        (self.rows as f64 - 0.5) * self.cell_pitch - x
    }

    /// Offset from the finger centerline for across-finger array coordinate `y`.
    pub fn lateral_offset(&self, y: f64) -> f64 {
        y - 0.5 * (self.cols as f64 - 1.0) * self.cell_pitch
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.pressures.iter_mut().for_each(|p| *p *= k);
        out
    }
}

/// Center of pressure of one or both fingers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoP {
    /// Array coordinates `(along finger, across finger)`, meters.
    pub position_in_finger: Vector2<f64>,
    pub total_force: f64,
    /// `^TCP z_CoP`: distance from the fingertip (TCP) back to the CoP.
    pub z_offset_tcp: f64,
    /// Offset of the CoP from the finger centerline.
    pub lateral_offset: f64,
    /// Along-finger coordinate measured from the palm end of the array.
    pub along_from_base: f64,
    /// Array length along the finger.
    pub array_length: f64,
}

/// Pressure-weighted centroid of the cell centers.
pub fn compute_cop(img: &PressureImage) -> Result<CoP, SensingError> {
    let total = img.total();
    if total <= 0.0 {
        return Err(SensingError::NoContact);
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for r in 0..img.rows {
        for c in 0..img.cols {
            let p = img.get(r, c);
            sx += p * r as f64;
            sy += p * c as f64;
        }
    }
    let x = sx / total * img.cell_pitch;
    let y = sy / total * img.cell_pitch;
    Ok(CoP {
        position_in_finger: Vector2::new(x, y),
        total_force: total,
        z_offset_tcp: img.distance_from_tip(x),
        lateral_offset: img.lateral_offset(y),
        along_from_base: x + 0.5 * img.cell_pitch,
        array_length: img.length(),
    })
}

/// Force-weighted combination of the two finger CoPs (same array layout).
pub fn combined_cop(left: &PressureImage, right: &PressureImage) -> Result<CoP, SensingError> {
    match (compute_cop(left), compute_cop(right)) {
        (Ok(l), Ok(r)) => {
            let total = l.total_force + r.total_force;
            let wl = l.total_force / total;
            let wr = r.total_force / total;
            let pos = l.position_in_finger * wl + r.position_in_finger * wr;
            Ok(CoP {
                position_in_finger: pos,
                total_force: total,
                z_offset_tcp: left.distance_from_tip(pos.x),
                lateral_offset: left.lateral_offset(pos.y),
                along_from_base: pos.x + 0.5 * left.cell_pitch,
                array_length: left.length(),
            })
        }
        (Ok(c), Err(_)) | (Err(_), Ok(c)) => Ok(c),
        (Err(e), Err(_)) => Err(e),
    }
}

/// `^EE T_CoP`: pure translation with `^EE z_CoP = ^EE z_TCP - ^TCP z_CoP`.
///
/// Assumes the TCP sits at the fingertip on the EE z-axis; the CoP's lateral
/// offset along the finger width becomes the y component.
pub fn cop_frame(z_tcp_ee: f64, cop: &CoP) -> Pose {
    Pose::from_translation(
        Vector3::new(0.0, cop.lateral_offset, z_tcp_ee - cop.z_offset_tcp),
        Frame::EE,
        Frame::COP,
    )
}

/// Two-finger gripper tactile state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerPair {
    pub left: PressureImage,
    pub right: PressureImage,
    pub opening_width: f64,
}

/// `|sum(left) - sum(right)|`.
pub fn finger_force_difference(fp: &FingerPair) -> f64 {
    (fp.left.total() - fp.right.total()).abs()
}

/// Whether the CoP lies within `tip_band` of the fingertip.
pub fn cop_at_tip(cop: &CoP, tip_band: f64) -> bool {
    cop.along_from_base >= cop.array_length - tip_band - 1e-12
}

/// Additive zero-mean Gaussian noise on each wrench component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtNoise {
    pub sigma_force: f64,
    pub sigma_torque: f64,
}

impl Default for FtNoise {
    fn default() -> Self {
        Self { sigma_force: 0.1, sigma_torque: 0.005 }
    }
}

impl FtNoise {
    pub fn none() -> Self {
        Self { sigma_force: 0.0, sigma_torque: 0.0 }
    }

    pub fn apply<R: Rng + ?Sized>(&self, w: &Wrench6, rng: &mut R) -> Wrench6 {
        let mut out = w.clone();
        if self.sigma_force > 0.0 {
            let n = Normal::new(0.0, self.sigma_force).expect("finite sigma");
            out.force += Vector3::from_fn(|_, _| n.sample(rng));
        }
        if self.sigma_torque > 0.0 {
            let n = Normal::new(0.0, self.sigma_torque).expect("finite sigma");
            out.torque += Vector3::from_fn(|_, _| n.sample(rng));
        }
        out
    }
}

/// One FT reading of the world's current contact wrench, EE frame.
pub fn ft_read(world: &mut crate::world::World) -> Wrench6 {
    world.ft_read()
}
