//! Hybrid Cartesian force-velocity control, the kinematic plant step and
//! guarded moves built on top of them.
//!
//! Axis index convention for selection matrices, gains and scaling vectors is
//! the twist/wrench ordering: `0..3` rotation about x, y, z and `3..6`
//! translation along x, y, z.
//!
//! Wrench sign convention throughout the crate: the force and torque the robot
//! exerts on its environment. Pressing along +z reads as positive `force.z`.

use nalgebra::{Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::ControlError;
use crate::geometry::{so3_exp, Frame, Pose, Twist6, Wrench6};

/// Binary diagonal selection matrices `S_vel` and `S_frc`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMatrices {
    vel_axes: [bool; 6],
    frc_axes: [bool; 6],
}

impl SelectionMatrices {
    pub fn new(vel_axes: [bool; 6], frc_axes: [bool; 6]) -> Result<Self, ControlError> {
        if let Some(axis) = (0..6).find(|&i| vel_axes[i] && frc_axes[i]) {
            return Err(ControlError::AxisConflict { axis });
        }
        Ok(Self { vel_axes, frc_axes })
    }

    /// Every axis velocity controlled.
    pub fn velocity_only() -> Self {
        Self { vel_axes: [true; 6], frc_axes: [false; 6] }
    }

    pub fn force_only() -> Self {
        Self { vel_axes: [false; 6], frc_axes: [true; 6] }
    }

    /// Force control on the listed axes, velocity control on the rest.
    pub fn with_force_axes(axes: &[usize]) -> Self {
        let mut frc = [false; 6];
        for &a in axes {
            frc[a] = true;
        }
        let mut vel = [true; 6];
        for i in 0..6 {
            vel[i] = !frc[i];
        }
        Self { vel_axes: vel, frc_axes: frc }
    }

    pub fn vel_axes(&self) -> [bool; 6] {
        self.vel_axes
    }

    pub fn frc_axes(&self) -> [bool; 6] {
        self.frc_axes
    }

    fn diag(axes: &[bool; 6]) -> Vector6<f64> {
        Vector6::from_fn(|i, _| if axes[i] { 1.0 } else { 0.0 })
    }
}

/// Gains and set-points of the hybrid control law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    gain: Matrix6<f64>,
    scaling: Vector6<f64>,
    max_twist: Twist6,
    desired_wrench: Wrench6,
    dt: f64,
}

impl ControllerParams {
    pub fn new(
        gain: Matrix6<f64>,
        scaling: Vector6<f64>,
        max_twist: Twist6,
        desired_wrench: Wrench6,
        dt: f64,
    ) -> Result<Self, ControlError> {
        if (gain - gain.transpose()).abs().max() > 1e-12 || gain.cholesky().is_none() {
            return Err(ControlError::GainNotPositiveDefinite);
        }
        if let Some((index, &value)) =
            scaling.iter().enumerate().find(|(_, s)| !(s.abs() <= 1.0))
        {
            return Err(ControlError::ScalingOutOfRange { index, value });
        }
        if !(dt > 0.0) {
            return Err(ControlError::NonPositiveDt(dt));
        }
        if max_twist.frame != desired_wrench.frame {
            return Err(ControlError::Geometry(crate::error::GeometryError::FrameMismatch {
                expected: max_twist.frame.to_string(),
                found: desired_wrench.frame.to_string(),
            }));
        }
        Ok(Self { gain, scaling, max_twist, desired_wrench, dt })
    }

    pub fn gain(&self) -> &Matrix6<f64> {
        &self.gain
    }

    pub fn scaling(&self) -> &Vector6<f64> {
        &self.scaling
    }

    pub fn max_twist(&self) -> &Twist6 {
        &self.max_twist
    }

    pub fn desired_wrench(&self) -> &Wrench6 {
        &self.desired_wrench
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Same gains with a new velocity scaling vector.
    pub fn with_scaling(&self, scaling: Vector6<f64>) -> Result<Self, ControlError> {
        Self::new(self.gain, scaling, self.max_twist.clone(), self.desired_wrench.clone(), self.dt)
    }

    pub fn with_desired_wrench(&self, w: Wrench6) -> Result<Self, ControlError> {
        Self::new(self.gain, self.scaling, self.max_twist.clone(), w, self.dt)
    }
}

/// `u = S_vel (s ∘ V_max) + S_frc K_P (F_des - F)`.
pub fn hybrid_command(sel: &SelectionMatrices, p: &ControllerParams, measured: &Wrench6) -> Twist6 {
    let s_vel = SelectionMatrices::diag(&sel.vel_axes);
    let s_frc = SelectionMatrices::diag(&sel.frc_axes);
    let velocity = p.scaling.component_mul(&p.max_twist.to_vector());
    let error = p.desired_wrench.to_vector() - measured.to_vector();
    let force = p.gain * error;
    let u = s_vel.component_mul(&velocity) + s_frc.component_mul(&force);
    Twist6::from_vector(&u, p.max_twist.frame.clone())
}

/// Robot end-effector state as seen by the control loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EEState {
    pub pose: Pose,
    pub measured_wrench: Wrench6,
}

/// Explicit Euler step of the kinematic plant `x_{t+1} = x_t + u δt`.
///
/// A twist labelled with the pose's own frame is a body twist (velocity of the
/// EE origin in EE axes); one labelled with the pose's reference frame is
/// applied directly. Rotation is integrated through the exponential map.
pub fn step(state: &EEState, u: &Twist6, dt: f64) -> Result<EEState, ControlError> {
    if !(dt > 0.0) {
        return Err(ControlError::NonPositiveDt(dt));
    }
    let pose = &state.pose;
    let (w_ref, v_ref) = if u.frame == pose.to_frame {
        (pose.rotation * u.angular, pose.rotation * u.linear)
    } else if u.frame == pose.from_frame {
        (u.angular, u.linear)
    } else {
        return Err(ControlError::Geometry(crate::error::GeometryError::FrameMismatch {
            expected: pose.to_frame.to_string(),
            found: u.frame.to_string(),
        }));
    };
    let mut next = state.clone();
    next.pose.translation += v_ref * dt;
    if w_ref.iter().any(|&x| x != 0.0) {
        next.pose.rotation = so3_exp(&(w_ref * dt)) * pose.rotation;
    }
    Ok(next)
}

/// Single-pole low-pass filter for wrench readings.
#[derive(Clone, Debug)]
pub struct WrenchFilter {
    alpha: f64,
    state: Option<Vector6<f64>>,
}

impl WrenchFilter {
    pub fn new(cutoff_hz: f64, dt: f64) -> Self {
        let alpha = if cutoff_hz <= 0.0 {
            1.0
        } else {
            let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
            dt / (rc + dt)
        };
        Self { alpha, state: None }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn update(&mut self, w: &Wrench6) -> Wrench6 {
        let x = w.to_vector();
        let y = match self.state {
            None => x,
            Some(prev) => prev + (x - prev) * self.alpha,
        };
        self.state = Some(y);
        Wrench6::from_vector(&y, w.frame.clone())
    }

    pub fn reset(&mut self) {
        self.state = None;
    }
}

/// Why a control loop stopped before finishing its motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interrupt {
    /// Safety monitor issued a stop.
    SafetyHalt,
    /// The per-attempt time budget ran out.
    Timeout,
}

/// Anything that can run one control cycle of the kinematic plant.
pub trait ControlLoop {
    /// Applies `u` (EE body twist) for one cycle and returns the filtered
    /// wrench measured afterwards, in the EE frame.
    fn cycle(&mut self, u: &Twist6) -> Result<Wrench6, Interrupt>;
    fn ee_pose(&self) -> &Pose;
    fn dt(&self) -> f64;
}

#[derive(Clone, Debug, PartialEq)]
pub enum ContactEvent {
    Contact { pose: Pose, wrench: Wrench6, travelled: f64 },
    NoContact { final_pose: Pose },
}

impl ContactEvent {
    pub fn is_contact(&self) -> bool {
        matches!(self, ContactEvent::Contact { .. })
    }
}

/// Velocity-mode move along a base-frame `direction` until the force pushed
/// along that direction exceeds `contact_threshold`, or `max_distance` is
/// covered.
pub fn guarded_move<L: ControlLoop + ?Sized>(
    plant: &mut L,
    direction: &Vector3<f64>,
    speed: f64,
    contact_threshold: f64,
    max_distance: f64,
) -> Result<ContactEvent, Interrupt> {
    let dir = direction.normalize();
    let dt = plant.dt();
    let start = plant.ee_pose().translation;
    let mut travelled = 0.0;
    loop {
        let remaining = max_distance - travelled;
        if remaining <= 1e-12 {
            return Ok(ContactEvent::NoContact { final_pose: plant.ee_pose().clone() });
        }
        let v = speed.min(remaining / dt);
        let body = plant.ee_pose().rotation.transpose() * dir * v;
        let wrench = plant.cycle(&Twist6::new(Vector3::zeros(), body, Frame::EE))?;
        travelled = (plant.ee_pose().translation - start).dot(&dir);
        let pushed = (plant.ee_pose().rotation * wrench.force).dot(&dir);
        if pushed > contact_threshold {
            return Ok(ContactEvent::Contact {
                pose: plant.ee_pose().clone(),
                wrench,
                travelled,
            });
        }
    }
}
