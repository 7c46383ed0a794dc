//! Fixture joints holding objects to the product.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::scene::Fixture;
use crate::geometry::{rotation_about, so3_log};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureState {
    pub kind: Fixture,
    pub engaged: bool,
    /// Accumulated rotation about the rotary axis, rad.
    pub angle: f64,
    anchor_rotation: Matrix3<f64>,
    anchor_translation: Vector3<f64>,
    /// Unit axis in the base frame (zero for non-rotary fixtures).
    axis: Vector3<f64>,
    /// Point on the axis, base frame.
    pivot: Vector3<f64>,
    last_rotation: Matrix3<f64>,
}

/// Restoring wrench of an engaged fixture, expressed as the force and torque
/// the robot exerts on it through the held object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixtureReaction {
    pub force: Vector3<f64>,
    /// Applied at the object's reference point.
    pub torque: Vector3<f64>,
}

impl FixtureState {
    pub fn new(kind: Fixture, rotation: Matrix3<f64>, translation: Vector3<f64>, pivot: Vector3<f64>) -> Self {
        let (engaged, axis) = match &kind {
            Fixture::None => (false, Vector3::zeros()),
            Fixture::Rotary { axis, .. } => (true, axis.normalize()),
            Fixture::Rigid => (true, Vector3::zeros()),
        };
        Self {
            kind,
            engaged,
            angle: 0.0,
            anchor_rotation: rotation,
            anchor_translation: translation,
            axis,
            pivot,
            last_rotation: rotation,
        }
    }

    /// Pose the object would have if the only motion were the allowed rotation.
    pub fn expected(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let r = if self.angle == 0.0 { Matrix3::identity() } else { rotation_about(&self.axis, self.angle) };
        let rot = r * self.anchor_rotation;
        let trans = self.pivot + r * (self.anchor_translation - self.pivot);
        (rot, trans)
    }

    /// Tracks the object's rotation and releases a rotary joint once its
    /// accumulated angle reaches the release angle.
    pub fn update(&mut self, rotation: &Matrix3<f64>) {
        if !self.engaged {
            self.last_rotation = *rotation;
            return;
        }
        if let Fixture::Rotary { release_angle, .. } = self.kind {
            let delta = so3_log(&(rotation * self.last_rotation.transpose()));
            self.angle += delta.dot(&self.axis);
            if self.angle.abs() >= release_angle {
                self.engaged = false;
            }
        }
        self.last_rotation = *rotation;
    }

    pub fn reaction(
        &self,
        rotation: &Matrix3<f64>,
        translation: &Vector3<f64>,
        k: f64,
        force_cap: f64,
        k_rot: f64,
        torque_cap: f64,
    ) -> FixtureReaction {
        if !self.engaged {
            return FixtureReaction { force: Vector3::zeros(), torque: Vector3::zeros() };
        }
        let (r_exp, t_exp) = self.expected();
        let force = cap(k * (translation - t_exp), force_cap);
        let err = so3_log(&(rotation * r_exp.transpose()));
        let torque = cap(k_rot * err, torque_cap);
        FixtureReaction { force, torque }
    }
}

fn cap(v: Vector3<f64>, limit: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > limit {
        v * (limit / n)
    } else {
        v
    }
}

/// Advances a fixture with the object's current orientation.
pub fn fixture_update(state: &FixtureState, rotation: &Matrix3<f64>) -> FixtureState {
    let mut next = state.clone();
    next.update(rotation);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rotary(release_deg: f64) -> FixtureState {
        FixtureState::new(
            Fixture::Rotary { axis: Vector3::x(), release_angle: release_deg.to_radians() },
            Matrix3::identity(),
            Vector3::new(0.0, 0.0, 0.01),
            Vector3::zeros(),
        )
    }

    #[test]
    fn rotary_releases_past_its_angle() {
        let mut f = rotary(10.0);
        for k in 1..=6 {
            f.update(&rotation_about(&Vector3::x(), (2.0 * k as f64).to_radians()));
        }
        assert!(!f.engaged);
        assert_relative_eq!(f.angle, 12f64.to_radians(), epsilon = 1e-9);
    }

    #[test]
    fn rotary_holds_below_its_angle() {
        let f = fixture_update(&rotary(10.0), &rotation_about(&Vector3::x(), 8f64.to_radians()));
        assert!(f.engaged);
        let r = rotation_about(&Vector3::x(), 8f64.to_radians());
        let (re, te) = f.expected();
        let reaction = f.reaction(&r, &te, 1e4, 100.0, 20.0, 10.0);
        assert!(reaction.force.norm() < 1e-9 && reaction.torque.norm() < 1e-9);
        assert_relative_eq!(re, r, epsilon = 1e-12);
    }

    #[test]
    fn rigid_resists_rotation_and_translation() {
        let f = FixtureState::new(Fixture::Rigid, Matrix3::identity(), Vector3::zeros(), Vector3::zeros());
        let r = rotation_about(&Vector3::y(), 0.05);
        let f = fixture_update(&f, &r);
        assert!(f.engaged);
        let reaction = f.reaction(&r, &Vector3::new(0.0, 0.0, 0.001), 1e4, 100.0, 20.0, 10.0);
        assert_relative_eq!(reaction.torque, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-9);
        assert_relative_eq!(reaction.force, Vector3::new(0.0, 0.0, 10.0), epsilon = 1e-9);
    }
}
