//! Frames, rigid transforms, screw-theory adjoints and grasp-pose construction.
//!
//! Twists are ordered `(angular, linear)` and wrenches `(torque, force)`, so the
//! 6x6 adjoint of `T = (R, p)` is
//!
//! ```text
//! Ad_T = | R      0 |
//!        | [p]R   R |
//! ```
//!
//! Twists map with `Ad_T`, wrenches with `Ad_{T^-1}^T`, which keeps the power
//! `<twist, wrench>` independent of the frame it is evaluated in.

use std::borrow::Cow;
use std::fmt;

use nalgebra::{Matrix3, Matrix6, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Tolerance used when validating unit vectors and orthonormal rotations.
pub const UNIT_TOL: f64 = 1e-9;

/// A named coordinate frame label.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frame(Cow<'static, str>);

impl Frame {
    pub const BASE: Frame = Frame(Cow::Borrowed("B"));
    pub const EE: Frame = Frame(Cow::Borrowed("EE"));
    pub const TCP: Frame = Frame(Cow::Borrowed("TCP"));
    pub const COP: Frame = Frame(Cow::Borrowed("CoP"));

    pub fn new(name: impl Into<String>) -> Self {
        Frame(Cow::Owned(name.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0)
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Skew-symmetric matrix such that `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix `exp([w])` for a rotation vector `w` (Rodrigues).
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    if theta < 1e-12 {
        return Matrix3::identity() + k;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation vector of a rotation matrix (inverse of [`so3_exp`]).
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos.acos();
    let vee = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if theta < 1e-9 {
        return vee * 0.5;
    }
    if std::f64::consts::PI - theta < 1e-6 {
        // Near pi the antisymmetric part vanishes; recover the axis from R + I.
        let m = (r + Matrix3::identity()) * 0.5;
        let (i, _) = [m[(0, 0)], m[(1, 1)], m[(2, 2)]]
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        let mut axis = m.column(i).into_owned();
        axis /= axis.norm();
        return axis * theta;
    }
    vee * (theta / (2.0 * theta.sin()))
}

/// Rotation of `angle` radians about a unit `axis`.
pub fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    so3_exp(&(axis.normalize() * angle))
}

/// Rigid transform `^from T_to`: maps coordinates expressed in `to` into `from`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub from_frame: Frame,
    pub to_frame: Frame,
}

impl Pose {
    /// Builds a pose after checking that `rotation` is a proper rotation.
    pub fn new(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        from_frame: Frame,
        to_frame: Frame,
    ) -> Result<Self, GeometryError> {
        let residual = orthonormality_residual(&rotation);
        if residual > UNIT_TOL || (rotation.determinant() - 1.0).abs() > UNIT_TOL {
            return Err(GeometryError::NotARotation { residual });
        }
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self::from_parts_unchecked(rotation, translation, from_frame, to_frame))
    }

    pub(crate) fn from_parts_unchecked(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        from_frame: Frame,
        to_frame: Frame,
    ) -> Self {
        Self { rotation, translation, from_frame, to_frame }
    }

    pub fn identity(from_frame: Frame, to_frame: Frame) -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), Vector3::zeros(), from_frame, to_frame)
    }

    pub fn from_translation(t: Vector3<f64>, from_frame: Frame, to_frame: Frame) -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), t, from_frame, to_frame)
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            translation: -(rt * self.translation),
            rotation: rt,
            from_frame: self.to_frame.clone(),
            to_frame: self.from_frame.clone(),
        }
    }

    /// `^A T_B * ^B T_C = ^A T_C`.
    pub fn compose(&self, other: &Pose) -> Result<Pose, GeometryError> {
        if self.to_frame != other.from_frame {
            return Err(GeometryError::FrameMismatch {
                expected: self.to_frame.to_string(),
                found: other.from_frame.to_string(),
            });
        }
        Ok(Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            from_frame: self.from_frame.clone(),
            to_frame: other.to_frame.clone(),
        })
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// The same transform relabelled, e.g. to reuse a TCP goal as an EE goal.
    pub fn relabel(mut self, from_frame: Frame, to_frame: Frame) -> Pose {
        self.from_frame = from_frame;
        self.to_frame = to_frame;
        self
    }

    /// Largest deviation of `RᵀR` from identity.
    pub fn orthonormality_residual(&self) -> f64 {
        orthonormality_residual(&self.rotation)
    }

    pub fn approach(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }
}

/// `max |RᵀR - I|` over all entries.
pub fn orthonormality_residual(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

pub fn compose(a: &Pose, b: &Pose) -> Result<Pose, GeometryError> {
    a.compose(b)
}

pub fn invert(t: &Pose) -> Pose {
    t.inverse()
}

/// Spatial velocity `(angular, linear)` expressed in `frame`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Twist6 {
    pub angular: Vector3<f64>,
    pub linear: Vector3<f64>,
    pub frame: Frame,
}

impl Twist6 {
    pub fn new(angular: Vector3<f64>, linear: Vector3<f64>, frame: Frame) -> Self {
        Self { angular, linear, frame }
    }

    pub fn zero(frame: Frame) -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros(), frame)
    }

    pub fn from_vector(v: &Vector6<f64>, frame: Frame) -> Self {
        Self::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]), frame)
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.angular.x,
            self.angular.y,
            self.angular.z,
            self.linear.x,
            self.linear.y,
            self.linear.z,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.angular.iter().chain(self.linear.iter()).all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.angular.iter().chain(self.linear.iter()).all(|&x| x == 0.0)
    }
}

/// Force-torque 6-vector expressed in `frame`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wrench6 {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
    pub frame: Frame,
}

impl Wrench6 {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>, frame: Frame) -> Self {
        Self { force, torque, frame }
    }

    pub fn zero(frame: Frame) -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros(), frame)
    }

    /// Ordered `(torque, force)` to pair with a twist's `(angular, linear)`.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.torque.x,
            self.torque.y,
            self.torque.z,
            self.force.x,
            self.force.y,
            self.force.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>, frame: Frame) -> Self {
        Self::new(Vector3::new(v[3], v[4], v[5]), Vector3::new(v[0], v[1], v[2]), frame)
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|x| x.is_finite())
    }
}

/// `<twist, wrench>`: mechanical power, frame-invariant.
pub fn power(v: &Twist6, w: &Wrench6) -> f64 {
    v.angular.dot(&w.torque) + v.linear.dot(&w.force)
}

/// Adjoint representation of `T`.
pub fn adjoint(t: &Pose) -> Matrix6<f64> {
    let r = t.rotation;
    let pr = skew(&t.translation) * r;
    let mut ad = Matrix6::zeros();
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&pr);
    ad
}

/// Re-expresses a twist given in `t.to_frame` in `t.from_frame`.
pub fn transform_twist(t: &Pose, v: &Twist6) -> Result<Twist6, GeometryError> {
    if v.frame != t.to_frame {
        return Err(GeometryError::FrameMismatch {
            expected: t.to_frame.to_string(),
            found: v.frame.to_string(),
        });
    }
    let w = t.rotation * v.angular;
    let lin = t.translation.cross(&w) + t.rotation * v.linear;
    Ok(Twist6::new(w, lin, t.from_frame.clone()))
}

/// Re-expresses a wrench given in `t.to_frame` in `t.from_frame`.
pub fn transform_wrench(t: &Pose, w: &Wrench6) -> Result<Wrench6, GeometryError> {
    if w.frame != t.to_frame {
        return Err(GeometryError::FrameMismatch {
            expected: t.to_frame.to_string(),
            found: w.frame.to_string(),
        });
    }
    let f = t.rotation * w.force;
    let m = t.rotation * w.torque + t.translation.cross(&f);
    Ok(Wrench6::new(f, m, t.from_frame.clone()))
}

/// Noisy planar object description as reported by vision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectEstimate {
    pub center: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub dims: Vector2<f64>,
}

impl ObjectEstimate {
    pub fn new(
        center: Vector3<f64>,
        normal: Vector3<f64>,
        dims: Vector2<f64>,
    ) -> Result<Self, GeometryError> {
        let est = Self { center, normal, dims };
        est.validate()?;
        Ok(est)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.center.iter().chain(self.normal.iter()).chain(self.dims.iter()).all(|x| x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if (self.normal.norm() - 1.0).abs() > UNIT_TOL {
            return Err(GeometryError::NotUnit { norm: self.normal.norm() });
        }
        if self.dims.iter().any(|&d| d <= 0.0) {
            return Err(GeometryError::NonPositiveDims);
        }
        Ok(())
    }

    /// Index (0 = x, 1 = y) of the longer planar dimension; ties go to x.
    pub fn long_axis(&self) -> usize {
        if self.dims[1] > self.dims[0] {
            1
        } else {
            0
        }
    }

    pub fn short_dim(&self) -> f64 {
        self.dims.min()
    }

    pub fn long_dim(&self) -> f64 {
        self.dims.max()
    }
}

/// Tool rotation with columns `[n o a]`, `n = ô × â` (normalised), `o = a × n`.
pub fn rotation_from_approach_orientation(
    a_hat: &Vector3<f64>,
    o_hat: &Vector3<f64>,
) -> Result<Matrix3<f64>, GeometryError> {
    for v in [a_hat, o_hat] {
        if (v.norm() - 1.0).abs() > 1e-6 {
            return Err(GeometryError::NotUnit { norm: v.norm() });
        }
    }
    if a_hat.dot(o_hat).abs() >= 1.0 - 1e-6 {
        return Err(GeometryError::DegenerateOrientation);
    }
    let n = o_hat.cross(a_hat).normalize();
    let a = *a_hat;
    let o = a.cross(&n);
    Ok(Matrix3::from_columns(&[n, o, a]))
}

/// Grasp pose `^B T_TCP,des` from a vision estimate.
///
/// The approach vector is `-normal`; the orientation vector runs along the
/// table axis of the longer planar dimension, so the fingers (TCP x) close
/// across the shorter span.
pub fn desired_tcp_pose(est: &ObjectEstimate) -> Result<Pose, GeometryError> {
    est.validate()?;
    let a_hat = -est.normal;
    let o_hat = if est.long_axis() == 0 { Vector3::x() } else { Vector3::y() };
    let r = rotation_from_approach_orientation(&a_hat, &o_hat)?;
    Ok(Pose::from_parts_unchecked(r, est.center, Frame::BASE, Frame::TCP))
}

/// `goal` shifted by `d_safety` along `normal`; rotation unchanged.
pub fn pre_pose(goal: &Pose, normal: &Vector3<f64>, d_safety: f64) -> Pose {
    let mut p = goal.clone();
    p.translation += normal * d_safety;
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rot_z(a: f64) -> Matrix3<f64> {
        rotation_about(&Vector3::z(), a)
    }

    #[test]
    fn compose_identity_and_inverse() {
        let t = Pose::new(rot_z(0.3), Vector3::new(1.0, 2.0, 3.0), Frame::BASE, Frame::EE).unwrap();
        let id = Pose::identity(Frame::EE, Frame::EE);
        assert_eq!(t.compose(&id).unwrap(), t);
        let back = t.compose(&t.inverse()).unwrap();
        assert_relative_eq!(back.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(back.translation, Vector3::zeros(), epsilon = 1e-12);
        assert_eq!(back.from_frame, Frame::BASE);
        assert_eq!(back.to_frame, Frame::BASE);
    }

    #[test]
    fn compose_rejects_frame_mismatch() {
        let a = Pose::identity(Frame::BASE, Frame::EE);
        let b = Pose::identity(Frame::TCP, Frame::COP);
        assert!(matches!(a.compose(&b), Err(GeometryError::FrameMismatch { .. })));
    }

    #[test]
    fn pose_new_rejects_reflection() {
        let r = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(r, Vector3::zeros(), Frame::BASE, Frame::EE).is_err());
    }

    #[test]
    fn axis_aligned_orientation_is_identity() {
        let r = rotation_from_approach_orientation(&Vector3::z(), &Vector3::y()).unwrap();
        assert_relative_eq!(r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn downward_approach_columns() {
        let r = rotation_from_approach_orientation(&-Vector3::z(), &Vector3::y()).unwrap();
        assert_eq!(r.column(0).into_owned(), Vector3::new(-1.0, 0.0, 0.0));
        assert_eq!(r.column(1).into_owned(), Vector3::new(0.0, 1.0, 0.0));
        assert_eq!(r.column(2).into_owned(), Vector3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn parallel_vectors_are_degenerate() {
        let z = Vector3::z();
        assert!(matches!(
            rotation_from_approach_orientation(&z, &z),
            Err(GeometryError::DegenerateOrientation)
        ));
        assert!(matches!(
            rotation_from_approach_orientation(&z, &-z),
            Err(GeometryError::DegenerateOrientation)
        ));
    }

    #[test]
    fn desired_pose_hand_example() {
        let est = ObjectEstimate::new(
            Vector3::new(0.4, 0.0, 0.1),
            Vector3::z(),
            Vector2::new(0.10, 0.04),
        )
        .unwrap();
        let pose = desired_tcp_pose(&est).unwrap();
        assert_eq!(pose.translation, Vector3::new(0.4, 0.0, 0.1));
        assert_eq!(pose.approach(), Vector3::new(0.0, 0.0, -1.0));
        assert_eq!(pose.rotation.column(1).into_owned(), Vector3::x());
        // fingers close across the 4 cm span
        assert_eq!(pose.rotation.column(0).into_owned(), Vector3::y());
    }

    #[test]
    fn desired_pose_tie_goes_to_x() {
        let est =
            ObjectEstimate::new(Vector3::zeros(), Vector3::z(), Vector2::new(0.05, 0.05)).unwrap();
        let pose = desired_tcp_pose(&est).unwrap();
        assert_eq!(pose.rotation.column(1).into_owned(), Vector3::x());
    }

    #[test]
    fn pre_pose_offsets_along_normal() {
        let est =
            ObjectEstimate::new(Vector3::new(0.1, 0.2, 0.3), Vector3::z(), Vector2::new(0.1, 0.1))
                .unwrap();
        let goal = desired_tcp_pose(&est).unwrap();
        assert_eq!(pre_pose(&goal, &est.normal, 0.0), goal);
        let pre = pre_pose(&goal, &est.normal, 0.1);
        assert_relative_eq!(pre.translation.z, 0.4, epsilon = 1e-15);
        assert_eq!(pre.rotation, goal.rotation);
    }

    #[test]
    fn adjoint_identity_and_pure_rotation() {
        let id = Pose::identity(Frame::BASE, Frame::EE);
        assert_eq!(adjoint(&id), Matrix6::identity());
        let rot = Pose::from_parts_unchecked(rot_z(0.7), Vector3::zeros(), Frame::BASE, Frame::EE);
        let ad = adjoint(&rot);
        assert_eq!(ad.fixed_view::<3, 3>(3, 0).into_owned(), Matrix3::zeros());
        assert_eq!(ad.fixed_view::<3, 3>(0, 3).into_owned(), Matrix3::zeros());
    }

    #[test]
    fn adjoint_matches_transform_twist() {
        let t = Pose::new(rot_z(0.4), Vector3::new(0.1, -0.2, 0.3), Frame::BASE, Frame::EE).unwrap();
        let v = Twist6::new(Vector3::new(0.1, 0.2, -0.3), Vector3::new(1.0, 0.5, 0.2), Frame::EE);
        let direct = transform_twist(&t, &v).unwrap().to_vector();
        let via_matrix = adjoint(&t) * v.to_vector();
        assert_relative_eq!(direct, via_matrix, epsilon = 1e-14);
    }

    #[test]
    fn offset_force_gains_moment() {
        let t = Pose::from_translation(Vector3::new(0.0, 0.0, 0.2), Frame::EE, Frame::TCP);
        let w = Wrench6::new(Vector3::new(10.0, 0.0, 0.0), Vector3::zeros(), Frame::TCP);
        let ee = transform_wrench(&t, &w).unwrap();
        assert_relative_eq!(ee.torque, Vector3::new(0.0, 2.0, 0.0), epsilon = 1e-14);
        assert_relative_eq!(ee.force, w.force, epsilon = 1e-14);
        assert_eq!(ee.frame, Frame::EE);
    }

    #[test]
    fn transform_checks_frames() {
        let t = Pose::identity(Frame::EE, Frame::TCP);
        let v = Twist6::zero(Frame::EE);
        assert!(transform_twist(&t, &v).is_err());
        let w = Wrench6::zero(Frame::BASE);
        assert!(transform_wrench(&t, &w).is_err());
    }

    #[test]
    fn so3_log_inverts_exp() {
        for w in [
            Vector3::new(0.1, -0.2, 0.3),
            Vector3::new(0.0, 0.0, 3.0),
            Vector3::new(1e-10, 0.0, 0.0),
            Vector3::new(0.0, std::f64::consts::PI - 1e-8, 0.0),
        ] {
            let back = so3_log(&so3_exp(&w));
            assert_relative_eq!(back, w, epsilon = 1e-6);
        }
    }

    #[test]
    fn estimate_validation() {
        assert!(ObjectEstimate::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 2.0), Vector2::new(1.0, 1.0)).is_err());
        assert!(ObjectEstimate::new(Vector3::zeros(), Vector3::z(), Vector2::new(0.0, 1.0)).is_err());
    }
}
