//! Signed distance queries in an object's local frame.
//!
//! The local origin is the center of the top face, z points up (along the
//! object normal), x runs along `dims[0]` and y along `dims[1]`.

use nalgebra::{Vector2, Vector3};

use super::scene::{ObjectSpec, Shape};

#[derive(Clone, Debug, PartialEq)]
pub struct Solid {
    pub shape: Shape,
    /// Box half extents, or (half length, radius, radius) for a cylinder in
    /// axis-aligned order.
    pub half: Vector3<f64>,
    /// Volume center in the local frame.
    pub center: Vector3<f64>,
    /// Cylinder axis index (0 or 1).
    pub axis: usize,
    pub groove_width: f64,
}

impl Solid {
    pub fn from_spec(o: &ObjectSpec) -> Self {
        let d = o.true_dims;
        match o.shape {
            Shape::Box => Self {
                shape: Shape::Box,
                half: Vector3::new(0.5 * d.x, 0.5 * d.y, 0.5 * o.height),
                center: Vector3::new(0.0, 0.0, -0.5 * o.height),
                axis: 0,
                groove_width: o.groove_width,
            },
            Shape::Cylinder => {
                let axis = if d.x >= d.y { 0 } else { 1 };
                let r = 0.5 * d.min();
                let mut half = Vector3::new(r, r, r);
                half[axis] = 0.5 * d.max();
                Self {
                    shape: Shape::Cylinder,
                    half,
                    center: Vector3::new(0.0, 0.0, -r),
                    axis,
                    groove_width: 0.0,
                }
            }
        }
    }

    /// Radius of a sphere around `center` containing the solid.
    pub fn bounding_radius(&self) -> f64 {
        self.half.norm()
    }

    /// Signed distance and outward unit normal at local point `p`.
    pub fn sdf(&self, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let q = p - self.center;
        match self.shape {
            Shape::Box => box_sdf(&q, &self.half),
            Shape::Cylinder => cylinder_sdf(&q, self.axis, self.half[self.axis], self.half[2]),
        }
    }

    /// Height of `p` above the top surface, if `p` lies over a sealable part of
    /// the top surface.
    pub fn height_over_top(&self, p: &Vector3<f64>) -> Option<f64> {
        match self.shape {
            Shape::Box => {
                let long = if self.half.x >= self.half.y { 0 } else { 1 };
                if p.x.abs() > self.half.x || p.y.abs() > self.half.y {
                    return None;
                }
                if self.groove_width > 0.0 && p[long].abs() < 0.5 * self.groove_width {
                    return None;
                }
                Some(p.z)
            }
            Shape::Cylinder => {
                let lat = 1 - self.axis;
                let r = self.half[2];
                if p[self.axis].abs() > self.half[self.axis] || p[lat].abs() > r {
                    return None;
                }
                let top = -r + (r * r - p[lat] * p[lat]).sqrt();
                Some(p.z - top)
            }
        }
    }
}

fn box_sdf(q: &Vector3<f64>, half: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let d = q.abs() - half;
    let outside = d.map(|x| x.max(0.0));
    let out_norm = outside.norm();
    if out_norm > 0.0 {
        let n = outside.component_mul(&q.map(sign)) / out_norm;
        return (out_norm, n);
    }
    let (i, m) = d.argmax();
    let mut n = Vector3::zeros();
    n[i] = sign(q[i]);
    (m, n)
}

fn cylinder_sdf(q: &Vector3<f64>, axis: usize, half_len: f64, r: f64) -> (f64, Vector3<f64>) {
    let lat = 1 - axis;
    let rho = Vector2::new(q[lat], q.z);
    let rn = rho.norm();
    let radial_dir = if rn > 1e-12 { rho / rn } else { Vector2::new(0.0, 1.0) };
    let d = Vector2::new(rn - r, q[axis].abs() - half_len);
    let mut radial = Vector3::zeros();
    radial[lat] = radial_dir.x;
    radial.z = radial_dir.y;
    let mut axial = Vector3::zeros();
    axial[axis] = sign(q[axis]);
    if d.x > 0.0 && d.y > 0.0 {
        let len = d.norm();
        return (len, (radial * d.x + axial * d.y) / len);
    }
    if d.x > d.y {
        (d.x.min(0.0) + d.x.max(0.0), radial)
    } else {
        (d.y, axial)
    }
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}
