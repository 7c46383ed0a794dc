//! Collision samples of the gripper bodies, in the TCP frame.
//!
//! Fingers close along TCP x. Finger `0` (left) sits on the negative side,
//! finger `1` (right) on the positive side. Finger bodies extend from the
//! fingertips at `z = 0` back to the palm at `z = -finger_length`.

use nalgebra::Vector3;

use super::scene::{GripperKind, GripperModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    Finger(usize),
    Palm,
    Cup(usize),
    Bar,
}

/// A sample point on a finger, parameterised by the opening width.
#[derive(Clone, Copy, Debug)]
pub struct FingerSample {
    /// Outward offset from the inner face, `0..=thickness`.
    pub depth: f64,
    pub y: f64,
    pub z: f64,
    /// Pressure cell `(row, col)` for inner-face samples inside the array.
    pub cell: Option<(usize, usize)>,
    pub inner: bool,
}

#[derive(Clone, Debug)]
pub struct GripperGeometry {
    pub kind: GripperKind,
    pub finger: Vec<FingerSample>,
    pub palm: Vec<Vector3<f64>>,
    pub cups: Vec<CupGeometry>,
    pub bar: Vec<Vector3<f64>>,
    /// Pressure image layout `(rows, cols, pitch)`.
    pub image: Option<(usize, usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct CupGeometry {
    pub center: Vector3<f64>,
    pub rim: Vec<Vector3<f64>>,
    pub body: Vec<Vector3<f64>>,
}

const RIM_POINTS: usize = 12;

impl GripperGeometry {
    pub fn new(g: &GripperModel) -> Self {
        match g.kind {
            GripperKind::A | GripperKind::B => Self::fingers(g),
            GripperKind::C => Self::vacuum(g),
        }
    }

    fn fingers(g: &GripperModel) -> Self {
        let (pitch, cols) = match g.tactile {
            Some(t) => (t.pitch, t.cols),
            None => (0.005, ((g.finger_width / 0.004).round() as usize).max(1)),
        };
        let col_pitch = g.finger_width / cols as f64;
        let rows_total = ((g.finger_length / pitch).round() as usize).max(1);
        let array_rows = g.tactile.map(|t| t.rows).unwrap_or(rows_total).min(rows_total);
        let first_array_row = rows_total - array_rows;
        let mut finger = Vec::new();
        let col_y = |c: usize| (c as f64 - 0.5 * (cols as f64 - 1.0)) * col_pitch;
        for r in 0..rows_total {
            let z = -((rows_total as f64 - 0.5 - r as f64) * pitch);
            for c in 0..cols {
                let cell = (r >= first_array_row).then(|| (r - first_array_row, c));
                finger.push(FingerSample { depth: 0.0, y: col_y(c), z, cell, inner: true });
            }
        }
        // Fingertip face and outer face.
        let t = g.finger_thickness;
        let hw = 0.5 * g.finger_width;
        for i in 0..3 {
            for j in 0..3 {
                finger.push(FingerSample {
                    depth: t * i as f64 / 2.0,
                    y: -hw + g.finger_width * j as f64 / 2.0,
                    z: 0.0,
                    cell: None,
                    inner: false,
                });
            }
        }
        for i in 0..4 {
            for j in 0..3 {
                finger.push(FingerSample {
                    depth: t,
                    y: -hw + g.finger_width * j as f64 / 2.0,
                    z: -g.finger_length * i as f64 / 3.0,
                    cell: None,
                    inner: false,
                });
            }
        }
        let span = 0.5 * g.max_opening + t;
        let mut palm = Vec::new();
        for i in 0..5 {
            for j in 0..3 {
                palm.push(Vector3::new(
                    -span + 2.0 * span * i as f64 / 4.0,
                    -hw + g.finger_width * j as f64 / 2.0,
                    -g.finger_length,
                ));
            }
        }
        let image = Some((array_rows, cols, pitch));
        Self { kind: g.kind, finger, palm, cups: vec![], bar: vec![], image }
    }

    fn vacuum(g: &GripperModel) -> Self {
        let r = 0.5 * g.cup_diameter;
        let cups = g
            .cup_centers()
            .into_iter()
            .map(|c| {
                let ring = |z: f64, n: usize| {
                    (0..n)
                        .map(|k| {
                            let a = std::f64::consts::TAU * k as f64 / n as f64;
                            c + Vector3::new(r * a.cos(), r * a.sin(), z)
                        })
                        .collect::<Vec<_>>()
                };
                CupGeometry { center: c, rim: ring(0.0, RIM_POINTS), body: ring(-0.5 * g.cup_height, 8) }
            })
            .collect();
        let hy = 0.5 * g.cup_spacing * (g.cup_count.max(1) - 1) as f64 + r + 0.01;
        let hx = 0.5 * g.bar_width;
        let mut bar = Vec::new();
        for i in 0..3 {
            for j in 0..5 {
                bar.push(Vector3::new(-hx + hx * i as f64, -hy + 2.0 * hy * j as f64 / 4.0, -g.cup_height));
            }
        }
        Self { kind: g.kind, finger: vec![], palm: vec![], cups, bar, image: None }
    }

    /// TCP-frame position of a finger sample at the given opening width.
    pub fn finger_point(&self, finger: usize, s: &FingerSample, opening: f64) -> Vector3<f64> {
        let side = if finger == 0 { -1.0 } else { 1.0 };
        Vector3::new(side * (0.5 * opening + s.depth), s.y, s.z)
    }

    /// Direction (TCP frame) in which finger `finger` pushes when closing.
    pub fn closing_direction(finger: usize) -> Vector3<f64> {
        if finger == 0 {
            Vector3::x()
        } else {
            -Vector3::x()
        }
    }
}
