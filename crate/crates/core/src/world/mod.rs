//! Deterministic quasi-static world: penalty contacts between the mounted
//! gripper and the scene objects, grasp and seal logic, fixtures and a noisy
//! FT sensor.
//!
//! All wrenches are those the robot exerts on the environment.

mod fixture;
mod gripper;
mod observe;
mod scene;
mod shape;

pub use fixture::{fixture_update, FixtureReaction, FixtureState};
pub use gripper::{ElementKind, GripperGeometry};
pub use observe::{observe, MIN_DIM};
pub use scene::*;
pub use shape::Solid;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{self, EEState};
use crate::error::WorldError;
use crate::geometry::{Frame, ObjectEstimate, Pose, Twist6, Wrench6};
use crate::sensing::{FingerPair, PressureImage};

/// One scene object and its current state.
#[derive(Clone, Debug)]
pub struct Body {
    pub spec: ObjectSpec,
    pub solid: Solid,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub fixture: FixtureState,
    pub removed: bool,
    aabb: (Vector3<f64>, Vector3<f64>),
}

impl Body {
    fn new(spec: ObjectSpec) -> Self {
        let solid = Solid::from_spec(&spec);
        let rotation = frame_from_normal(&spec.true_normal);
        let translation = spec.true_center;
        let pivot = translation + rotation * solid.center;
        let fixture = FixtureState::new(spec.fixture.clone(), rotation, translation, pivot);
        let mut b = Self { spec, solid, rotation, translation, fixture, removed: false, aabb: Default::default() };
        b.refresh_aabb();
        b
    }

    fn refresh_aabb(&mut self) {
        let c = self.translation + self.rotation * self.solid.center;
        let ext = self.rotation.abs() * self.solid.half;
        self.aabb = (c - ext, c + ext);
    }

    fn set_pose(&mut self, rotation: Matrix3<f64>, translation: Vector3<f64>) {
        self.rotation = rotation;
        self.translation = translation;
        self.refresh_aabb();
    }

    pub fn to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.rotation.column(2).into()
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn is_static(&self) -> bool {
        self.spec.role == Role::Obstacle
    }
}

/// Local frame with z along `normal` and x as close to base x as possible.
fn frame_from_normal(n: &Vector3<f64>) -> Matrix3<f64> {
    let z = n.normalize();
    let seed = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let x = (seed - z * seed.dot(&z)).normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attachment {
    Fingers,
    Vacuum,
}

#[derive(Clone, Debug)]
struct Held {
    body: usize,
    via: Attachment,
    rel_rotation: Matrix3<f64>,
    rel_translation: Vector3<f64>,
    images: Option<(PressureImage, PressureImage)>,
    grip: [f64; 2],
}

/// Contact summary of the current configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactState {
    pub touching: bool,
    /// Deepest penetration of any gripper sample, m.
    pub penetration: f64,
    /// Noiseless wrench, EE frame.
    pub wrench: Wrench6,
    /// Inner-face normal force of each finger, N.
    pub finger_forces: [f64; 2],
    pub held: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloseStatus {
    Closing,
    /// Both fingers at or above the target force.
    Gripped,
    /// One finger reached the target, the other has not.
    Stalled,
    /// The fingers met without trapping anything.
    Met,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightCheck {
    /// Base-frame vertical force change relative to the tare, N.
    pub delta_fz: f64,
    pub passed: bool,
    pub pulling: bool,
}

impl WeightCheck {
    /// Passes when the lifted weight reaches the expected minimum and nothing
    /// pulls back much harder than that.
    pub fn evaluate(delta_fz: f64, expected_min_mass: f64, p: &WorldParams) -> Self {
        let expected = expected_min_mass * p.gravity;
        let pulling = delta_fz > expected + p.f_pull;
        let passed = !pulling && delta_fz >= expected - p.weight_tolerance;
        WeightCheck { delta_fz, passed, pulling }
    }
}

#[derive(Clone, Debug)]
struct FingerContact {
    force: f64,
    body: Option<usize>,
    /// Outward object normal at the deepest inner sample, base frame.
    normal: Vector3<f64>,
    image: Option<PressureImage>,
}

#[derive(Clone, Debug)]
struct Snapshot {
    force: Vector3<f64>,
    /// About the EE origin, base frame.
    torque: Vector3<f64>,
    penetration: f64,
    fingers: [FingerContact; 2],
    /// Bodies pressed by the palm, fingertips or cups, with the push force.
    pressed: Vec<(usize, Vector3<f64>)>,
}

#[derive(Clone, Debug)]
pub struct World {
    scene: Scene,
    bodies: Vec<Body>,
    gripper: GripperModel,
    geometry: GripperGeometry,
    ee: Pose,
    opening: f64,
    vacuum_on: bool,
    held: Option<Held>,
    rng: ChaCha8Rng,
    time: f64,
    tare: Option<Vector3<f64>>,
    cache: Option<Snapshot>,
    delivered: Vec<String>,
}

impl World {
    /// Builds the world with gripper A mounted at the scene's safe pose.
    pub fn new(scene: Scene, seed: u64) -> Result<World, WorldError> {
        scene.validate("<scene>").map_err(|e| WorldError::InvalidScene(e.to_string()))?;
        let bodies = scene.objects.iter().cloned().map(Body::new).collect();
        let gripper = scene.gripper.a.clone();
        let geometry = GripperGeometry::new(&gripper);
        let mut w = World {
            bodies,
            geometry,
            opening: gripper.max_opening,
            ee: Pose::identity(Frame::BASE, Frame::EE),
            gripper,
            vacuum_on: false,
            held: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            time: 0.0,
            tare: None,
            cache: None,
            delivered: vec![],
            scene,
        };
        w.ee = w.safe_ee_pose();
        Ok(w)
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn params(&self) -> &WorldParams {
        &self.scene.world
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn advance_time(&mut self, dt: f64) {
        self.time += dt;
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn gripper(&self) -> &GripperModel {
        &self.gripper
    }

    pub fn geometry(&self) -> &GripperGeometry {
        &self.geometry
    }

    /// Tool change. Any held object is released first.
    pub fn mount(&mut self, kind: GripperKind) {
        self.detach();
        self.vacuum_on = false;
        self.gripper = self.scene.gripper.get(kind).clone();
        self.geometry = GripperGeometry::new(&self.gripper);
        self.opening = self.gripper.max_opening;
        self.cache = None;
    }

    /// EE pose that puts the TCP at `tcp_position` pointing straight down.
    pub fn ee_pose_for_tcp(&self, rotation: Matrix3<f64>, tcp_position: Vector3<f64>) -> Pose {
        let t = tcp_position - rotation * self.gripper.tcp_offset;
        Pose::from_parts_unchecked(rotation, t, Frame::BASE, Frame::EE)
    }

    pub fn safe_ee_pose(&self) -> Pose {
        self.ee_pose_for_tcp(down(), self.scene.skill.safe_position)
    }

    pub fn ee_pose(&self) -> &Pose {
        &self.ee
    }

    /// `^B T_TCP`.
    pub fn tcp_pose(&self) -> Pose {
        let t = self.ee.translation + self.ee.rotation * self.gripper.tcp_offset;
        Pose::from_parts_unchecked(self.ee.rotation, t, Frame::BASE, Frame::TCP)
    }

    pub fn set_ee_pose(&mut self, pose: Pose) {
        self.ee = pose;
        self.cache = None;
        self.update_held();
    }

    /// Integrates one control cycle of the kinematic plant.
    pub fn step(&mut self, u: &Twist6, dt: f64) -> Result<(), WorldError> {
        let state = EEState { pose: self.ee.clone(), measured_wrench: Wrench6::zero(Frame::EE) };
        let next = control::step(&state, u, dt).map_err(|e| WorldError::InvalidScene(e.to_string()))?;
        self.set_ee_pose(next.pose);
        self.time += dt;
        Ok(())
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    fn index(&self, id: &str) -> Result<usize, WorldError> {
        self.bodies.iter().position(|b| b.spec.id == id).ok_or_else(|| WorldError::UnknownObject(id.into()))
    }

    /// Removes the objects covering `id`, directly or through other covers,
    /// as when earlier disassembly steps have already taken them away.
    pub fn prepare_for(&mut self, id: &str) -> Result<(), WorldError> {
        let mut stack = self.bodies[self.index(id)?].spec.covered_by.clone();
        while let Some(c) = stack.pop() {
            let j = self.index(&c)?;
            if !self.bodies[j].removed {
                self.bodies[j].removed = true;
                stack.extend(self.bodies[j].spec.covered_by.iter().cloned());
            }
        }
        self.cache = None;
        Ok(())
    }

    pub fn body(&self, id: &str) -> Result<&Body, WorldError> {
        Ok(&self.bodies[self.index(id)?])
    }

    pub fn held(&self) -> Option<&str> {
        self.held.as_ref().map(|h| self.bodies[h.body].id())
    }

    pub fn attachment(&self) -> Option<Attachment> {
        self.held.as_ref().map(|h| h.via)
    }

    pub fn delivered(&self) -> &[String] {
        &self.delivered
    }

    pub fn opening(&self) -> f64 {
        self.opening
    }

    pub fn vacuum_on(&self) -> bool {
        self.vacuum_on
    }

    /// Noisy vision estimate of an object's current top surface.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        id: &str,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Result<ObjectEstimate, WorldError> {
        let b = self.body(id)?;
        Ok(observe(&b.translation, &b.normal(), &b.spec.true_dims, noise, rng))
    }

    fn update_held(&mut self) {
        let Some(h) = &self.held else { return };
        let tcp = self.tcp_pose();
        let rot = tcp.rotation * h.rel_rotation;
        let trans = tcp.translation + tcp.rotation * h.rel_translation;
        let b = &mut self.bodies[h.body];
        b.set_pose(rot, trans);
        b.fixture.update(&rot);
    }

    fn attach(&mut self, body: usize, via: Attachment, images: Option<(PressureImage, PressureImage)>, grip: [f64; 2]) {
        let tcp = self.tcp_pose();
        let b = &mut self.bodies[body];
        b.fixture.update(&b.rotation);
        let rel_rotation = tcp.rotation.transpose() * b.rotation;
        let rel_translation = tcp.rotation.transpose() * (b.translation - tcp.translation);
        self.held = Some(Held { body, via, rel_rotation, rel_translation, images, grip });
        self.cache = None;
    }

    /// Lets go of the held object. An object still held by its fixture springs
    /// back to the fixture's pose.
    fn detach(&mut self) -> Option<usize> {
        let h = self.held.take()?;
        let b = &mut self.bodies[h.body];
        if b.fixture.engaged {
            let (r, t) = b.fixture.expected();
            b.set_pose(r, t);
        }
        self.cache = None;
        Some(h.body)
    }

    /// Removes a held object that is free of its fixture (drop-off).
    pub fn deliver(&mut self) -> Option<String> {
        let h = self.held.as_ref()?;
        if self.bodies[h.body].fixture.engaged {
            return None;
        }
        let i = self.detach()?;
        self.bodies[i].removed = true;
        self.vacuum_on = false;
        let id = self.bodies[i].spec.id.clone();
        self.delivered.push(id.clone());
        Some(id)
    }

    fn snapshot(&mut self) -> &Snapshot {
        if self.cache.is_none() {
            self.cache = Some(self.compute_snapshot());
        }
        self.cache.as_ref().unwrap()
    }

    fn compute_snapshot(&self) -> Snapshot {
        let p = &self.scene.world;
        let tcp = self.tcp_pose();
        let (rt, tt) = (tcp.rotation, tcp.translation);
        let to_world = |v: &Vector3<f64>| rt * v + tt;
        let held = self.held.as_ref().map(|h| h.body);
        let n_bodies = self.bodies.len();
        // Per body: list of (force, application point).
        let mut per_body: Vec<Vec<(Vector3<f64>, Vector3<f64>)>> = vec![vec![]; n_bodies];
        let mut penetration = 0.0f64;
        let mut fingers = [
            FingerContact { force: 0.0, body: None, normal: Vector3::zeros(), image: None },
            FingerContact { force: 0.0, body: None, normal: Vector3::zeros(), image: None },
        ];
        let mut finger_raw: [Vec<(usize, f64)>; 2] = [vec![], vec![]];
        let mut pressed = vec![];

        let mut element = |points: &[Vector3<f64>], kind: ElementKind, cell_of: Option<&[Option<(usize, usize)>]>| {
            if points.is_empty() {
                return;
            }
            let mut lo = points[0];
            let mut hi = points[0];
            for q in points {
                lo = lo.inf(q);
                hi = hi.sup(q);
            }
            for (bi, b) in self.bodies.iter().enumerate() {
                if b.removed || Some(bi) == held {
                    continue;
                }
                let (blo, bhi) = &b.aabb;
                if (0..3).any(|k| hi[k] < blo[k] || lo[k] > bhi[k]) {
                    continue;
                }
                let mut best = 0.0;
                let mut best_n = Vector3::zeros();
                let mut sum_pen = 0.0;
                let mut centroid = Vector3::zeros();
                let mut cells: Vec<(usize, f64)> = vec![];
                for (si, q) in points.iter().enumerate() {
                    let (d, n) = b.solid.sdf(&b.to_local(q));
                    if d < 0.0 {
                        let pen = -d;
                        sum_pen += pen;
                        centroid += q * pen;
                        if pen > best {
                            best = pen;
                            best_n = b.rotation * n;
                        }
                        if let Some(c) = cell_of.and_then(|c| c[si]) {
                            cells.push((c.0 * 1000 + c.1, pen));
                        }
                    }
                }
                if best <= 0.0 {
                    continue;
                }
                penetration = penetration.max(best);
                let f = (p.k_contact * best).min(p.f_cap);
                let force = -best_n * f;
                per_body[bi].push((force, centroid / sum_pen));
                match kind {
                    ElementKind::Finger(i) => {
                        if f > fingers[i].force {
                            fingers[i].body = Some(bi);
                            fingers[i].normal = best_n;
                        }
                        fingers[i].force += f;
                        for (c, pen) in cells {
                            finger_raw[i].push((c, f * pen / sum_pen));
                        }
                    }
                    _ => pressed.push((bi, force)),
                }
            }
        };

        if self.gripper.is_finger() {
            let geo = &self.geometry;
            for i in 0..2 {
                let inner: Vec<_> = geo.finger.iter().filter(|s| s.inner).collect();
                let pts: Vec<_> = inner.iter().map(|s| to_world(&geo.finger_point(i, s, self.opening))).collect();
                let cells: Vec<_> = inner.iter().map(|s| s.cell).collect();
                element(&pts, ElementKind::Finger(i), Some(&cells));
                let outer: Vec<_> = geo
                    .finger
                    .iter()
                    .filter(|s| !s.inner)
                    .map(|s| to_world(&geo.finger_point(i, s, self.opening)))
                    .collect();
                element(&outer, ElementKind::Palm, None);
            }
            let palm: Vec<_> = geo.palm.iter().map(|q| to_world(q)).collect();
            element(&palm, ElementKind::Palm, None);
        } else {
            for (ci, cup) in self.geometry.cups.iter().enumerate() {
                let pts: Vec<_> = cup.rim.iter().chain(cup.body.iter()).map(|q| to_world(q)).collect();
                element(&pts, ElementKind::Cup(ci), None);
            }
            let bar: Vec<_> = self.geometry.bar.iter().map(|q| to_world(q)).collect();
            element(&bar, ElementKind::Bar, None);
        }

        // Cap the total force on each body, scaling finger forces alike.
        let mut force = Vector3::zeros();
        let mut torque = Vector3::zeros();
        let ee_origin = self.ee.translation;
        for (bi, list) in per_body.iter().enumerate() {
            let total: Vector3<f64> = list.iter().map(|(f, _)| f).sum();
            let scale = if total.norm() > p.f_cap { p.f_cap / total.norm() } else { 1.0 };
            for (f, at) in list {
                force += f * scale;
                torque += (at - ee_origin).cross(&(f * scale));
            }
            if scale < 1.0 {
                for fc in fingers.iter_mut() {
                    if fc.body == Some(bi) {
                        fc.force *= scale;
                    }
                }
            }
        }

        if let Some((rows, cols, pitch)) = self.geometry.image {
            for i in 0..2 {
                let mut img = PressureImage::zeros(rows, cols, pitch);
                for &(code, v) in &finger_raw[i] {
                    let (r, c) = (code / 1000, code % 1000);
                    img.set(r, c, img.get(r, c) + v);
                }
                fingers[i].image = Some(img);
            }
        }

        if let Some(h) = &self.held {
            let b = &self.bodies[h.body];
            let com = b.translation + b.rotation * b.solid.center;
            let weight = Vector3::new(0.0, 0.0, b.spec.mass * p.gravity);
            force += weight;
            torque += (com - ee_origin).cross(&weight);
            let r = b.fixture.reaction(
                &b.rotation,
                &b.translation,
                p.k_fixture,
                p.fixture_force_cap,
                p.k_fixture_rot,
                p.fixture_torque_cap,
            );
            force += r.force;
            torque += (b.translation - ee_origin).cross(&r.force) + r.torque;
        }

        Snapshot { force, torque, penetration, fingers, pressed }
    }

    /// Current contact state (noiseless).
    pub fn contact_query(&mut self) -> ContactState {
        let r = self.ee.rotation;
        let held = self.held.as_ref().map(|h| (self.bodies[h.body].spec.id.clone(), h.grip));
        let s = self.snapshot();
        let wrench = Wrench6::new(r.transpose() * s.force, r.transpose() * s.torque, Frame::EE);
        let mut finger_forces = [s.fingers[0].force, s.fingers[1].force];
        let touching = s.penetration > 0.0 || held.is_some();
        if let Some((_, grip)) = &held {
            finger_forces = *grip;
        }
        ContactState { touching, penetration: s.penetration, wrench, finger_forces, held: held.map(|h| h.0) }
    }

    /// Noiseless wrench in the EE frame.
    pub fn true_wrench(&mut self) -> Wrench6 {
        self.contact_query().wrench
    }

    /// One FT sensor sample: true wrench plus sensor noise.
    pub fn ft_read(&mut self) -> Wrench6 {
        let w = self.true_wrench();
        let noise = self.scene.world.ft_noise;
        noise.apply(&w, &mut self.rng)
    }

    /// Tactile images of both fingers (tactile grippers only).
    pub fn finger_pair(&mut self) -> Option<FingerPair> {
        if let Some(Held { images: Some((l, r)), .. }) = &self.held {
            return Some(FingerPair { left: l.clone(), right: r.clone(), opening_width: self.opening });
        }
        let opening = self.opening;
        let tactile = self.gripper.tactile.is_some();
        let s = self.snapshot();
        match (&s.fingers[0].image, &s.fingers[1].image) {
            (Some(l), Some(r)) if tactile => {
                Some(FingerPair { left: l.clone(), right: r.clone(), opening_width: opening })
            }
            _ => None,
        }
    }

    fn require_fingers(&self) -> Result<(), WorldError> {
        if self.gripper.is_finger() {
            Ok(())
        } else {
            Err(WorldError::WrongGripper { expected: "A or B".into(), found: self.gripper.kind.to_string() })
        }
    }

    /// Closes the fingers by one cycle of travel at the configured speed.
    ///
    /// A finger pushing a loose object on its own slides it along.
    pub fn finger_close_step(&mut self, target: f64, dt: f64) -> Result<CloseStatus, WorldError> {
        self.require_fingers()?;
        if self.held.is_some() {
            return Ok(CloseStatus::Gripped);
        }
        let travel = self.scene.world.finger_close_speed * dt;
        let s = self.snapshot().clone();
        let f = [s.fingers[0].force, s.fingers[1].force];
        if f[0] >= target && f[1] >= target {
            return Ok(CloseStatus::Gripped);
        }
        if self.opening <= 1e-9 {
            return Ok(CloseStatus::Met);
        }
        if f[0] >= target || f[1] >= target {
            let i = if f[0] >= target { 0 } else { 1 };
            let pushable = s.fingers[i].body.filter(|&b| {
                let b = &self.bodies[b];
                !b.is_static() && b.spec.fixture == Fixture::None
            });
            match pushable {
                Some(bi) => {
                    let dir = self.tcp_pose().rotation * GripperGeometry::closing_direction(i);
                    let b = &mut self.bodies[bi];
                    let (r, t) = (b.rotation, b.translation + dir * 0.5 * travel);
                    b.set_pose(r, t);
                }
                None => return Ok(CloseStatus::Stalled),
            }
        }
        self.opening = (self.opening - travel).max(0.0);
        self.cache = None;
        Ok(CloseStatus::Closing)
    }

    /// Decides whether the closed fingers hold an object and attaches it.
    pub fn finalize_grasp(&mut self) -> Result<String, WorldError> {
        self.require_fingers()?;
        if let Some(id) = self.held() {
            return Ok(id.to_string());
        }
        let p = self.scene.world.clone();
        let tcp_r = self.tcp_pose().rotation;
        let s = self.snapshot().clone();
        let [l, r] = &s.fingers;
        let (Some(bl), Some(br)) = (l.body, r.body) else {
            return Err(WorldError::NothingGrasped);
        };
        if bl != br || self.bodies[bl].is_static() || l.force < p.grip_threshold || r.force < p.grip_threshold {
            return Err(WorldError::NothingGrasped);
        }
        let cone = p.friction.atan().cos();
        for (i, fc) in [l, r].into_iter().enumerate() {
            let toward_finger = -(tcp_r * GripperGeometry::closing_direction(i));
            if fc.normal.dot(&toward_finger) < cone {
                return Err(WorldError::NothingGrasped);
            }
        }
        let images = match (&l.image, &r.image) {
            (Some(a), Some(b)) if self.gripper.tactile.is_some() => Some((a.clone(), b.clone())),
            _ => None,
        };
        self.attach(bl, Attachment::Fingers, images, [l.force, r.force]);
        Ok(self.bodies[bl].spec.id.clone())
    }

    /// Closes until both fingers reach `target` or meet, then evaluates the grasp.
    pub fn close_fingers(&mut self, target: f64) -> Result<ContactState, WorldError> {
        let dt = self.scene.controller.dt;
        let mut stalled = 0.0;
        loop {
            match self.finger_close_step(target, dt)? {
                CloseStatus::Closing => stalled = 0.0,
                CloseStatus::Stalled => {
                    stalled += dt;
                    if stalled > 0.2 {
                        break;
                    }
                }
                CloseStatus::Gripped | CloseStatus::Met => break,
            }
            self.time += dt;
        }
        self.finalize_grasp()?;
        Ok(self.contact_query())
    }

    /// Opens by one cycle of travel toward `width`; returns true once there.
    pub fn finger_open_step(&mut self, width: f64, dt: f64) -> Result<bool, WorldError> {
        self.require_fingers()?;
        if self.attachment() == Some(Attachment::Fingers) {
            self.detach();
        }
        let width = width.min(self.gripper.max_opening);
        let travel = self.scene.world.finger_open_speed * dt;
        if self.opening >= width - 1e-12 {
            return Ok(true);
        }
        self.opening = (self.opening + travel).min(width);
        self.cache = None;
        Ok(self.opening >= width - 1e-12)
    }

    pub fn open_fingers(&mut self, width: f64) -> Result<(), WorldError> {
        let dt = self.scene.controller.dt;
        while !self.finger_open_step(width, dt)? {
            self.time += dt;
        }
        Ok(())
    }

    /// Switches suction on the selected cups. Returns whether an object is now held.
    pub fn vacuum(&mut self, on: bool, cups: &[bool]) -> Result<bool, WorldError> {
        if self.gripper.kind != GripperKind::C {
            return Err(WorldError::WrongGripper { expected: "C".into(), found: self.gripper.kind.to_string() });
        }
        if !on {
            self.vacuum_on = false;
            if self.attachment() == Some(Attachment::Vacuum) {
                self.detach();
            }
            return Ok(false);
        }
        self.vacuum_on = true;
        if self.held.is_some() {
            return Ok(true);
        }
        let p = self.scene.world.clone();
        let tcp = self.tcp_pose();
        let mut sealed: Option<usize> = None;
        let mut any = false;
        for (ci, cup) in self.geometry.cups.iter().enumerate() {
            if !cups.get(ci).copied().unwrap_or(false) {
                continue;
            }
            any = true;
            let mut cup_body = None;
            for q in &cup.rim {
                let w = tcp.rotation * q + tcp.translation;
                let hit = self.bodies.iter().enumerate().find_map(|(bi, b)| {
                    if b.removed || b.is_static() {
                        return None;
                    }
                    let h = b.solid.height_over_top(&b.to_local(&w))?;
                    (h >= -p.seal_compression && h <= p.seal_gap).then_some(bi)
                });
                match (hit, cup_body) {
                    (None, _) => return Ok(false),
                    (Some(bi), None) => cup_body = Some(bi),
                    (Some(bi), Some(prev)) if bi != prev => return Ok(false),
                    _ => {}
                }
            }
            match (sealed, cup_body) {
                (Some(a), Some(b)) if a != b => return Ok(false),
                (_, b) => sealed = b,
            }
        }
        let Some(bi) = sealed.filter(|_| any) else { return Ok(false) };
        let prob = match self.bodies[bi].spec.surface {
            Surface::Flat => p.seal_prob_flat,
            Surface::Laminated => p.seal_prob_laminated,
            Surface::Curved => p.seal_prob_curved,
        };
        if self.rng.random::<f64>() >= prob {
            return Ok(false);
        }
        self.attach(bi, Attachment::Vacuum, None, [0.0, 0.0]);
        Ok(true)
    }

    fn average_base_fz(&mut self) -> f64 {
        let n = self.scene.world.weight_samples.max(1);
        let dt = self.scene.controller.dt;
        let r = self.ee.rotation;
        let mut sum = 0.0;
        for _ in 0..n {
            let w = self.ft_read();
            sum += (r * w.force).z;
            self.time += dt;
        }
        sum / n as f64
    }

    /// Zeroes the weight measurement at the current configuration.
    pub fn tare(&mut self) {
        let fz = self.average_base_fz();
        self.tare = Some(Vector3::new(0.0, 0.0, fz));
    }

    /// Holds still and compares the vertical force with the tare.
    pub fn weight_check(&mut self, expected_min_mass: f64) -> WeightCheck {
        let base = self.tare.map(|t| t.z).unwrap_or(0.0);
        let delta_fz = self.average_base_fz() - base;
        WeightCheck::evaluate(delta_fz, expected_min_mass, &self.scene.world)
    }

    pub fn lift_weight_check(&mut self, expected_min_mass: f64) -> bool {
        self.weight_check(expected_min_mass).passed
    }

    /// Bodies currently pushed by a non-finger part of the gripper.
    pub fn pressed_bodies(&mut self) -> Vec<String> {
        let ids: Vec<usize> = self.snapshot().pressed.iter().map(|(b, _)| *b).collect();
        ids.into_iter().map(|b| self.bodies[b].spec.id.clone()).collect()
    }
}

/// Tool pointing straight down: TCP z along base -z, TCP x along base y.
pub fn down() -> Matrix3<f64> {
    Matrix3::from_columns(&[Vector3::y(), Vector3::x(), -Vector3::z()])
}

/// Free-function form of [`World::contact_query`].
pub fn contact_query(world: &mut World) -> ContactState {
    world.contact_query()
}
