//! The robot-side control loop: every command passes the safety filter, moves
//! the simulated robot by one cycle and returns the filtered FT reading.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::telemetry::{Event, SkillPhase, TelemetryRecord};
use crate::control::{self, ContactEvent, ControlLoop, ControllerParams, Interrupt, SelectionMatrices, WrenchFilter};
use crate::geometry::{so3_log, transform_twist, transform_wrench, Frame, Pose, Twist6, Wrench6};
use crate::orchestrator::{apply_safety, NoHumans, SafetySource, SafetyStatus};
use crate::world::{CloseStatus, ControllerConfig, SkillConfig, WeightCheck, World};

/// Gripper actuation requested alongside a motion command.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Grip {
    Hold,
    Close(f64),
    Open(f64),
}

/// One entry of the optional command log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub t: f64,
    pub status: SafetyStatus,
    pub requested: Twist6,
    pub applied: Twist6,
    pub gripper_moved: bool,
}

pub struct Executor {
    pub world: World,
    pub cfg: ControllerConfig,
    pub skill: SkillConfig,
    safety: Box<dyn SafetySource>,
    alert_cap: f64,
    halted: bool,
    filter: WrenchFilter,
    wrench: Wrench6,
    raw: Wrench6,
    deadline: f64,
    log: Option<Vec<CommandRecord>>,
    phase: SkillPhase,
    telemetry: Vec<TelemetryRecord>,
}

/// Default Alert speed cap as a fraction of the velocity limits.
pub const DEFAULT_ALERT_CAP: f64 = 0.25;

impl Executor {
    pub fn new(world: World) -> Self {
        Self::with_safety(world, Box::new(NoHumans), DEFAULT_ALERT_CAP)
    }

    pub fn with_safety(mut world: World, safety: Box<dyn SafetySource>, alert_cap: f64) -> Self {
        let cfg = world.scene().controller.clone();
        let skill = world.scene().skill.clone();
        let mut filter = WrenchFilter::new(cfg.filter_cutoff_hz, cfg.dt);
        let raw = world.ft_read();
        let wrench = filter.update(&raw);
        Self {
            world,
            cfg,
            skill,
            safety,
            alert_cap,
            halted: false,
            filter,
            wrench,
            raw,
            deadline: f64::INFINITY,
            log: None,
            phase: SkillPhase::MoveSafe,
            telemetry: vec![],
        }
    }

    pub fn enable_command_log(&mut self) {
        self.log = Some(vec![]);
    }

    pub fn command_log(&self) -> Option<&[CommandRecord]> {
        self.log.as_deref()
    }

    pub fn time(&self) -> f64 {
        self.world.time()
    }

    pub fn set_deadline(&mut self, deadline: f64) {
        self.deadline = deadline;
    }

    pub fn alert_cap(&self) -> f64 {
        self.alert_cap
    }

    /// Velocity limits, EE frame.
    pub fn v_max(&self) -> Twist6 {
        Twist6::new(Vector3::repeat(self.cfg.max_angular), Vector3::repeat(self.cfg.max_linear), Frame::EE)
    }

    /// Latest filtered wrench, EE frame.
    pub fn wrench(&self) -> &Wrench6 {
        &self.wrench
    }

    /// Latest unfiltered reading, EE frame.
    pub fn raw_wrench(&self) -> &Wrench6 {
        &self.raw
    }

    pub fn phase(&self) -> SkillPhase {
        self.phase
    }

    pub(crate) fn set_phase(&mut self, phase: SkillPhase) {
        self.phase = phase;
    }

    pub fn record(&mut self, event: Event) {
        self.telemetry.push(TelemetryRecord {
            t: self.world.time(),
            phase: self.phase,
            pose: self.world.ee_pose().clone(),
            wrench: self.wrench.clone(),
            event,
        });
    }

    pub(crate) fn take_telemetry(&mut self) -> Vec<TelemetryRecord> {
        std::mem::take(&mut self.telemetry)
    }

    /// One control cycle: safety filter, plant step, gripper actuation and FT read.
    pub fn tick(&mut self, u: &Twist6, grip: Grip) -> Result<Option<CloseStatus>, Interrupt> {
        let dt = self.cfg.dt;
        let t = self.world.time();
        let status = self.safety.status(t);
        if status == SafetyStatus::Clear {
            self.halted = false;
        }
        if status == SafetyStatus::Stop {
            self.halted = true;
        }
        if self.halted {
            self.log_command(t, status, u, &Twist6::zero(u.frame.clone()), false);
            self.world.advance_time(dt);
            return Err(Interrupt::SafetyHalt);
        }
        if t >= self.deadline {
            return Err(Interrupt::Timeout);
        }
        let applied = apply_safety(status, u, self.alert_cap, &self.v_max());
        let mut close = None;
        let mut moved = false;
        match grip {
            Grip::Hold => {}
            Grip::Close(target) => {
                let s = self.world.finger_close_step(target, dt).map_err(|_| Interrupt::SafetyHalt)?;
                moved = s == CloseStatus::Closing;
                close = Some(s);
            }
            Grip::Open(width) => {
                let before = self.world.opening();
                self.world.finger_open_step(width, dt).map_err(|_| Interrupt::SafetyHalt)?;
                moved = self.world.opening() != before;
            }
        }
        self.log_command(t, status, u, &applied, moved);
        if !applied.is_zero() {
            self.world.step(&applied, dt).expect("EE twists are valid plant inputs");
        } else {
            self.world.advance_time(dt);
        }
        self.raw = self.world.ft_read();
        self.wrench = self.filter.update(&self.raw);
        Ok(close)
    }

    fn log_command(&mut self, t: f64, status: SafetyStatus, requested: &Twist6, applied: &Twist6, moved: bool) {
        if let Some(log) = &mut self.log {
            log.push(CommandRecord {
                t,
                status,
                requested: requested.clone(),
                applied: applied.clone(),
                gripper_moved: moved,
            });
        }
    }

    fn zero(&self) -> Twist6 {
        Twist6::zero(Frame::EE)
    }

    pub fn hold(&mut self, cycles: usize) -> Result<(), Interrupt> {
        let z = self.zero();
        for _ in 0..cycles {
            self.tick(&z, Grip::Hold)?;
        }
        Ok(())
    }

    /// Holds still and averages the raw base-frame vertical force.
    pub fn average_base_fz(&mut self, cycles: usize) -> Result<f64, Interrupt> {
        let z = self.zero();
        let mut sum = 0.0;
        for _ in 0..cycles.max(1) {
            self.tick(&z, Grip::Hold)?;
            sum += (self.world.ee_pose().rotation * self.raw.force).z;
        }
        Ok(sum / cycles.max(1) as f64)
    }

    pub fn tare(&mut self) -> Result<f64, Interrupt> {
        let n = self.world.params().weight_samples;
        self.average_base_fz(n)
    }

    pub fn weight_check(&mut self, tare: f64, expected_min_mass: f64) -> Result<WeightCheck, Interrupt> {
        let n = self.world.params().weight_samples;
        let fz = self.average_base_fz(n)?;
        let check = WeightCheck::evaluate(fz - tare, expected_min_mass, self.world.params());
        self.record(Event::WeightCheck { delta_fz: check.delta_fz, passed: check.passed, pulling: check.pulling });
        Ok(check)
    }

    /// Straight-line move of the EE to `target`, arriving exactly.
    pub fn move_to(&mut self, target: &Pose, speed: f64) -> Result<(), Interrupt> {
        let dt = self.cfg.dt;
        let w_max = self.cfg.max_angular;
        loop {
            let cur = self.world.ee_pose();
            let dp = target.translation - cur.translation;
            let dr = so3_log(&(target.rotation * cur.rotation.transpose()));
            if dp.norm() < 1e-12 && dr.norm() < 1e-12 {
                return Ok(());
            }
            let time = (dp.norm() / speed).max(dr.norm() / w_max);
            let steps = ((time / dt) - 1e-9).ceil().max(1.0);
            let v = dp / (steps * dt);
            let w = dr / (steps * dt);
            let rt = cur.rotation.transpose();
            let u = Twist6::new(rt * w, rt * v, Frame::EE);
            self.tick(&u, Grip::Hold)?;
        }
    }

    /// Moves the TCP to `position` with orientation `rotation` (base frame).
    pub fn move_tcp(&mut self, rotation: Matrix3<f64>, position: Vector3<f64>, speed: f64) -> Result<(), Interrupt> {
        let target = self.world.ee_pose_for_tcp(rotation, position);
        self.move_to(&target, speed)
    }

    pub fn tcp(&self) -> Pose {
        self.world.tcp_pose()
    }

    /// Velocity-mode move of the TCP along `direction` (base frame) until the
    /// force pushed along it exceeds `threshold`.
    pub fn guarded(
        &mut self,
        direction: &Vector3<f64>,
        speed: f64,
        threshold: f64,
        max_distance: f64,
    ) -> Result<ContactEvent, Interrupt> {
        control::guarded_move(self, direction, speed, threshold, max_distance)
    }

    /// Runs the gripper until it reaches `width`.
    pub fn open_to(&mut self, width: f64) -> Result<(), Interrupt> {
        let z = self.zero();
        let target = width.min(self.world.gripper().max_opening);
        while self.world.opening() < target - 1e-12 || self.world.held().is_some() && self.world.gripper().is_finger() {
            self.tick(&z, Grip::Open(target))?;
        }
        Ok(())
    }

    /// Controller parameters acting in a frame labelled `frame`.
    pub fn params_in(&self, frame: Frame, desired: Wrench6, scaling: Vector6<f64>) -> ControllerParams {
        let k = Vector6::new(
            self.cfg.kp_torque,
            self.cfg.kp_torque,
            self.cfg.kp_torque,
            self.cfg.kp_force,
            self.cfg.kp_force,
            self.cfg.kp_force,
        );
        let v = self.v_max();
        ControllerParams::new(
            Matrix6::from_diagonal(&k),
            scaling,
            Twist6::new(v.angular, v.linear, frame.clone()),
            Wrench6::new(desired.force, desired.torque, frame),
            self.cfg.dt,
        )
        .expect("configured gains are positive")
    }

    /// One hybrid force-velocity cycle in a control frame `^EE T_X`.
    pub fn hybrid_tick(
        &mut self,
        sel: &SelectionMatrices,
        params: &ControllerParams,
        ee_t_x: &Pose,
        grip: Grip,
    ) -> Result<Option<CloseStatus>, Interrupt> {
        let w_x = self.wrench_in(ee_t_x);
        let u_x = control::hybrid_command(sel, params, &w_x);
        let u = transform_twist(ee_t_x, &u_x).expect("twist is labelled with the control frame");
        self.tick(&u, grip)
    }

    /// The filtered wrench expressed in the frame `^EE T_X`.
    pub fn wrench_in(&self, ee_t_x: &Pose) -> Wrench6 {
        transform_wrench(&ee_t_x.inverse(), &self.wrench).expect("wrench is labelled EE")
    }
}

impl ControlLoop for Executor {
    fn cycle(&mut self, u: &Twist6) -> Result<Wrench6, Interrupt> {
        self.tick(u, Grip::Hold)?;
        Ok(self.wrench.clone())
    }

    fn ee_pose(&self) -> &Pose {
        self.world.ee_pose()
    }

    fn dt(&self) -> f64 {
        self.cfg.dt
    }
}
