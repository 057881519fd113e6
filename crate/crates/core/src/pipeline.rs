//! Assembly state machine: detect, approach, grasp, lift, assembly position,
//! insert. Each trial owns one world and steps it at the simulation rate.

use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::{angle_about_axis, relative_axis_angle, ArmSide, Frame, Pose, Rotation, Vec3};
use crate::impedance::{impedance_step, ImpedanceParams, ImpedanceReference, ImpedanceState, Vec6};
use crate::nmpc::{LiftGoal, NmpcController, NmpcInput, NmpcState, SolveDiagnostics};
use crate::perception::{grasp_pose_from_detections, synthetic_detect, VisibleScene};
use crate::runlog::{ArmRecord, BatchSummary, ContactSummary, LogRecord, NmpcRecord, PoseRecord, TwistRecord, WrenchRecord};
use crate::scene::{constraint_eval, ConstraintParams, PanelGeometry};
use crate::simworld::{
    grasp_lock, insertion_check, measure_wrench, rod_alignments, world_step, zero_sensor, ArmCommand, Body, ContactKind,
    InsertionStatus, WorldSetup, WorldState,
};
use crate::wrench_control::{force_control_step, Wrench, WrenchCommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureModality {
    FailedGrasp,
    FailedInsertion,
    SolverAbort,
    Timeout,
}

impl FailureModality {
    pub const ALL: [FailureModality; 4] =
        [FailureModality::FailedGrasp, FailureModality::FailedInsertion, FailureModality::SolverAbort, FailureModality::Timeout];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Detect,
    Approach,
    Grasp,
    Lift,
    AssemblyPosition,
    Insert,
    Done,
    Failed(FailureModality),
}

impl Phase {
    /// Whether the flowchart has an edge from `self` to `next`.
    pub fn allows(self, next: Phase) -> bool {
        use FailureModality as F;
        use Phase::*;
        matches!(
            (self, next),
            (Init, Detect)
                | (Detect, Detect | Approach | Failed(F::FailedGrasp))
                | (Approach, Grasp | Failed(F::Timeout))
                | (Grasp, Lift | Failed(F::FailedGrasp))
                | (Lift, AssemblyPosition | Failed(F::SolverAbort | F::Timeout))
                | (AssemblyPosition, Insert)
                | (Insert, Done | Failed(F::FailedInsertion))
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMark {
    pub phase: Phase,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub success: bool,
    pub failure: Option<FailureModality>,
    /// Every phase entered, with its start time.
    pub phases: Vec<PhaseMark>,
    pub detect_attempts: usize,
    /// Table clearance recorded at the grasp, left then right, in each base frame.
    pub z_min_m: [Option<f64>; 2],
    pub lift_solves: usize,
    pub lift_unconverged_solves: usize,
    /// Worst control-point constraint violation seen at any tick of the lift.
    pub lift_max_violation_m: f64,
    /// Largest |f_y| the driving arm measured during insertion.
    pub peak_insertion_force_n: f64,
    /// Time from the start of insertion until the driving arm's f_y enters
    /// and then stays for 0.2 s within 0.5 N of the desired value.
    pub force_settle_time_s: Option<f64>,
    /// Shallower of the two rod insertion depths at the end of the run.
    pub final_insertion_depth_m: f64,
    /// Largest deviation of the yielding arm's x position [m] and yaw [rad]
    /// from their values at the start of insertion.
    pub rigid_axis_deviation: [f64; 2],
}

impl TrialOutcome {
    pub fn phase_time(&self, phase: Phase) -> Option<f64> {
        self.phases.iter().find(|m| m.phase == phase).map(|m| m.t)
    }
}

/// NMPC wall-clock statistics. Kept apart from the outcome and the log so
/// those stay reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveTiming {
    pub solves: usize,
    pub total_s: f64,
    pub max_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub outcome: TrialOutcome,
    pub log: Vec<LogRecord>,
    pub timing: SolveTiming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub record_log: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { record_log: true }
    }
}

/// Called after every simulation tick with the phase that was active during it.
pub type TickObserver<'a> = dyn FnMut(Phase, &WorldState) + 'a;

pub fn run_trial(cfg: &ScenarioConfig) -> Result<TrialRun> {
    run_trial_with(cfg, RunOptions::default(), &mut |_, _| {})
}

struct ApproachArm {
    start: Pose,
    target: Pose,
    rotation: Vec3,
    state: ImpedanceState,
    settled_for: f64,
}

struct LiftArm {
    controller: NmpcController,
    input: NmpcInput,
    diagnostics: SolveDiagnostics,
    unconverged: usize,
}

const FORCE_BAND: f64 = 0.5;
const FORCE_HOLD: f64 = 0.2;

struct InsertState {
    start: f64,
    yielding_end: Pose,
    yielding: ImpedanceState,
    integral: Vec6,
    inserted_at: Option<f64>,
    in_band_since: Option<f64>,
}

struct Trial<'a> {
    cfg: &'a ScenarioConfig,
    dt: f64,
    tick: u64,
    world: WorldState,
    geometry: PanelGeometry,
    phase: Phase,
    phase_start: f64,
    outcome: TrialOutcome,
    log: Vec<LogRecord>,
    record_log: bool,
    log_every: u64,
    timing: SolveTiming,
    rng: ChaCha8Rng,
    yielding: ArmSide,
    driving: ArmSide,
    targets: [Option<Pose>; 2],
    approach: Vec<ApproachArm>,
    lift: Vec<LiftArm>,
    insert: Option<InsertState>,
    commands: [ArmCommand; 2],
    finished: bool,
}

fn pose_of(position: [f64; 3], yaw: f64) -> Pose {
    Pose::new(Vec3::from(position), Rotation::about_z(yaw), Frame::World)
}

/// World setup and initial state for a scenario.
pub fn build_world(cfg: &ScenarioConfig) -> Result<WorldState> {
    let geometry = cfg.panel_geometry()?;
    let yielding = cfg.pipeline.yielding_arm;
    let w = &cfg.world;
    let setup = WorldSetup {
        gravity: Vec3::new(0.0, 0.0, -w.gravity_m_per_s2),
        table_height: w.table_height_m,
        table_extent: w.table_extent_m,
        ee_lag: w.ee_lag_s,
        arm_bases: ArmSide::BOTH.map(|s| cfg.base_pose(s)),
        sensor_mounts: ArmSide::BOTH.map(|s| Rotation::about_z(cfg.arm_world(s).sensor_mount_yaw_rad)),
        panels: vec![geometry.clone(), geometry],
        connector: w.connector,
        grasp: w.grasp,
        insertion_pair: Some((yielding.other().index(), yielding.index())),
    };
    let ee = ArmSide::BOTH.map(|s| {
        let a = cfg.arm_world(s);
        pose_of(a.observation_position_m, a.observation_yaw_rad)
    });
    let panels = ArmSide::BOTH
        .iter()
        .map(|s| {
            let a = cfg.arm_world(*s);
            pose_of([a.panel_position_m[0], a.panel_position_m[1], 0.0], a.panel_yaw_rad)
        })
        .collect();
    WorldState::new(setup, ee, panels, &w.contact)
}

fn min_jerk(tau: f64) -> (f64, f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    if !(0.0..1.0).contains(&tau) {
        return (s, 0.0, 0.0);
    }
    let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    let dds = 60.0 * t * (1.0 - 3.0 * t + 2.0 * t * t);
    (s, ds, dds)
}

fn six(a: &Vec3, b: &Vec3) -> Vec6 {
    Vec6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

fn head(v: &Vec6) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn tail(v: &Vec6) -> Vec3 {
    Vec3::new(v[3], v[4], v[5])
}

impl<'a> Trial<'a> {
    fn new(cfg: &'a ScenarioConfig, opts: RunOptions) -> Result<Self> {
        cfg.validate()?;
        let world = build_world(cfg)?;
        let dt = cfg.world.sim_dt_s;
        let yielding = cfg.pipeline.yielding_arm;
        let log_every = ((cfg.pipeline.log_period_s / dt).round() as u64).max(1);
        let outcome = TrialOutcome {
            seed: cfg.pipeline.seed,
            success: false,
            failure: None,
            phases: vec![PhaseMark { phase: Phase::Init, t: 0.0 }],
            detect_attempts: 0,
            z_min_m: [None; 2],
            lift_solves: 0,
            lift_unconverged_solves: 0,
            lift_max_violation_m: 0.0,
            peak_insertion_force_n: 0.0,
            force_settle_time_s: None,
            final_insertion_depth_m: 0.0,
            rigid_axis_deviation: [0.0; 2],
        };
        Ok(Trial {
            cfg,
            dt,
            tick: 0,
            world,
            geometry: cfg.panel_geometry()?,
            phase: Phase::Init,
            phase_start: 0.0,
            outcome,
            log: Vec::new(),
            record_log: opts.record_log,
            log_every,
            timing: SolveTiming::default(),
            rng: ChaCha8Rng::seed_from_u64(cfg.pipeline.seed),
            yielding,
            driving: yielding.other(),
            targets: [None; 2],
            approach: Vec::new(),
            lift: Vec::new(),
            insert: None,
            commands: [ArmCommand::hold(); 2],
            finished: false,
        })
    }

    fn now(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    /// Phase changes take effect from the next tick.
    fn enter(&mut self, next: Phase) {
        debug_assert!(self.phase.allows(next), "{:?} -> {:?}", self.phase, next);
        let t = (self.tick + 1) as f64 * self.dt;
        self.phase = next;
        self.phase_start = t;
        self.outcome.phases.push(PhaseMark { phase: next, t });
        if let Phase::Failed(m) = next {
            self.outcome.failure = Some(m);
        }
    }

    fn elapsed(&self) -> f64 {
        self.now() - self.phase_start
    }

    fn ee_base(&self, side: ArmSide) -> Pose {
        self.world.ee_in_base(side)
    }

    fn base_rotation(&self, side: ArmSide) -> Rotation {
        self.world.setup.arm_bases[side.index()].orientation
    }

    fn base_wrench(&self, side: ArmSide) -> (Wrench, Wrench) {
        let ws = measure_wrench(&self.world, side);
        let to_base = self.base_rotation(side).transpose().compose(&self.world.sensor_orientation(side));
        (ws, ws.rotated(&to_base, Frame::Base(side)))
    }

    fn twist_to_world(&self, side: ArmSide, v: &Vec3, w: &Vec3) -> Vec6 {
        let r = self.base_rotation(side);
        six(&r.apply(v), &r.apply(w))
    }

    fn run(&mut self, observer: &mut TickObserver) -> Result<()> {
        while !self.finished {
            self.commands = [ArmCommand::hold(); 2];
            let phase = self.phase;
            match phase {
                Phase::Init => self.enter(Phase::Detect),
                Phase::Detect => self.detect()?,
                Phase::Approach => self.approach()?,
                Phase::Grasp => self.grasp()?,
                Phase::Lift => self.lift()?,
                Phase::AssemblyPosition => self.assembly_position()?,
                Phase::Insert | Phase::Done => self.insert()?,
                Phase::Failed(_) => {
                    self.finished = true;
                    break;
                }
            }
            if self.record_log && self.tick.is_multiple_of(self.log_every) {
                self.record(phase);
            }
            self.world = world_step(&self.world, &self.commands, &self.cfg.world.contact, self.dt)?;
            self.tick += 1;
            self.world.time = self.now();
            observer(phase, &self.world);
        }
        if let Some(rods) = rod_alignments(&self.world) {
            self.outcome.final_insertion_depth_m = rods[0].depth.min(rods[1].depth);
        }
        Ok(())
    }

    fn detect(&mut self) -> Result<()> {
        self.outcome.detect_attempts += 1;
        let p = &self.cfg.perception;
        let mount = Pose::new(Vec3::from(p.camera_offset_m), Rotation::about_x(std::f64::consts::PI), Frame::World);
        for side in ArmSide::BOTH {
            // one draw per arm per attempt keeps the stream aligned across retries
            let seed = self.rng.next_u64();
            if self.targets[side.index()].is_some() {
                continue;
            }
            let camera = self.world.arms[side.index()].ee.compose(&mount);
            let scene = VisibleScene {
                panel_pose: self.world.panels[side.index()].pose,
                panel: self.geometry.clone(),
                patch_size: self.cfg.world.panel.patch_size_m,
                connector_size: self.cfg.world.panel.connector_size_m,
            };
            let noise = crate::perception::DetectionNoise { seed, ..p.noise };
            let dets = synthetic_detect(&scene, &camera, &p.intrinsics, &noise)?;
            match grasp_pose_from_detections(&dets, &p.intrinsics, &camera, &self.geometry, &Rotation::identity()) {
                Ok(pose) => self.targets[side.index()] = Some(pose),
                Err(Error::PerceptionIncomplete(_) | Error::DetectionUnusable(_) | Error::InvalidArgument(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if self.targets.iter().all(Option::is_some) {
            self.start_approach();
            self.enter(Phase::Approach);
        } else if self.outcome.detect_attempts > self.cfg.pipeline.detect_retries {
            self.enter(Phase::Failed(FailureModality::FailedGrasp));
        } else {
            self.enter(Phase::Detect);
        }
        Ok(())
    }

    fn start_approach(&mut self) {
        self.approach = ArmSide::BOTH
            .iter()
            .map(|s| {
                let start = self.world.arms[s.index()].ee;
                let target = self.targets[s.index()].expect("detected");
                let rotation = target.orientation.compose(&start.orientation.transpose()).log();
                let state = ImpedanceState { r: six(&start.position, &Vec3::zeros()), rdot: self.world.arms[s.index()].twist };
                ApproachArm { start, target, rotation, state, settled_for: 0.0 }
            })
            .collect();
    }

    fn approach(&mut self) -> Result<()> {
        let params = self.cfg.controllers.approach.params();
        let duration = self.cfg.controllers.approach_duration_s;
        let (s, ds, dds) = min_jerk(self.elapsed() / duration);
        let (ds, dds) = (ds / duration, dds / (duration * duration));
        let mut all_settled = true;
        for side in ArmSide::BOTH {
            let (_, fb) = self.base_wrench(side);
            let r_base = self.base_rotation(side);
            let f_e = -six(&r_base.apply(&fb.force), &r_base.apply(&fb.moment));
            let arm = &mut self.approach[side.index()];
            let delta = arm.target.position - arm.start.position;
            let reference = ImpedanceReference {
                r: six(&(arm.start.position + delta * s), &(arm.rotation * s)),
                rdot: six(&(delta * ds), &(arm.rotation * ds)),
                rddot: six(&(delta * dds), &(arm.rotation * dds)),
            };
            arm.state = impedance_step(&arm.state, &reference, &f_e, &params, self.dt)?;
            let position = head(&arm.state.r);
            let pose = Pose::new(position, Rotation::exp(&tail(&arm.state.r)).compose(&arm.start.orientation), Frame::World);
            self.commands[side.index()] = ArmCommand::Kinematic { pose, twist: arm.state.rdot };
            let p = &self.cfg.pipeline;
            let close = (position - arm.target.position).norm() < p.approach_tolerance_m;
            let slow = head(&arm.state.rdot).norm() < p.approach_speed_tolerance_m_per_s;
            arm.settled_for = if close && slow { arm.settled_for + self.dt } else { 0.0 };
            all_settled &= arm.settled_for >= p.approach_settle_s;
        }
        if all_settled {
            self.enter(Phase::Grasp);
        } else if self.elapsed() > self.cfg.pipeline.approach_timeout_s {
            self.enter(Phase::Failed(FailureModality::Timeout));
        }
        Ok(())
    }

    fn grasp(&mut self) -> Result<()> {
        for side in ArmSide::BOTH {
            match grasp_lock(&self.world, side, side.index()) {
                Ok(w) => self.world = w,
                Err(Error::GraspFailure { .. }) => {
                    self.enter(Phase::Failed(FailureModality::FailedGrasp));
                    return Ok(());
                }
                Err(e) => return Err(e),
            }
        }
        let ocp = self.cfg.controllers.ocp.ocp();
        self.lift = Vec::new();
        for side in ArmSide::BOTH {
            let ee = self.ee_base(side);
            let z_min = ee.position.z;
            self.outcome.z_min_m[side.index()] = Some(z_min);
            let r_b = self.cfg.assembly_orientation(side);
            let aa = relative_axis_angle(&ee.orientation, &r_b);
            let mut env = self.cfg.environment(side);
            env.z_min = Some(z_min);
            let params = ConstraintParams { r_a: ee.orientation, axis: aa.axis, panel: self.geometry.clone(), env };
            let goal = LiftGoal { position: Vec3::from(self.cfg.arm_goal(side).lift_goal_m), theta: aa.angle };
            self.lift.push(LiftArm {
                controller: NmpcController::new(params, ocp.clone(), goal),
                input: NmpcInput::default(),
                diagnostics: SolveDiagnostics::default(),
                unconverged: 0,
            });
        }
        self.enter(Phase::Lift);
        Ok(())
    }

    fn lift_state(&self, side: ArmSide) -> NmpcState {
        let ee = self.ee_base(side);
        let params = &self.lift[side.index()].controller.params;
        let rel = params.r_a.transpose().compose(&ee.orientation);
        NmpcState { position: ee.position, theta: angle_about_axis(&rel, &params.axis) }
    }

    fn lift(&mut self) -> Result<()> {
        let resolve_every = ((self.cfg.controllers.ocp.resolve_period_s / self.dt).round() as u64).max(1);
        let ticks_in = ((self.elapsed() / self.dt).round()) as u64;
        let mut at_goal = true;
        for side in ArmSide::BOTH {
            let x = self.lift_state(side);
            let i = side.index();
            let margins = constraint_eval(&x, &self.lift[i].controller.params)?;
            let worst = margins.iter().fold(0.0_f64, |acc, m| acc.max(-m));
            self.outcome.lift_max_violation_m = self.outcome.lift_max_violation_m.max(worst);
            let goal = self.lift[i].controller.goal;
            let err = (x.to_vector() - NmpcState { position: goal.position, theta: goal.theta }.to_vector()).norm();
            at_goal &= err <= self.cfg.pipeline.lift_tolerance;
            if ticks_in.is_multiple_of(resolve_every) {
                let started = Instant::now();
                let solved = self.lift[i].controller.solve(x);
                let wall = started.elapsed().as_secs_f64();
                self.timing.solves += 1;
                self.timing.total_s += wall;
                self.timing.max_s = self.timing.max_s.max(wall);
                self.outcome.lift_solves += 1;
                let sol = match solved {
                    Ok(sol) => sol,
                    Err(Error::QpInfeasible | Error::Solver(_) | Error::NotPositiveDefinite(_)) => {
                        self.enter(Phase::Failed(FailureModality::SolverAbort));
                        return Ok(());
                    }
                    Err(e) => return Err(e),
                };
                let arm = &mut self.lift[i];
                arm.input = sol.first_input();
                arm.diagnostics = sol.diagnostics;
                if sol.diagnostics.converged {
                    arm.unconverged = 0;
                } else {
                    arm.unconverged += 1;
                    self.outcome.lift_unconverged_solves += 1;
                    if arm.unconverged > self.cfg.pipeline.max_unconverged_solves {
                        self.enter(Phase::Failed(FailureModality::SolverAbort));
                        return Ok(());
                    }
                }
            }
            let (v, w) = self.lift[i].controller.twist_command(&self.lift[i].input);
            self.commands[i] = ArmCommand::Velocity(self.twist_to_world(side, &v, &w));
        }
        if at_goal {
            self.enter(Phase::AssemblyPosition);
        } else if self.elapsed() > self.cfg.pipeline.lift_timeout_s {
            self.enter(Phase::Failed(FailureModality::Timeout));
        }
        Ok(())
    }

    fn assembly_position(&mut self) -> Result<()> {
        if self.elapsed() + 0.5 * self.dt < self.cfg.pipeline.assembly_settle_s {
            return Ok(());
        }
        for side in ArmSide::BOTH {
            zero_sensor(&mut self.world, side);
        }
        let end = self.ee_base(self.yielding);
        // integrated lift rotations drift slightly off SO(3); project so the
        // rigid yaw is not polluted by the compliant roll and pitch
        let end = Pose::new(end.position, end.orientation.orthonormalized(), end.frame);
        let twist = self.world.arms[self.yielding.index()].twist;
        let r_base = self.base_rotation(self.yielding).transpose();
        let mut rdot = six(&r_base.apply(&head(&twist)), &r_base.apply(&tail(&twist)));
        let params = self.cfg.controllers.yielding.params();
        for k in 0..6 {
            if params.rigid[k] {
                rdot[k] = 0.0;
            }
        }
        self.insert = Some(InsertState {
            start: (self.tick + 1) as f64 * self.dt,
            yielding_end: end,
            yielding: ImpedanceState { r: six(&end.position, &Vec3::zeros()), rdot },
            integral: Vec6::zeros(),
            inserted_at: None,
            in_band_since: None,
        });
        // hand the yielding arm to the kinematic hold now so the step before
        // the first insert tick does not move a rigid axis
        let base = self.world.setup.arm_bases[self.yielding.index()];
        let pose = Pose::new(base.transform_point(&end.position), base.orientation.compose(&end.orientation), Frame::World);
        let twist = self.twist_to_world(self.yielding, &head(&rdot), &tail(&rdot));
        self.commands[self.yielding.index()] = ArmCommand::Kinematic { pose, twist };
        self.enter(Phase::Insert);
        Ok(())
    }

    fn yielding_command(&mut self, params: &ImpedanceParams) -> Result<()> {
        let side = self.yielding;
        let (_, fb) = self.base_wrench(side);
        let f_e = -fb.to_vec6();
        let st = self.insert.as_mut().expect("insert state");
        let end = st.yielding_end;
        let reference = ImpedanceReference::fixed(six(&end.position, &Vec3::zeros()));
        st.yielding = impedance_step(&st.yielding, &reference, &f_e, params, self.dt)?;
        let r = st.yielding.r;
        let rdot = st.yielding.rdot;
        let base = self.world.setup.arm_bases[side.index()];
        let orientation_base = Rotation::exp(&tail(&r)).compose(&end.orientation);
        let pose = Pose::new(base.transform_point(&head(&r)), base.orientation.compose(&orientation_base), Frame::World);
        let twist = self.twist_to_world(side, &head(&rdot), &tail(&rdot));
        self.commands[side.index()] = ArmCommand::Kinematic { pose, twist };
        Ok(())
    }

    fn insert(&mut self) -> Result<()> {
        let params = self.cfg.controllers.yielding.params();
        // rigid-axis bookkeeping on the pose the world actually holds
        {
            let st = self.insert.as_ref().expect("insert state");
            let ee = self.ee_base(self.yielding);
            let dx = (ee.position.x - st.yielding_end.position.x).abs();
            let dyaw = ee.orientation.compose(&st.yielding_end.orientation.transpose()).log().z.abs();
            let dev = &mut self.outcome.rigid_axis_deviation;
            dev[0] = dev[0].max(dx);
            dev[1] = dev[1].max(dyaw);
        }
        self.yielding_command(&params)?;

        let side = self.driving;
        let wc = &self.cfg.controllers.wrench;
        let desired = Wrench { force: Vec3::from(wc.desired_force_n), moment: Vec3::from(wc.desired_moment_n_m), frame: Frame::Base(side) };
        let cmd = WrenchCommand { modes: wc.modes, desired, gains: wc.gains() };
        let (_, measured) = self.base_wrench(side);
        let now = self.now();
        let st = self.insert.as_mut().expect("insert state");
        let (vel, integral) = force_control_step(&measured, &cmd, &st.integral, self.dt)?;
        st.integral = integral;
        let start = st.start;
        let inserted_at = st.inserted_at;
        self.commands[side.index()] = ArmCommand::Velocity(self.twist_to_world(side, &head(&vel), &tail(&vel)));

        if self.phase == Phase::Insert {
            self.outcome.peak_insertion_force_n = self.outcome.peak_insertion_force_n.max(measured.force.y.abs());
            let st = self.insert.as_mut().expect("insert state");
            if (measured.force.y - desired.force.y).abs() <= FORCE_BAND {
                let since = *st.in_band_since.get_or_insert(now);
                if self.outcome.force_settle_time_s.is_none() && now - since >= FORCE_HOLD - 0.5 * self.dt {
                    self.outcome.force_settle_time_s = Some(since - start);
                }
            } else {
                st.in_band_since = None;
            }
            if insertion_check(&self.world) == InsertionStatus::Inserted {
                self.insert.as_mut().expect("insert state").inserted_at = Some(now);
                self.outcome.success = true;
                self.enter(Phase::Done);
            } else if now - start > self.cfg.pipeline.insert_timeout_s {
                self.enter(Phase::Failed(FailureModality::FailedInsertion));
            }
        } else if inserted_at.is_some_and(|t| now - t >= self.cfg.pipeline.post_insert_s) {
            self.finished = true;
        }
        Ok(())
    }

    fn arm_record(&self, side: ArmSide) -> ArmRecord {
        let ee = self.ee_base(side);
        let rv = ee.orientation.log();
        let r_base = self.base_rotation(side).transpose();
        let tw = self.world.arms[side.index()].twist;
        let v = r_base.apply(&head(&tw));
        let w = r_base.apply(&tail(&tw));
        let (ws, wb) = self.base_wrench(side);
        let wrench = |x: &Wrench| WrenchRecord { fx: x.force.x, fy: x.force.y, fz: x.force.z, mx: x.moment.x, my: x.moment.y, mz: x.moment.z };
        let cmd = match self.commands[side.index()] {
            ArmCommand::Velocity(t) => t,
            ArmCommand::Kinematic { twist, .. } => twist,
        };
        let cv = r_base.apply(&head(&cmd));
        let cw = r_base.apply(&tail(&cmd));
        let twist = |a: Vec3, b: Vec3| TwistRecord { vx: a.x, vy: a.y, vz: a.z, wx: b.x, wy: b.y, wz: b.z };
        ArmRecord {
            side,
            pose: PoseRecord { x: ee.position.x, y: ee.position.y, z: ee.position.z, rx: rv.x, ry: rv.y, rz: rv.z },
            twist: twist(v, w),
            wrench_s: wrench(&ws),
            wrench_b: wrench(&wb),
            command: twist(cv, cw),
        }
    }

    fn record(&mut self, phase: Phase) {
        let mut contacts = ContactSummary { count: self.world.contacts.len(), ..Default::default() };
        let mut interface = Vec3::zeros();
        let mut table = Vec3::zeros();
        for c in &self.world.contacts {
            contacts.max_penetration_m = contacts.max_penetration_m.max(c.penetration);
            if c.body_b == Body::Table {
                table += c.force;
            } else if c.kind != ContactKind::Table {
                interface += c.force;
            }
        }
        contacts.interface_force_n = interface.norm();
        contacts.table_force_n = table.norm();
        let nmpc = (phase == Phase::Lift && self.lift.len() == 2).then(|| NmpcRecord {
            yielding: self.lift[self.yielding.index()].diagnostics,
            driving: self.lift[self.driving.index()].diagnostics,
        });
        let record = LogRecord {
            t: self.now(),
            phase,
            yielding: self.arm_record(self.yielding),
            driving: self.arm_record(self.driving),
            nmpc,
            contacts,
        };
        self.log.push(record);
    }
}

/// Runs one trial, calling `observer` after every tick.
pub fn run_trial_with(cfg: &ScenarioConfig, opts: RunOptions, observer: &mut TickObserver) -> Result<TrialRun> {
    let mut trial = Trial::new(cfg, opts)?;
    trial.run(observer)?;
    Ok(TrialRun { outcome: trial.outcome, log: trial.log, timing: trial.timing })
}

/// Scenario of trial `index`: panel poses jittered uniformly within the batch
/// ranges and the pipeline seed offset by the index.
pub fn randomized_trial(cfg: &ScenarioConfig, seed: u64, index: usize) -> ScenarioConfig {
    let trial_seed = seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let mut out = cfg.clone();
    let b = cfg.batch.clone();
    for side in ArmSide::BOTH {
        let arm = out.arm_world_mut(side);
        for k in 0..2 {
            let j = b.panel_position_jitter_m[k];
            arm.panel_position_m[k] += if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
        }
        let j = b.panel_yaw_jitter_rad;
        arm.panel_yaw_rad += if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
    }
    out.pipeline.seed = trial_seed;
    out
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub summary: BatchSummary,
    pub outcomes: Vec<TrialOutcome>,
}

/// Independent randomized trials on the rayon pool.
pub fn run_batch(cfg: &ScenarioConfig, trials: usize, seed: u64) -> Result<BatchResult> {
    if trials == 0 {
        return Err(crate::error::invalid("a batch needs at least one trial"));
    }
    cfg.validate()?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| run_trial_with(&randomized_trial(cfg, seed, i), RunOptions { record_log: false }, &mut |_, _| {}).map(|r| r.outcome))
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchResult { summary: BatchSummary::from_outcomes(&outcomes, seed), outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flowchart_edges() {
        use FailureModality as F;
        assert!(Phase::Init.allows(Phase::Detect));
        assert!(Phase::Detect.allows(Phase::Detect));
        assert!(!Phase::Lift.allows(Phase::Lift));
        assert!(!Phase::Approach.allows(Phase::Lift));
        assert!(Phase::Insert.allows(Phase::Failed(F::FailedInsertion)));
        assert!(!Phase::Insert.allows(Phase::Failed(F::FailedGrasp)));
        assert!(!Phase::Done.allows(Phase::Insert));
    }

    #[test]
    fn min_jerk_profile_ends_at_rest() {
        assert_eq!(min_jerk(0.0), (0.0, 0.0, 0.0));
        assert_eq!(min_jerk(1.0), (1.0, 0.0, 0.0));
        assert_eq!(min_jerk(2.0), (1.0, 0.0, 0.0));
        let (s, ds, _) = min_jerk(0.5);
        assert!((s - 0.5).abs() < 1e-15 && (ds - 1.875).abs() < 1e-12);
    }
}
