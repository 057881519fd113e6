//! Deterministic contact world: two end-effectors, two panels, a table, and
//! the rod/hole connector between the panels.
//!
//! End-effectors are kinematic. They either follow a velocity command through
//! a first-order lag or are placed directly (for controllers that integrate
//! their own dynamics). Grasped panels are rigidly attached; free panels are
//! rigid bodies under gravity and table contact. Contacts are penalty
//! spring-dampers with a regularized Coulomb cap on the tangential force.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{relative_axis_angle, ArmSide, Frame, Pose, Rotation, Vec3};
use crate::impedance::Vec6;
use crate::scene::PanelGeometry;
use crate::wrench_control::{apply_bias, Wrench};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactParams {
    #[serde(rename = "stiffness_n_per_m")]
    pub stiffness: f64,
    #[serde(rename = "damping_n_s_per_m")]
    pub damping: f64,
    pub friction_coefficient: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams { stiffness: 20000.0, damping: 50.0, friction_coefficient: 0.3 }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness > 0.0 && self.damping >= 0.0 && self.friction_coefficient >= 0.0) {
            return Err(invalid("contact parameters need k_e > 0, c_e ≥ 0, μ ≥ 0"));
        }
        Ok(())
    }
}

/// Rod/hole connector. Radii are allowed lateral offsets of the rod axis: a
/// 45° chamfer narrows from `mouth_radius` to the bore's `clearance`. A
/// retention lip resists the rod between `lip_start` and `lip_end` of
/// insertion depth: the resistance ramps up over `lip_ramp`, holds at
/// `lip_force`, and vanishes once the rod passes `lip_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectorParams {
    #[serde(rename = "mouth_radius_m")]
    pub mouth_radius: f64,
    #[serde(rename = "hole_clearance_m")]
    pub clearance: f64,
    #[serde(rename = "depth_threshold_m")]
    pub depth_threshold: f64,
    /// How far in front of the hole a rod tip still counts as aligned.
    #[serde(rename = "capture_length_m")]
    pub capture_length: f64,
    #[serde(rename = "lip_start_m")]
    pub lip_start: f64,
    #[serde(rename = "lip_ramp_m")]
    pub lip_ramp: f64,
    #[serde(rename = "lip_end_m")]
    pub lip_end: f64,
    /// Plateau resistance of one lip.
    #[serde(rename = "lip_force_n")]
    pub lip_force: f64,
    #[serde(rename = "wall_stiffness_n_per_m")]
    pub wall_stiffness: f64,
}

impl Default for ConnectorParams {
    fn default() -> Self {
        ConnectorParams {
            mouth_radius: 0.003,
            clearance: 0.001,
            depth_threshold: 0.010,
            capture_length: 0.020,
            lip_start: 0.002,
            lip_ramp: 0.001,
            lip_end: 0.0095,
            lip_force: 17.4,
            wall_stiffness: 100000.0,
        }
    }
}

impl ConnectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.clearance > 0.0 && self.mouth_radius >= self.clearance) {
            return Err(invalid("hole mouth must be at least as wide as the clearance"));
        }
        if !(self.depth_threshold > 0.0 && self.capture_length >= 0.0 && self.wall_stiffness > 0.0) {
            return Err(invalid("connector depths and stiffness must be positive"));
        }
        if !(self.lip_start >= 0.0 && self.lip_end > self.lip_start && self.lip_ramp > 0.0 && self.lip_force >= 0.0) {
            return Err(invalid("lip must span a positive depth range with a positive ramp and non-negative force"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspParams {
    #[serde(rename = "capture_radius_m")]
    pub capture_radius: f64,
    #[serde(rename = "capture_angle_rad")]
    pub capture_angle: f64,
}

impl Default for GraspParams {
    fn default() -> Self {
        GraspParams { capture_radius: 0.010, capture_angle: 0.1 }
    }
}

/// Static description of the world.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSetup {
    pub gravity: Vec3,
    pub table_height: f64,
    /// `[x_min, x_max, y_min, y_max]` in the world frame.
    pub table_extent: [f64; 4],
    /// Time constant of the EE velocity tracking. Zero tracks instantly.
    pub ee_lag: f64,
    pub arm_bases: [Pose; 2],
    /// Sensor orientation relative to the tool frame; the sensor sits at the EE point.
    pub sensor_mounts: [Rotation; 2],
    pub panels: Vec<PanelGeometry>,
    pub connector: ConnectorParams,
    pub grasp: GraspParams,
    /// `(rod panel, hole panel)`.
    pub insertion_pair: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum GraspStatus {
    Free,
    /// `grapple` maps panel coordinates into tool coordinates' parent: `panel = ee ∘ grapple`.
    Locked { panel: usize, grapple: Pose },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    pub side: ArmSide,
    /// Tool pose in the world frame.
    pub ee: Pose,
    /// World-frame twist of the tool point: linear then angular.
    pub twist: Vec6,
    pub grasp: GraspStatus,
    pub sensor_bias: Option<Wrench>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelState {
    /// Panel frame in the world frame.
    pub pose: Pose,
    /// World-frame velocity of the center of mass, then angular velocity.
    pub twist: Vec6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Table,
    Panel(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    Table,
    RodFace,
    RodWall,
    Lip,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub kind: ContactKind,
    pub point: Vec3,
    /// Unit normal pushing `body_a` out of `body_b`.
    pub normal: Vec3,
    pub penetration: f64,
    pub body_a: Body,
    pub body_b: Body,
    /// Total force on `body_a`; `body_b` receives the opposite.
    pub force: Vec3,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub time: f64,
    pub arms: [ArmState; 2],
    pub panels: Vec<PanelState>,
    pub contacts: Vec<ContactRecord>,
    pub setup: Arc<WorldSetup>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmCommand {
    /// World-frame twist, tracked through the first-order lag.
    Velocity(Vec6),
    /// Place the tool directly, with the twist it moves at.
    Kinematic { pose: Pose, twist: Vec6 },
}

impl ArmCommand {
    pub fn hold() -> Self {
        ArmCommand::Velocity(Vec6::zeros())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionStatus {
    NotAligned,
    Aligned,
    Inserted,
}

/// Rod tip relative to its hole, in the hole panel frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RodAlignment {
    /// Axial insertion depth (negative in front of the hole).
    pub depth: f64,
    /// Lateral offset from the hole axis.
    pub lateral: f64,
}

impl WorldSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.ee_lag >= 0.0) {
            return Err(invalid("EE lag must be non-negative"));
        }
        self.connector.validate()?;
        if let Some((a, b)) = self.insertion_pair {
            if a == b || a >= self.panels.len() || b >= self.panels.len() {
                return Err(invalid("insertion pair must name two distinct panels"));
            }
        }
        Ok(())
    }
}

impl WorldState {
    /// Panels start at rest on the table at their static-equilibrium sink.
    pub fn new(setup: WorldSetup, ee_poses: [Pose; 2], panel_poses: Vec<Pose>, contact: &ContactParams) -> Result<Self> {
        setup.validate()?;
        contact.validate()?;
        if panel_poses.len() != setup.panels.len() {
            return Err(invalid("one pose per panel is required"));
        }
        let g = setup.gravity.norm();
        let panels = panel_poses
            .iter()
            .zip(&setup.panels)
            .map(|(p, geo)| {
                let sink = geo.mass * g / (4.0 * contact.stiffness);
                let mut pose = *p;
                pose.position.z = setup.table_height + geo.thickness - sink;
                PanelState { pose, twist: Vec6::zeros() }
            })
            .collect();
        let arms = [ArmSide::Left, ArmSide::Right].map(|side| ArmState {
            side,
            ee: ee_poses[side.index()],
            twist: Vec6::zeros(),
            grasp: GraspStatus::Free,
            sensor_bias: None,
        });
        Ok(WorldState { time: 0.0, arms, panels, contacts: Vec::new(), setup: Arc::new(setup) })
    }

    pub fn arm(&self, side: ArmSide) -> &ArmState {
        &self.arms[side.index()]
    }

    /// EE pose in the arm's base frame.
    pub fn ee_in_base(&self, side: ArmSide) -> Pose {
        let base = &self.setup.arm_bases[side.index()];
        let ee = &self.arms[side.index()].ee;
        Pose::new(base.inverse_transform_point(&ee.position), base.orientation.transpose().compose(&ee.orientation), Frame::Base(side))
    }

    /// Orientation of the sensor frame in the world.
    pub fn sensor_orientation(&self, side: ArmSide) -> Rotation {
        self.arms[side.index()].ee.orientation.compose(&self.setup.sensor_mounts[side.index()])
    }

    fn locked_by(&self, panel: usize) -> Option<ArmSide> {
        self.arms.iter().find_map(|a| match a.grasp {
            GraspStatus::Locked { panel: p, .. } if p == panel => Some(a.side),
            _ => None,
        })
    }

    fn point_velocity(&self, body: Body, point: &Vec3) -> Vec3 {
        match body {
            Body::Table => Vec3::zeros(),
            Body::Panel(i) => {
                let p = &self.panels[i];
                let com = p.pose.transform_point(&self.setup.panels[i].center_of_mass());
                let v = Vec3::new(p.twist[0], p.twist[1], p.twist[2]);
                let w = Vec3::new(p.twist[3], p.twist[4], p.twist[5]);
                v + w.cross(&(point - com))
            }
        }
    }
}

fn twist_parts(t: &Vec6) -> (Vec3, Vec3) {
    (Vec3::new(t[0], t[1], t[2]), Vec3::new(t[3], t[4], t[5]))
}

fn twist_of(v: Vec3, w: Vec3) -> Vec6 {
    Vec6::new(v.x, v.y, v.z, w.x, w.y, w.z)
}

struct ContactBuilder<'a> {
    w: &'a WorldState,
    out: Vec<ContactRecord>,
}

impl ContactBuilder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn spring(&mut self, kind: ContactKind, a: Body, b: Body, point: Vec3, normal: Vec3, penetration: f64, k: f64, c: f64, mu: f64) {
        let rel = self.w.point_velocity(a, &point) - self.w.point_velocity(b, &point);
        let rate = -rel.dot(&normal);
        let fn_mag = (k * penetration + c * rate).max(0.0);
        let vt = rel - normal * rel.dot(&normal);
        let speed = vt.norm();
        let ft = if speed > 0.0 { -vt / speed * (mu * fn_mag).min(c * speed) } else { Vec3::zeros() };
        self.out.push(ContactRecord { kind, point, normal, penetration, body_a: a, body_b: b, force: normal * fn_mag + ft });
    }
}

fn compute_contacts(w: &WorldState, contact: &ContactParams) -> Vec<ContactRecord> {
    let setup = &w.setup;
    let mut cb = ContactBuilder { w, out: Vec::new() };
    let (k, c, mu) = (contact.stiffness, contact.damping, contact.friction_coefficient);
    let [x0, x1, y0, y1] = setup.table_extent;
    for (i, p) in w.panels.iter().enumerate() {
        for corner in setup.panels[i].slab_corners() {
            let q = p.pose.transform_point(&corner);
            let depth = setup.table_height - q.z;
            if depth > 0.0 && q.x >= x0 && q.x <= x1 && q.y >= y0 && q.y <= y1 {
                cb.spring(ContactKind::Table, Body::Panel(i), Body::Table, q, Vec3::z(), depth, k, c, mu);
            }
        }
    }
    if let Some((rp, hp)) = setup.insertion_pair {
        connector_contacts(&mut cb, rp, hp, contact);
    }
    cb.out
}

fn rod_alignment(w: &WorldState, rp: usize, hp: usize, i: usize) -> (RodAlignment, Vec3, Vec3) {
    let rgeo = &w.setup.panels[rp];
    let hgeo = &w.setup.panels[hp];
    let rpose = &w.panels[rp].pose;
    let hpose = &w.panels[hp].pose;
    let tip_world = rpose.transform_point(&(rgeo.rod_positions[i] + Vec3::y() * rgeo.rod_length));
    let rel = hpose.inverse_transform_point(&tip_world) - hgeo.hole_positions[i];
    let lateral = Vec3::new(rel.x, 0.0, rel.z);
    (RodAlignment { depth: rel.y, lateral: lateral.norm() }, lateral, tip_world)
}

fn connector_contacts(cb: &mut ContactBuilder, rp: usize, hp: usize, contact: &ContactParams) {
    let w = cb.w;
    let conn = w.setup.connector;
    let hgeo = &w.setup.panels[hp];
    let rgeo = &w.setup.panels[rp];
    let hpose = w.panels[hp].pose;
    let into_hole = hpose.transform_vector(&Vec3::y());
    let (a, b) = (Body::Panel(rp), Body::Panel(hp));
    let (kw, c, mu) = (conn.wall_stiffness, contact.damping, contact.friction_coefficient);
    for i in 0..2 {
        let (al, lateral, tip) = rod_alignment(w, rp, hp, i);
        if al.depth <= 0.0 {
            continue;
        }
        if al.lateral > conn.mouth_radius {
            let local = hpose.inverse_transform_point(&tip);
            let on_face = local.x.abs() <= hgeo.width / 2.0 && local.z <= 0.0 && local.z >= -hgeo.thickness;
            if on_face {
                cb.spring(ContactKind::RodFace, a, b, tip, -into_hole, al.depth, kw, c, mu);
            }
            continue;
        }
        let allowed = (conn.mouth_radius - al.depth).max(conn.clearance);
        if al.lateral > allowed {
            let out = if al.lateral > 0.0 { hpose.transform_vector(&(lateral / al.lateral)) } else { Vec3::zeros() };
            if conn.mouth_radius - al.depth > conn.clearance {
                let n = (-out - into_hole) / std::f64::consts::SQRT_2;
                cb.spring(ContactKind::RodWall, a, b, tip, n, (al.lateral - allowed) / std::f64::consts::SQRT_2, kw, c, mu);
            } else {
                cb.spring(ContactKind::RodWall, a, b, tip, -out, al.lateral - conn.clearance, kw, c, mu);
            }
        }
        if al.depth > conn.lip_start && al.depth < conn.lip_end {
            let f = conn.lip_force * ((al.depth - conn.lip_start) / conn.lip_ramp).min(1.0);
            cb.out.push(ContactRecord {
                kind: ContactKind::Lip,
                point: tip,
                normal: -into_hole,
                penetration: al.depth - conn.lip_start,
                body_a: a,
                body_b: b,
                force: -into_hole * f,
            });
        }
    }
    // mating edges, one spring at each rod root carrying half the stiffness
    let rpose = w.panels[rp].pose;
    for i in 0..2 {
        let root = rpose.transform_point(&rgeo.rod_positions[i]);
        let local = hpose.inverse_transform_point(&root);
        let depth = local.y - hgeo.hole_positions[i].y;
        let overlaps = local.x.abs() <= hgeo.width / 2.0 && (local.z + hgeo.thickness / 2.0).abs() <= hgeo.thickness;
        if depth > 0.0 && overlaps {
            cb.spring(ContactKind::Edge, a, b, root, -into_hole, depth, contact.stiffness / 2.0, c / 2.0, mu);
        }
    }
}

/// Net force and moment (about `origin`) that contacts exert on a panel.
fn contact_load(contacts: &[ContactRecord], panel: usize, origin: &Vec3) -> (Vec3, Vec3) {
    let mut f = Vec3::zeros();
    let mut m = Vec3::zeros();
    for cr in contacts {
        let sign = if cr.body_a == Body::Panel(panel) {
            1.0
        } else if cr.body_b == Body::Panel(panel) {
            -1.0
        } else {
            continue;
        };
        let fi = cr.force * sign;
        f += fi;
        m += (cr.point - origin).cross(&fi);
    }
    (f, m)
}

/// Advances the world by `dt`.
pub fn world_step(w: &WorldState, commands: &[ArmCommand; 2], contact: &ContactParams, dt: f64) -> Result<WorldState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("time step must be positive"));
    }
    contact.validate()?;
    let setup = w.setup.clone();
    let mut next = w.clone();
    next.time = w.time + dt;

    let blend = if setup.ee_lag > 0.0 { 1.0 - (-dt / setup.ee_lag).exp() } else { 1.0 };
    for (arm, cmd) in next.arms.iter_mut().zip(commands) {
        match cmd {
            ArmCommand::Velocity(target) => {
                arm.twist += (target - arm.twist) * blend;
                let (v, om) = twist_parts(&arm.twist);
                arm.ee.position += v * dt;
                arm.ee.orientation = Rotation::exp(&(om * dt)).compose(&arm.ee.orientation);
            }
            ArmCommand::Kinematic { pose, twist } => {
                arm.ee.position = pose.position;
                arm.ee.orientation = pose.orientation;
                arm.twist = *twist;
            }
        }
    }

    // contacts from the current configuration act on free panels over this step
    let contacts = compute_contacts(w, contact);
    for (i, p) in next.panels.iter_mut().enumerate() {
        if w.locked_by(i).is_some() {
            continue;
        }
        let geo = &setup.panels[i];
        let com = p.pose.transform_point(&geo.center_of_mass());
        let (f, m) = contact_load(&contacts, i, &com);
        let (mut v, mut om) = twist_parts(&p.twist);
        v += (f / geo.mass + setup.gravity) * dt;
        let r = *p.pose.orientation.matrix();
        let inertia = r * nalgebra::Matrix3::from_diagonal(&geo.inertia_diagonal()) * r.transpose();
        let gyro = om.cross(&(inertia * om));
        om += inertia.try_inverse().expect("positive inertia") * (m - gyro) * dt;
        let new_com = com + v * dt;
        let rot = Rotation::exp(&(om * dt)).compose(&p.pose.orientation);
        p.pose.orientation = rot;
        p.pose.position = new_com - rot.apply(&geo.center_of_mass());
        p.twist = twist_of(v, om);
    }

    for arm in &next.arms {
        if let GraspStatus::Locked { panel, grapple } = arm.grasp {
            let pose = arm.ee.compose(&grapple);
            let com = pose.transform_point(&setup.panels[panel].center_of_mass());
            let (v, om) = twist_parts(&arm.twist);
            next.panels[panel] = PanelState { pose, twist: twist_of(v + om.cross(&(com - arm.ee.position)), om) };
        }
    }
    next.contacts = compute_contacts(&next, contact);
    Ok(next)
}

/// Position and angle error of an EE against a panel's grapple fixture.
pub fn fixture_error(w: &WorldState, side: ArmSide, panel: usize) -> (f64, f64) {
    let fixture = fixture_pose(w, panel);
    let ee = &w.arms[side.index()].ee;
    let angle = relative_axis_angle(&ee.orientation, &fixture.orientation).angle;
    ((ee.position - fixture.position).norm(), angle)
}

fn fixture_pose(w: &WorldState, panel: usize) -> Pose {
    let geo = &w.setup.panels[panel];
    w.panels[panel].pose.compose(&Pose::new(geo.grapple_offset, Rotation::identity(), Frame::World))
}

/// Locks `panel` to the arm if the EE is within the guide capture tolerance.
/// The guides seat the adapter, so the EE is moved onto the fixture and the
/// grapple transform is the ideal mating transform.
pub fn grasp_lock(w: &WorldState, side: ArmSide, panel: usize) -> Result<WorldState> {
    if panel >= w.panels.len() {
        return Err(invalid(format!("no panel {panel}")));
    }
    if w.locked_by(panel).is_some() || matches!(w.arms[side.index()].grasp, GraspStatus::Locked { .. }) {
        return Err(Error::State("arm or panel already locked".into()));
    }
    let (pos_err, ang_err) = fixture_error(w, side, panel);
    let g = w.setup.grasp;
    if pos_err > g.capture_radius || ang_err > g.capture_angle {
        return Err(Error::GraspFailure { position_error: pos_err, angle_error: ang_err });
    }
    let mut next = w.clone();
    let geo = &w.setup.panels[panel];
    let arm = &mut next.arms[side.index()];
    arm.ee = fixture_pose(w, panel);
    arm.twist = Vec6::zeros();
    arm.grasp = GraspStatus::Locked { panel, grapple: Pose::new(-geo.grapple_offset, Rotation::identity(), Frame::World) };
    next.panels[panel].twist = Vec6::zeros();
    Ok(next)
}

/// Raw wrench the tool applies to its payload, about the tool point, in the world frame.
fn raw_world_wrench(w: &WorldState, side: ArmSide) -> (Vec3, Vec3) {
    let arm = &w.arms[side.index()];
    let GraspStatus::Locked { panel, .. } = arm.grasp else {
        return (Vec3::zeros(), Vec3::zeros());
    };
    let geo = &w.setup.panels[panel];
    let origin = arm.ee.position;
    let (fc, mc) = contact_load(&w.contacts, panel, &origin);
    let com = w.panels[panel].pose.transform_point(&geo.center_of_mass());
    let fg = w.setup.gravity * geo.mass;
    let mg = (com - origin).cross(&fg);
    (-(fc + fg), -(mc + mg))
}

/// Sensor reading before bias removal, in the sensor frame.
pub fn raw_wrench(w: &WorldState, side: ArmSide) -> Wrench {
    let (f, m) = raw_world_wrench(w, side);
    let rs = w.sensor_orientation(side).transpose();
    Wrench { force: rs.apply(&f), moment: rs.apply(&m), frame: Frame::Sensor(side) }
}

/// Wrench the tool exerts on its payload and the environment, in the sensor
/// frame, with any stored bias removed.
pub fn measure_wrench(w: &WorldState, side: ArmSide) -> Wrench {
    let raw = raw_wrench(w, side);
    match &w.arms[side.index()].sensor_bias {
        Some(bias) => apply_bias(&raw, bias).expect("bias stored in the sensor frame"),
        None => raw,
    }
}

/// Stores the current reading as the sensor bias.
pub fn zero_sensor(w: &mut WorldState, side: ArmSide) {
    let raw = raw_wrench(w, side);
    w.arms[side.index()].sensor_bias = Some(crate::wrench_control::sensor_zero(&raw));
}

/// Per-rod alignment of the insertion pair, if one is configured.
pub fn rod_alignments(w: &WorldState) -> Option<[RodAlignment; 2]> {
    let (rp, hp) = w.setup.insertion_pair?;
    Some([0, 1].map(|i| rod_alignment(w, rp, hp, i).0))
}

pub fn insertion_check(w: &WorldState) -> InsertionStatus {
    let Some(rods) = rod_alignments(w) else {
        return InsertionStatus::NotAligned;
    };
    let conn = &w.setup.connector;
    if rods.iter().all(|r| r.depth >= conn.depth_threshold && r.lateral <= conn.clearance) {
        return InsertionStatus::Inserted;
    }
    let in_cone = |r: &RodAlignment| r.depth >= -conn.capture_length && r.lateral <= conn.mouth_radius + (-r.depth).max(0.0);
    if rods.iter().all(in_cone) {
        InsertionStatus::Aligned
    } else {
        InsertionStatus::NotAligned
    }
}
