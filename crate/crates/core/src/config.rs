//! Scenario configuration: one TOML document with unit-suffixed keys.
//!
//! Every section and key is required unless marked otherwise, and unknown
//! keys are rejected. `ScenarioConfig::default()` is the nominal scenario.

use nalgebra::{Matrix4, Matrix6, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArmSide, Frame, Pose, Rotation, Vec3};
use crate::impedance::{ImpedanceParams, Vec6};
use crate::nmpc::OcpConfig;
use crate::perception::{CameraIntrinsics, DetectionNoise};
use crate::scene::{EnvironmentParams, PanelGeometry};
use crate::simworld::{ConnectorParams, ContactParams, GraspParams};
use crate::wrench_control::{AxisMode, ForceGains};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub world: WorldConfig,
    pub perception: PerceptionConfig,
    pub controllers: ControllersConfig,
    pub pipeline: PipelineConfig,
    pub batch: BatchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub gravity_m_per_s2: f64,
    pub table_height_m: f64,
    /// `[x_min, x_max, y_min, y_max]`.
    pub table_extent_m: [f64; 4],
    pub sim_dt_s: f64,
    pub ee_lag_s: f64,
    /// World y of the virtual wall separating the arms.
    pub wall_y_m: f64,
    /// Keep-out plane in front of each base, along base x.
    pub b_collision_m: f64,
    pub panel: PanelConfig,
    pub contact: ContactParams,
    pub connector: ConnectorParams,
    pub grasp: GraspParams,
    pub left: ArmWorldConfig,
    pub right: ArmWorldConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelConfig {
    pub width_m: f64,
    pub height_m: f64,
    pub thickness_m: f64,
    pub mass_kg: f64,
    pub grapple_offset_m: [f64; 3],
    pub rod_inset_m: f64,
    pub rod_length_m: f64,
    pub patch_offset_m: [f64; 3],
    pub patch_size_m: [f64; 2],
    pub connector_size_m: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmWorldConfig {
    /// Base origin in the world; base axes are parallel to the world axes.
    pub base_position_m: [f64; 3],
    /// Panel center `[x, y]` on the table.
    pub panel_position_m: [f64; 2],
    pub panel_yaw_rad: f64,
    /// EE pose from which the camera looks at the panel.
    pub observation_position_m: [f64; 3],
    pub observation_yaw_rad: f64,
    /// Sensor frame yaw relative to the tool frame.
    pub sensor_mount_yaw_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionConfig {
    pub intrinsics: CameraIntrinsics,
    /// Camera position in the tool frame. The camera looks along −z of the tool.
    pub camera_offset_m: [f64; 3],
    pub noise: DetectionNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpedanceConfig {
    pub mass_kg: [f64; 6],
    pub damping_n_s_per_m: [f64; 6],
    pub stiffness_n_per_m: [f64; 6],
    /// Task axes `x, y, z, roll, pitch, yaw` that follow the reference exactly.
    pub rigid_axes: [bool; 6],
}

impl ImpedanceConfig {
    pub fn params(&self) -> ImpedanceParams {
        ImpedanceParams {
            mass: Matrix6::from_diagonal(&Vec6::from(self.mass_kg)),
            damping: Matrix6::from_diagonal(&Vec6::from(self.damping_n_s_per_m)),
            stiffness: Matrix6::from_diagonal(&Vec6::from(self.stiffness_n_per_m)),
            rigid: self.rigid_axes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrenchConfig {
    /// Desired force in the driving arm's base frame.
    pub desired_force_n: [f64; 3],
    pub desired_moment_n_m: [f64; 3],
    pub modes: [AxisMode; 6],
    pub kp: [f64; 6],
    pub ki: [f64; 6],
    pub integral_limit_n_s: f64,
    pub max_linear_speed_m_per_s: f64,
    pub max_angular_speed_rad_per_s: f64,
}

impl WrenchConfig {
    pub fn gains(&self) -> ForceGains {
        ForceGains {
            kp: self.kp,
            ki: self.ki,
            integral_limit: self.integral_limit_n_s,
            max_linear_speed: self.max_linear_speed_m_per_s,
            max_angular_speed: self.max_angular_speed_rad_per_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcpSection {
    pub horizon_s: f64,
    pub nodes: usize,
    pub state_weight: [f64; 4],
    pub input_weight: [f64; 4],
    pub terminal_weight: [f64; 4],
    /// `[v_x, v_y, v_z]` in m/s then `θ̇` in rad/s.
    pub input_lower: [f64; 4],
    pub input_upper: [f64; 4],
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
    pub start_penalty: f64,
    pub resolve_period_s: f64,
}

impl OcpSection {
    pub fn ocp(&self) -> OcpConfig {
        let diag = |v: [f64; 4]| Matrix4::from_diagonal(&Vector4::from(v));
        OcpConfig {
            horizon: self.horizon_s,
            nodes: self.nodes,
            state_weight: diag(self.state_weight),
            input_weight: diag(self.input_weight),
            terminal_weight: diag(self.terminal_weight),
            input_lower: self.input_lower,
            input_upper: self.input_upper,
            margin_lower: [0.0; 12],
            kkt_tolerance: self.kkt_tolerance,
            max_iterations: self.max_iterations,
            start_penalty: self.start_penalty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllersConfig {
    pub approach: ImpedanceConfig,
    pub approach_duration_s: f64,
    pub yielding: ImpedanceConfig,
    pub wrench: WrenchConfig,
    pub ocp: OcpSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmGoalConfig {
    /// Lift goal of the tool point in the arm's base frame.
    pub lift_goal_m: [f64; 3],
    /// Assembly orientation of the tool in the base frame, as a rotation vector.
    pub assembly_rotvec_rad: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub yielding_arm: ArmSide,
    pub detect_retries: usize,
    pub approach_tolerance_m: f64,
    pub approach_speed_tolerance_m_per_s: f64,
    pub approach_settle_s: f64,
    pub approach_timeout_s: f64,
    pub lift_tolerance: f64,
    pub lift_timeout_s: f64,
    /// Consecutive non-converged lift solves tolerated before aborting.
    pub max_unconverged_solves: usize,
    pub assembly_settle_s: f64,
    pub insert_timeout_s: f64,
    /// Logging continues this long after the rods are inserted.
    pub post_insert_s: f64,
    pub log_period_s: f64,
    pub left: ArmGoalConfig,
    pub right: ArmGoalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    /// Uniform half-ranges added to each panel's `[x, y]`.
    pub panel_position_jitter_m: [f64; 2],
    pub panel_yaw_jitter_rad: f64,
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::from(a)
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        let arm = |y: f64| ArmWorldConfig {
            base_position_m: [0.0, y * 0.35, 0.0],
            panel_position_m: [0.63, y * 0.40],
            panel_yaw_rad: pi,
            observation_position_m: [0.63, y * 0.40, 0.6],
            observation_yaw_rad: pi,
            sensor_mount_yaw_rad: pi,
        };
        let assembly = Rotation::from_matrix(nalgebra::Matrix3::new(0.0, 0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 0.0))
            .expect("proper rotation")
            .log();
        let assembly_rotvec_rad = [assembly.x, assembly.y, assembly.z];
        let impedance = |rigid| ImpedanceConfig {
            mass_kg: [5.0, 5.0, 5.0, 0.5, 0.5, 0.5],
            damping_n_s_per_m: [80.0, 80.0, 80.0, 8.0, 8.0, 8.0],
            stiffness_n_per_m: [700.0, 700.0, 700.0, 70.0, 70.0, 70.0],
            rigid_axes: rigid,
        };
        let ocp = OcpConfig::default();
        let diag = |m: &Matrix4<f64>| [m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(3, 3)]];
        let gains = ForceGains::default();
        ScenarioConfig {
            world: WorldConfig {
                gravity_m_per_s2: 9.81,
                table_height_m: 0.0,
                table_extent_m: [0.2, 1.2, -1.0, 1.0],
                sim_dt_s: 0.001,
                ee_lag_s: 0.05,
                wall_y_m: 0.0,
                b_collision_m: 0.25,
                panel: PanelConfig {
                    width_m: 0.5,
                    height_m: 0.5,
                    thickness_m: 0.02,
                    mass_kg: 1.0,
                    grapple_offset_m: [0.0; 3],
                    rod_inset_m: 0.05,
                    rod_length_m: 0.014,
                    patch_offset_m: [0.1, 0.0, 0.0],
                    patch_size_m: [0.08, 0.04],
                    connector_size_m: [0.05, 0.05],
                },
                contact: ContactParams::default(),
                connector: ConnectorParams::default(),
                grasp: GraspParams::default(),
                left: arm(-1.0),
                right: arm(1.0),
            },
            perception: PerceptionConfig {
                intrinsics: CameraIntrinsics::default(),
                camera_offset_m: [0.06, 0.0, 0.0],
                noise: DetectionNoise::default(),
            },
            controllers: ControllersConfig {
                approach: impedance([false; 6]),
                approach_duration_s: 3.0,
                yielding: impedance([true, false, false, false, false, true]),
                wrench: WrenchConfig {
                    desired_force_n: [0.0, -35.0, 0.0],
                    desired_moment_n_m: [0.0; 3],
                    modes: [AxisMode::Rigid, AxisMode::Force, AxisMode::Force, AxisMode::Rigid, AxisMode::Rigid, AxisMode::Rigid],
                    kp: gains.kp,
                    ki: gains.ki,
                    integral_limit_n_s: gains.integral_limit,
                    max_linear_speed_m_per_s: gains.max_linear_speed,
                    max_angular_speed_rad_per_s: gains.max_angular_speed,
                },
                ocp: OcpSection {
                    horizon_s: ocp.horizon,
                    nodes: ocp.nodes,
                    state_weight: diag(&ocp.state_weight),
                    input_weight: diag(&ocp.input_weight),
                    terminal_weight: diag(&ocp.terminal_weight),
                    input_lower: ocp.input_lower,
                    input_upper: ocp.input_upper,
                    kkt_tolerance: ocp.kkt_tolerance,
                    max_iterations: ocp.max_iterations,
                    start_penalty: ocp.start_penalty,
                    resolve_period_s: 0.02,
                },
            },
            pipeline: PipelineConfig {
                seed: 0,
                yielding_arm: ArmSide::Left,
                detect_retries: 3,
                approach_tolerance_m: 0.002,
                approach_speed_tolerance_m_per_s: 0.005,
                approach_settle_s: 0.2,
                approach_timeout_s: 10.0,
                lift_tolerance: 0.0003,
                lift_timeout_s: 20.0,
                max_unconverged_solves: 25,
                assembly_settle_s: 0.5,
                insert_timeout_s: 15.0,
                post_insert_s: 1.0,
                log_period_s: 0.01,
                left: ArmGoalConfig { lift_goal_m: [0.45, 0.096, 0.40], assembly_rotvec_rad },
                right: ArmGoalConfig { lift_goal_m: [0.45, -0.08, 0.40], assembly_rotvec_rad },
            },
            batch: BatchConfig { panel_position_jitter_m: [0.03, 0.03], panel_yaw_jitter_rad: 0.3 },
        }
    }
}

fn config_err(message: impl Into<String>) -> Error {
    Error::Config { line: None, message: message.into() }
}

fn check(cond: bool, message: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(config_err(message))
    }
}

impl ScenarioConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text`, applies `key.path=value` overrides, then validates.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ScenarioConfig = table.try_into().map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        if overrides.is_empty() {
            Self::from_toml_str(&text)
        } else {
            Self::from_toml_with_overrides(&text, overrides)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        check(w.sim_dt_s > 0.0 && w.sim_dt_s.is_finite(), "world.sim_dt_s must be positive")?;
        check(w.ee_lag_s >= 0.0, "world.ee_lag_s must be non-negative")?;
        check(w.gravity_m_per_s2 >= 0.0, "world.gravity_m_per_s2 must be non-negative")?;
        check(w.b_collision_m > 0.0, "world.b_collision_m must be positive")?;
        w.contact.validate().map_err(|e| config_err(format!("world.contact: {e}")))?;
        w.connector.validate().map_err(|e| config_err(format!("world.connector: {e}")))?;
        check(w.grasp.capture_radius >= 0.0 && w.grasp.capture_angle >= 0.0, "world.grasp tolerances must be non-negative")?;
        self.panel_geometry().map_err(|e| config_err(format!("world.panel: {e}")))?;
        for side in ArmSide::BOTH {
            let a = self.arm_world(side);
            let wall = self.environment(side).wall_sign * (a.base_position_m[1] - w.wall_y_m);
            check(wall > 0.0, "each arm base must lie on its own side of the wall")?;
        }
        check(
            self.world.left.base_position_m[1] < self.world.right.base_position_m[1],
            "the left base must have the smaller world y",
        )?;
        self.perception.intrinsics.validate().map_err(|e| config_err(format!("perception.intrinsics: {e}")))?;
        self.perception.noise.validate().map_err(|e| config_err(format!("perception.noise: {e}")))?;
        let c = &self.controllers;
        for (name, imp) in [("approach", &c.approach), ("yielding", &c.yielding)] {
            imp.params().validate().map_err(|e| config_err(format!("controllers.{name}: {e}")))?;
        }
        check(c.approach_duration_s > 0.0, "controllers.approach_duration_s must be positive")?;
        crate::wrench_control::WrenchCommand {
            modes: c.wrench.modes,
            desired: crate::wrench_control::Wrench::zero(Frame::World),
            gains: c.wrench.gains(),
        }
        .validate()
        .map_err(|e| config_err(format!("controllers.wrench: {e}")))?;
        c.ocp.ocp().validate().map_err(|e| config_err(format!("controllers.ocp: {e}")))?;
        check(c.ocp.resolve_period_s >= w.sim_dt_s, "controllers.ocp.resolve_period_s must be at least one tick")?;
        let p = &self.pipeline;
        for (name, v) in [
            ("approach_tolerance_m", p.approach_tolerance_m),
            ("approach_speed_tolerance_m_per_s", p.approach_speed_tolerance_m_per_s),
            ("approach_timeout_s", p.approach_timeout_s),
            ("lift_tolerance", p.lift_tolerance),
            ("lift_timeout_s", p.lift_timeout_s),
            ("insert_timeout_s", p.insert_timeout_s),
            ("log_period_s", p.log_period_s),
        ] {
            check(v > 0.0 && v.is_finite(), &format!("pipeline.{name} must be positive"))?;
        }
        for (name, v) in [("approach_settle_s", p.approach_settle_s), ("assembly_settle_s", p.assembly_settle_s), ("post_insert_s", p.post_insert_s)] {
            check(v >= 0.0 && v.is_finite(), &format!("pipeline.{name} must be non-negative"))?;
        }
        let b = &self.batch;
        check(
            b.panel_position_jitter_m.iter().all(|v| *v >= 0.0) && b.panel_yaw_jitter_rad >= 0.0,
            "batch jitter ranges must be non-negative",
        )?;
        Ok(())
    }

    pub fn arm_world(&self, side: ArmSide) -> &ArmWorldConfig {
        match side {
            ArmSide::Left => &self.world.left,
            ArmSide::Right => &self.world.right,
        }
    }

    pub fn arm_world_mut(&mut self, side: ArmSide) -> &mut ArmWorldConfig {
        match side {
            ArmSide::Left => &mut self.world.left,
            ArmSide::Right => &mut self.world.right,
        }
    }

    pub fn arm_goal(&self, side: ArmSide) -> &ArmGoalConfig {
        match side {
            ArmSide::Left => &self.pipeline.left,
            ArmSide::Right => &self.pipeline.right,
        }
    }

    pub fn panel_geometry(&self) -> Result<PanelGeometry> {
        let p = &self.world.panel;
        PanelGeometry::rectangular(
            p.width_m,
            p.height_m,
            p.thickness_m,
            p.mass_kg,
            v3(p.grapple_offset_m),
            p.rod_inset_m,
            p.rod_length_m,
            v3(p.patch_offset_m),
        )
    }

    pub fn base_pose(&self, side: ArmSide) -> Pose {
        Pose::new(v3(self.arm_world(side).base_position_m), Rotation::identity(), Frame::World)
    }

    /// Lift workspace bounds of one arm in its base frame. `z_min` is unset until the grasp.
    pub fn environment(&self, side: ArmSide) -> EnvironmentParams {
        let base = self.arm_world(side).base_position_m;
        let wall_sign = if base[1] > self.world.wall_y_m { 1.0 } else { -1.0 };
        EnvironmentParams {
            b_collision: self.world.b_collision_m - base[0],
            y_wall: self.world.wall_y_m - base[1],
            wall_sign,
            z_min: None,
            frame: Frame::Base(side),
        }
    }

    pub fn assembly_orientation(&self, side: ArmSide) -> Rotation {
        Rotation::exp(&v3(self.arm_goal(side).assembly_rotvec_rad))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    Error::Config { line: e.span().map(|s| line_of(text, s.start)), message: e.message().trim().to_string() }
}

/// Sets `a.b.c=value`. The value is parsed as TOML, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("override key `{key}` is malformed")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        cur = cur
            .get_mut(*p)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| config_err(format!("override `{key}`: no section `{p}`")))?;
    }
    match cur.get(*last) {
        None => Err(config_err(format!("override `{key}`: unknown key `{last}`"))),
        Some(old) if old.is_table() => Err(config_err(format!("override `{key}` names a section"))),
        Some(old) => {
            // integers written where floats are expected
            let value = match (old, value) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (_, v) => v,
            };
            cur.insert((*last).to_string(), value);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml_string();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml_string(), text);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = ScenarioConfig::default().to_toml_string();
        let mut lines: Vec<&str> = text.lines().collect();
        let at = lines.iter().position(|l| l.starts_with("[world.grasp]")).unwrap();
        lines.insert(at + 1, "capture_radius_mm = 3.0");
        match ScenarioConfig::from_toml_str(&lines.join("\n")) {
            Err(Error::Config { line: Some(l), message }) => {
                assert_eq!(l, at + 2);
                assert!(message.contains("capture_radius_mm"), "{message}");
            }
            other => panic!("expected a line-anchored error, got {other:?}"),
        }
    }

    #[test]
    fn overrides_apply_and_reject_unknown_keys() {
        let text = ScenarioConfig::default().to_toml_string();
        let cfg = ScenarioConfig::from_toml_with_overrides(&text, &["pipeline.seed=7".into(), "perception.noise.depth_sigma_m=0.01".into()]).unwrap();
        assert_eq!(cfg.pipeline.seed, 7);
        assert_eq!(cfg.perception.noise.depth_sigma, 0.01);
        let cfg = ScenarioConfig::from_toml_with_overrides(&text, &["pipeline.yielding_arm=right".into(), "world.gravity_m_per_s2=0".into()]).unwrap();
        assert_eq!(cfg.pipeline.yielding_arm, ArmSide::Right);
        assert_eq!(cfg.world.gravity_m_per_s2, 0.0);
        assert!(ScenarioConfig::from_toml_with_overrides(&text, &["pipeline.sead=7".into()]).is_err());
        assert!(ScenarioConfig::from_toml_with_overrides(&text, &["pipeline".into()]).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let text = ScenarioConfig::default().to_toml_string();
        for o in ["world.contact.stiffness_n_per_m=-1", "perception.noise.miss_rate=1.5", "controllers.ocp.nodes=0", "world.sim_dt_s=0"] {
            assert!(ScenarioConfig::from_toml_with_overrides(&text, &[o.into()]).is_err(), "{o}");
        }
    }

    #[test]
    fn environment_follows_the_wall() {
        let cfg = ScenarioConfig::default();
        let left = cfg.environment(ArmSide::Left);
        let right = cfg.environment(ArmSide::Right);
        assert_eq!((left.y_wall, left.wall_sign), (0.35, -1.0));
        assert_eq!((right.y_wall, right.wall_sign), (-0.35, 1.0));
        assert_eq!(right.b_collision, 0.25);
    }
}
