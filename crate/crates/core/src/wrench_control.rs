//! Per-axis PI force regulation producing an EE velocity command.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{Frame, Vec3};
use crate::impedance::Vec6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vec3,
    pub moment: Vec3,
    pub frame: Frame,
}

impl Wrench {
    pub fn zero(frame: Frame) -> Self {
        Wrench { force: Vector3::zeros(), moment: Vector3::zeros(), frame }
    }

    pub fn from_vec6(v: &Vec6, frame: Frame) -> Self {
        Wrench { force: v.fixed_rows::<3>(0).into(), moment: v.fixed_rows::<3>(3).into(), frame }
    }

    pub fn to_vec6(&self) -> Vec6 {
        Vec6::new(self.force.x, self.force.y, self.force.z, self.moment.x, self.moment.y, self.moment.z)
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.moment.iter()).all(|v| v.is_finite())
    }

    /// Re-expresses the wrench in another frame, `rotation` mapping current
    /// coordinates to the new ones. The reference point is unchanged.
    pub fn rotated(&self, rotation: &crate::geometry::Rotation, frame: Frame) -> Wrench {
        Wrench { force: rotation.apply(&self.force), moment: rotation.apply(&self.moment), frame }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisMode {
    Force,
    Rigid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceGains {
    /// Proportional gain, m/(s·N) on forces and rad/(s·N·m) on moments.
    pub kp: [f64; 6],
    /// Integral gain, m/(s²·N) on forces and rad/(s²·N·m) on moments.
    pub ki: [f64; 6],
    /// Bound on each component of the force-error integral, N·s.
    pub integral_limit: f64,
    pub max_linear_speed: f64,
    pub max_angular_speed: f64,
}

impl Default for ForceGains {
    fn default() -> Self {
        ForceGains {
            kp: [0.008, 0.008, 0.008, 0.05, 0.05, 0.05],
            ki: [0.0; 6],
            integral_limit: 20.0,
            max_linear_speed: 0.1,
            max_angular_speed: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrenchCommand {
    pub modes: [AxisMode; 6],
    pub desired: Wrench,
    pub gains: ForceGains,
}

impl WrenchCommand {
    pub fn validate(&self) -> Result<()> {
        let g = &self.gains;
        if g.kp.iter().chain(g.ki.iter()).any(|v| !(*v >= 0.0)) {
            return Err(invalid("force gains must be non-negative"));
        }
        if !(g.integral_limit >= 0.0 && g.max_linear_speed > 0.0 && g.max_angular_speed > 0.0) {
            return Err(invalid("force limits must be positive"));
        }
        if !self.modes.contains(&AxisMode::Force) {
            return Err(invalid("at least one axis must be force-controlled"));
        }
        if !self.desired.is_finite() {
            return Err(invalid("desired wrench must be finite"));
        }
        Ok(())
    }
}

/// One PI update. Returns the EE twist command (linear then angular, in the
/// frame of the wrenches) and the new error integral. The integral is clamped
/// componentwise and frozen on axes whose command saturates.
pub fn force_control_step(measured: &Wrench, cmd: &WrenchCommand, integral: &Vec6, dt: f64) -> Result<(Vec6, Vec6)> {
    cmd.validate()?;
    if measured.frame != cmd.desired.frame {
        return Err(invalid(format!("measured wrench in {:?} but desired in {:?}", measured.frame, cmd.desired.frame)));
    }
    if !(dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    let g = &cmd.gains;
    let err = cmd.desired.to_vec6() - measured.to_vec6();
    let mut vel = Vec6::zeros();
    let mut next = *integral;
    for i in 0..6 {
        if cmd.modes[i] == AxisMode::Rigid {
            next[i] = 0.0;
            continue;
        }
        let limit = if i < 3 { g.max_linear_speed } else { g.max_angular_speed };
        let candidate = (integral[i] + err[i] * dt).clamp(-g.integral_limit, g.integral_limit);
        let raw = g.kp[i] * err[i] + g.ki[i] * candidate;
        if raw.abs() > limit {
            // conditional integration: keep the old integral while saturated
            next[i] = integral[i].clamp(-g.integral_limit, g.integral_limit);
            vel[i] = (g.kp[i] * err[i] + g.ki[i] * next[i]).clamp(-limit, limit);
        } else {
            next[i] = candidate;
            vel[i] = raw;
        }
    }
    Ok((vel, next))
}

/// Bias to subtract from subsequent readings: the reading itself.
pub fn sensor_zero(reading: &Wrench) -> Wrench {
    *reading
}

/// `reading − bias`, both in the same frame.
pub fn apply_bias(reading: &Wrench, bias: &Wrench) -> Result<Wrench> {
    if reading.frame != bias.frame {
        return Err(invalid("sensor bias recorded in a different frame"));
    }
    Ok(Wrench { force: reading.force - bias.force, moment: reading.moment - bias.moment, frame: reading.frame })
}
