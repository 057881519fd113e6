//! Panel geometry and the corner control-point constraints used while lifting.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{ee_orientation, rotation_from_axis_angle, AxisAngle, Frame, Rotation, Vec3};
use crate::nmpc::NmpcState;

/// Rectangular panel. The panel frame sits at the center of the fixture face:
/// x along the width, y along the height (rods on the +y edge, holes on the
/// −y edge) and z along the face normal, with the slab occupying `z ∈ [−t, 0]`.
/// The tool frame coincides with the panel frame shifted by the grapple offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelGeometry {
    pub width: f64,
    pub height: f64,
    pub thickness: f64,
    pub mass: f64,
    pub grapple_offset: Vec3,
    /// Rod roots on the +y edge, panel frame. Rods point along +y.
    pub rod_positions: [Vec3; 2],
    pub rod_length: f64,
    /// Hole entrances on the −y edge, panel frame. Holes open along −y.
    pub hole_positions: [Vec3; 2],
    /// Fixture-face corners relative to the tool frame, v1 top-right then counterclockwise.
    pub corner_offsets: [Vec3; 4],
    /// Center of the visual marker patch, panel frame.
    pub patch_offset: Vec3,
}

impl PanelGeometry {
    #[allow(clippy::too_many_arguments)]
    pub fn rectangular(
        width: f64,
        height: f64,
        thickness: f64,
        mass: f64,
        grapple_offset: Vec3,
        rod_inset: f64,
        rod_length: f64,
        patch_offset: Vec3,
    ) -> Result<Self> {
        for (name, v) in [("width", width), ("height", height), ("thickness", thickness), ("mass", mass)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("panel {name} must be positive")));
            }
        }
        if !(rod_inset >= 0.0 && rod_inset < width / 2.0) {
            return Err(invalid("rod inset must lie within the half width"));
        }
        if !(rod_length > 0.0) {
            return Err(invalid("rod length must be positive"));
        }
        let (hw, hh) = (width / 2.0, height / 2.0);
        let corners = [
            Vec3::new(hw, hh, 0.0),
            Vec3::new(-hw, hh, 0.0),
            Vec3::new(-hw, -hh, 0.0),
            Vec3::new(hw, -hh, 0.0),
        ];
        let zc = -thickness / 2.0;
        let xr = hw - rod_inset;
        Ok(PanelGeometry {
            width,
            height,
            thickness,
            mass,
            grapple_offset,
            rod_positions: [Vec3::new(xr, hh, zc), Vec3::new(-xr, hh, zc)],
            rod_length,
            hole_positions: [Vec3::new(xr, -hh, zc), Vec3::new(-xr, -hh, zc)],
            corner_offsets: corners.map(|c| c - grapple_offset),
            patch_offset,
        })
    }

    /// Eight slab corners in the panel frame.
    pub fn slab_corners(&self) -> [Vec3; 8] {
        let (hw, hh, t) = (self.width / 2.0, self.height / 2.0, self.thickness);
        let mut out = [Vec3::zeros(); 8];
        let mut k = 0;
        for z in [0.0, -t] {
            for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
                out[k] = Vec3::new(sx * hw, sy * hh, z);
                k += 1;
            }
        }
        out
    }

    /// Center of mass in the panel frame.
    pub fn center_of_mass(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.thickness / 2.0)
    }

    /// Principal inertia about the center of mass.
    pub fn inertia_diagonal(&self) -> Vec3 {
        let (w, h, t, m) = (self.width, self.height, self.thickness, self.mass);
        Vec3::new(m * (h * h + t * t) / 12.0, m * (w * w + t * t) / 12.0, m * (w * w + h * h) / 12.0)
    }
}

/// Workspace bounds of one arm, expressed in that arm's base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentParams {
    /// Keep-out plane in front of the robot body: `v_x ≥ b_collision`.
    pub b_collision: f64,
    /// Wall between the two arms.
    pub y_wall: f64,
    /// `+1` keeps corners at `v_y ≥ y_wall`, `−1` keeps them at `v_y ≤ y_wall`.
    pub wall_sign: f64,
    /// Table clearance, fixed once the panel is grasped.
    pub z_min: Option<f64>,
    pub frame: Frame,
}

impl EnvironmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b_collision > 0.0) {
            return Err(invalid("b_collision must be positive"));
        }
        if self.wall_sign != 1.0 && self.wall_sign != -1.0 {
            return Err(invalid("wall_sign must be +1 or -1"));
        }
        if !self.y_wall.is_finite() {
            return Err(invalid("y_wall must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParams {
    /// EE orientation when the lift starts.
    pub r_a: Rotation,
    /// Rotation axis in the frame of `r_a`.
    pub axis: Vec3,
    pub panel: PanelGeometry,
    pub env: EnvironmentParams,
}

impl ConstraintParams {
    fn z_min(&self) -> Result<f64> {
        self.env.z_min.ok_or_else(|| Error::State("z_min is unset until the panel is grasped".into()))
    }

    fn validate(&self) -> Result<()> {
        self.env.validate()?;
        AxisAngle::new(self.axis, 0.0).map(|_| ())
    }
}

/// Positions of the four fixture-face corners for a lift state.
pub fn control_points(state: &NmpcState, params: &ConstraintParams) -> Result<[Vec3; 4]> {
    let r = ee_orientation(&params.r_a, &params.axis, state.theta)?;
    Ok(params.panel.corner_offsets.map(|c| state.position + r.apply(&c)))
}

/// Twelve margins, non-negative when satisfied, ordered corner by corner as
/// (front plane, wall, table).
pub fn constraint_eval(state: &NmpcState, params: &ConstraintParams) -> Result<[f64; 12]> {
    params.validate()?;
    let z_min = params.z_min()?;
    let pts = control_points(state, params)?;
    let env = &params.env;
    let mut out = [0.0; 12];
    for (i, v) in pts.iter().enumerate() {
        out[3 * i] = v.x - env.b_collision;
        out[3 * i + 1] = env.wall_sign * (v.y - env.y_wall);
        out[3 * i + 2] = v.z - z_min;
    }
    Ok(out)
}

/// Margins with first and second derivatives with respect to the state.
/// Margins are affine in position, so only the angle has curvature.
pub(crate) struct MarginDerivatives {
    pub values: [f64; 12],
    /// `∂g/∂(x, y, z, θ)` per margin.
    pub gradient: [[f64; 4]; 12],
    /// `∂²g/∂θ²` per margin.
    pub theta_curvature: [f64; 12],
}

pub(crate) fn margin_derivatives(state: &NmpcState, params: &ConstraintParams, z_min: f64) -> MarginDerivatives {
    let r = params
        .r_a
        .compose(&rotation_from_axis_angle(&AxisAngle { axis: params.axis, angle: state.theta }).expect("axis validated"));
    let a = params.axis;
    let env = &params.env;
    let scale = [1.0, env.wall_sign, 1.0];
    let offset = [env.b_collision, env.y_wall, z_min];
    let mut d = MarginDerivatives { values: [0.0; 12], gradient: [[0.0; 4]; 12], theta_curvature: [0.0; 12] };
    for (i, c) in params.panel.corner_offsets.iter().enumerate() {
        let v = state.position + r.apply(c);
        let ac = a.cross(c);
        let dv = r.apply(&ac);
        let ddv = r.apply(&a.cross(&ac));
        for k in 0..3 {
            let row = 3 * i + k;
            d.values[row] = scale[k] * (v[k] - offset[k]);
            d.gradient[row][k] = scale[k];
            d.gradient[row][3] = scale[k] * dv[k];
            d.theta_curvature[row] = scale[k] * ddv[k];
        }
    }
    d
}
