//! Rotations, rigid transforms and the axis-angle parametrization used to
//! plan panel orientation changes.
//!
//! A lift is described by the EE orientation at grasp time `R_A`, a fixed unit
//! axis `a` (expressed in the `R_A` frame) and a scalar angle. The EE
//! orientation at angle `θ` is `R_A · R(a, θ)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Vec3 = Vector3<f64>;

/// Tolerance on `‖a‖ = 1` for axis inputs.
pub const UNIT_AXIS_TOL: f64 = 1e-9;
/// Composition re-projects onto SO(3) once `‖RRᵀ − I‖_F` exceeds this.
pub const ORTHONORMAL_DRIFT_TOL: f64 = 1e-9;
/// Quaternion scalar part below which a rotation is treated as a half turn.
const HALF_TURN_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArmSide {
    Left,
    Right,
}

impl ArmSide {
    pub const BOTH: [ArmSide; 2] = [ArmSide::Left, ArmSide::Right];

    pub fn index(self) -> usize {
        match self {
            ArmSide::Left => 0,
            ArmSide::Right => 1,
        }
    }

    pub fn other(self) -> ArmSide {
        match self {
            ArmSide::Left => ArmSide::Right,
            ArmSide::Right => ArmSide::Left,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArmSide::Left => "left",
            ArmSide::Right => "right",
        }
    }
}

/// Coordinate frame tags. Each arm has its own base, sensor and camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "arm")]
pub enum Frame {
    World,
    Base(ArmSide),
    Sensor(ArmSide),
    Camera(ArmSide),
}

/// Element of SO(3) stored as a rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Accepts `m` if it is orthonormal with determinant +1 (within 1e-6).
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(invalid("rotation matrix has non-finite entries"));
        }
        let err = (m * m.transpose() - Matrix3::identity()).norm();
        if err > 1e-6 || (m.determinant() - 1.0).abs() > 1e-6 {
            return Err(invalid(format!("matrix is not a rotation (orthonormality error {err:.3e})")));
        }
        Ok(Rotation(m).orthonormalized_if_drifted())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Rotation {
        self.transpose()
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `self · other`, re-projected onto SO(3) if rounding drift accumulated.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0).orthonormalized_if_drifted()
    }

    pub fn about_x(angle: f64) -> Rotation {
        let (s, c) = angle.sin_cos();
        Rotation(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(angle: f64) -> Rotation {
        let (s, c) = angle.sin_cos();
        Rotation(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(angle: f64) -> Rotation {
        let (s, c) = angle.sin_cos();
        Rotation(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Exponential map of a rotation vector.
    pub fn exp(rotvec: &Vec3) -> Rotation {
        let angle = rotvec.norm();
        if angle == 0.0 {
            return Rotation::identity();
        }
        rodrigues(&(rotvec / angle), angle)
    }

    /// Rotation vector with angle in `[0, π]`.
    pub fn log(&self) -> Vec3 {
        let aa = axis_angle_of(self);
        aa.axis * aa.angle
    }

    /// Heading of the rotated x axis in the xy plane.
    pub fn yaw(&self) -> f64 {
        self.0[(1, 0)].atan2(self.0[(0, 0)])
    }

    pub fn orthonormality_error(&self) -> f64 {
        (self.0 * self.0.transpose() - Matrix3::identity()).norm()
    }

    /// Nearest rotation in the Frobenius sense (polar factor).
    pub fn orthonormalized(&self) -> Rotation {
        let svd = self.0.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Rotation(r)
    }

    fn orthonormalized_if_drifted(self) -> Rotation {
        if self.orthonormality_error() > ORTHONORMAL_DRIFT_TOL {
            self.orthonormalized()
        } else {
            self
        }
    }

    /// Unit quaternion `(w, x, y, z)` with `w ≥ 0`.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let m = &self.0;
        let (m00, m11, m22) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);
        let trace = m00 + m11 + m22;
        let q = if trace >= m00 && trace >= m11 && trace >= m22 {
            let w = 0.5 * (1.0 + trace).max(0.0).sqrt();
            let f = 0.25 / w;
            [w, (m[(2, 1)] - m[(1, 2)]) * f, (m[(0, 2)] - m[(2, 0)]) * f, (m[(1, 0)] - m[(0, 1)]) * f]
        } else if m00 >= m11 && m00 >= m22 {
            let x = 0.5 * (1.0 + m00 - m11 - m22).max(0.0).sqrt();
            let f = 0.25 / x;
            [(m[(2, 1)] - m[(1, 2)]) * f, x, (m[(0, 1)] + m[(1, 0)]) * f, (m[(0, 2)] + m[(2, 0)]) * f]
        } else if m11 >= m22 {
            let y = 0.5 * (1.0 - m00 + m11 - m22).max(0.0).sqrt();
            let f = 0.25 / y;
            [(m[(0, 2)] - m[(2, 0)]) * f, (m[(0, 1)] + m[(1, 0)]) * f, y, (m[(1, 2)] + m[(2, 1)]) * f]
        } else {
            let z = 0.5 * (1.0 - m00 - m11 + m22).max(0.0).sqrt();
            let f = 0.25 / z;
            [(m[(1, 0)] - m[(0, 1)]) * f, (m[(0, 2)] + m[(2, 0)]) * f, (m[(1, 2)] + m[(2, 1)]) * f, z]
        };
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        let s = if q[0] < 0.0 { -1.0 / n } else { 1.0 / n };
        [q[0] * s, q[1] * s, q[2] * s, q[3] * s]
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

impl std::ops::Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.log();
        [v.x, v.y, v.z].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = <[f64; 3]>::deserialize(d)?;
        Ok(Rotation::exp(&Vec3::new(v[0], v[1], v[2])))
    }
}

/// Unit axis and angle. Outputs of [`relative_axis_angle`] have `angle ∈ [0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
}

impl AxisAngle {
    pub fn new(axis: Vec3, angle: f64) -> Result<Self> {
        check_unit_axis(&axis)?;
        if !angle.is_finite() {
            return Err(invalid("angle must be finite"));
        }
        Ok(AxisAngle { axis, angle })
    }
}

fn check_unit_axis(a: &Vec3) -> Result<()> {
    let n = a.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_AXIS_TOL {
        return Err(invalid(format!("axis must be unit length (norm {n})")));
    }
    Ok(())
}

pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn rodrigues(a: &Vec3, theta: f64) -> Rotation {
    let k = skew(a);
    let (s, c) = theta.sin_cos();
    Rotation(Matrix3::identity() + k * s + k * k * (1.0 - c))
}

/// `R(a, θ) = I + sin θ [a]× + (1 − cos θ) [a]×²`. Exactly `I` at `θ = 0`.
pub fn rotation_from_axis_angle(aa: &AxisAngle) -> Result<Rotation> {
    check_unit_axis(&aa.axis)?;
    if !aa.angle.is_finite() {
        return Err(invalid("angle must be finite"));
    }
    Ok(rodrigues(&aa.axis, aa.angle))
}

fn axis_angle_of(r: &Rotation) -> AxisAngle {
    let [w, x, y, z] = r.to_quaternion();
    let v = Vec3::new(x, y, z);
    let s = v.norm();
    if s == 0.0 {
        return AxisAngle { axis: Vec3::x(), angle: 0.0 };
    }
    let mut angle = 2.0 * s.atan2(w);
    let mut axis = v / s;
    if w <= HALF_TURN_TOL {
        // half-turn: pick the sign whose first significant component is positive
        angle = std::f64::consts::PI;
        if let Some(first) = axis.iter().copied().find(|c| c.abs() > 1e-12) {
            if first < 0.0 {
                axis = -axis;
            }
        }
    }
    AxisAngle { axis, angle }
}

/// Axis `a` (in the frame of `r_a`) and angle `θ ∈ [0, π]` with `R(a, θ) = R_Aᵀ R_B`.
pub fn relative_axis_angle(r_a: &Rotation, r_b: &Rotation) -> AxisAngle {
    axis_angle_of(&Rotation(r_a.0.transpose() * r_b.0))
}

/// Signed angle of `r` about the unit axis `a` of the twist decomposition.
/// Equals `θ` whenever `r = R(a, θ)` with `θ ∈ (−π, π]`.
pub fn angle_about_axis(r: &Rotation, a: &Vec3) -> f64 {
    let [w, x, y, z] = r.to_quaternion();
    2.0 * (a.x * x + a.y * y + a.z * z).atan2(w)
}

/// `R_EE = R_A · R(a, θ)`.
pub fn ee_orientation(r_a: &Rotation, a: &Vec3, theta: f64) -> Result<Rotation> {
    Ok(r_a.compose(&rotation_from_axis_angle(&AxisAngle { axis: *a, angle: theta })?))
}

/// Rigid transform mapping coordinates in a child frame into `frame`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Rotation,
    pub frame: Frame,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Rotation, frame: Frame) -> Self {
        Pose { position, orientation, frame }
    }

    pub fn identity(frame: Frame) -> Self {
        Pose::new(Vec3::zeros(), Rotation::identity(), frame)
    }

    /// `self ∘ local`: `local` is expressed in the child frame of `self`.
    pub fn compose(&self, local: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation.apply(&local.position),
            orientation: self.orientation.compose(&local.orientation),
            frame: self.frame,
        }
    }

    /// Inverse transform; the result is tagged with `child`.
    pub fn inverse(&self, child: Frame) -> Pose {
        let rt = self.orientation.transpose();
        Pose { position: -rt.apply(&self.position), orientation: rt, frame: child }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.orientation.apply(p) + self.position
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.orientation.apply(v)
    }

    /// Coordinates of a point of `self.frame` in the child frame.
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.orientation.matrix().tr_mul(&(p - self.position))
    }

    pub fn inverse_transform_vector(&self, v: &Vec3) -> Vec3 {
        self.orientation.matrix().tr_mul(v)
    }
}

/// `R·p + t`.
pub fn transform_point(p: &Vec3, pose: &Pose) -> Vec3 {
    pose.transform_point(p)
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn zero_angle_is_exact_identity() {
        let aa = AxisAngle::new(Vec3::new(0.0, 0.6, 0.8), 0.0).unwrap();
        assert_eq!(rotation_from_axis_angle(&aa).unwrap(), Rotation::identity());
    }

    #[test]
    fn body_diagonal_third_turn_permutes_axes() {
        let a = Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
        let r = rotation_from_axis_angle(&AxisAngle::new(a, 2.0 * PI / 3.0).unwrap()).unwrap();
        let expected = Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        assert_abs_diff_eq!(*r.matrix(), expected, epsilon = 1e-12);
    }

    #[test]
    fn relative_of_compound_rotation() {
        let ra = Rotation::about_x(FRAC_PI_4);
        let rb = ra * Rotation::about_y(0.3);
        let aa = relative_axis_angle(&ra, &rb);
        assert_abs_diff_eq!(aa.axis, Vec3::y(), epsilon = 1e-12);
        assert_abs_diff_eq!(aa.angle, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn identical_orientations_give_canonical_zero() {
        let r = Rotation::about_z(0.7) * Rotation::about_x(-1.1);
        let aa = relative_axis_angle(&r, &r);
        assert_eq!(aa.angle, 0.0);
        assert_eq!(aa.axis, Vec3::x());
    }

    #[test]
    fn half_turn_axis_sign_is_canonical() {
        for axis in [Vec3::x(), Vec3::y(), Vec3::z(), Vec3::new(0.0, -0.6, 0.8)] {
            let r = rotation_from_axis_angle(&AxisAngle::new(-axis, PI).unwrap()).unwrap();
            let aa = relative_axis_angle(&Rotation::identity(), &r);
            assert_abs_diff_eq!(aa.angle, PI, epsilon = 1e-12);
            let first = aa.axis.iter().copied().find(|c| c.abs() > 1e-9).unwrap();
            assert!(first > 0.0, "axis {:?}", aa.axis);
        }
    }

    #[test]
    fn transform_point_example() {
        let pose = Pose::new(Vec3::new(0.0, 0.0, 1.0), Rotation::about_z(FRAC_PI_2), Frame::World);
        assert_abs_diff_eq!(transform_point(&Vec3::x(), &pose), Vec3::new(0.0, 1.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn non_unit_axis_is_rejected() {
        let aa = AxisAngle { axis: Vec3::new(1.0, 1.0, 0.0), angle: 0.2 };
        assert!(rotation_from_axis_angle(&aa).is_err());
        assert!(ee_orientation(&Rotation::identity(), &Vec3::new(0.0, 0.0, 2.0), 0.1).is_err());
    }

    #[test]
    fn pose_inverse_round_trip() {
        let pose = Pose::new(Vec3::new(0.3, -0.2, 0.5), Rotation::about_y(0.4) * Rotation::about_z(1.2), Frame::World);
        let p = Vec3::new(0.1, 0.7, -0.3);
        let back = pose.inverse(Frame::Base(ArmSide::Left)).transform_point(&pose.transform_point(&p));
        assert_abs_diff_eq!(back, p, epsilon = 1e-14);
    }

    #[test]
    fn drifted_matrix_is_reprojected() {
        let mut m = *Rotation::about_z(0.3).matrix();
        m[(0, 1)] += 1e-7;
        let r = Rotation::from_matrix(m).unwrap();
        assert!(r.orthonormality_error() < 1e-14);
        assert!(Rotation::from_matrix(Matrix3::identity() * 2.0).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-PI / 2.0 - 2.0 * PI), -PI / 2.0, epsilon = 1e-12);
    }
}
