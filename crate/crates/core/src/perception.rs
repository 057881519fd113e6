//! Synthetic oriented-box detector and grasp-pose recovery from detections.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{wrap_angle, Pose, Rotation, Vec3};
use crate::scene::PanelGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    #[serde(rename = "fx_px")]
    pub fx: f64,
    #[serde(rename = "fy_px")]
    pub fy: f64,
    #[serde(rename = "cx_px")]
    pub cx: f64,
    #[serde(rename = "cy_px")]
    pub cy: f64,
    /// Meters per raw depth unit.
    #[serde(rename = "depth_scale_m")]
    pub depth_scale: f64,
    #[serde(rename = "width_px")]
    pub width: u32,
    #[serde(rename = "height_px")]
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics { fx: 600.0, fy: 600.0, cx: 320.0, cy: 240.0, depth_scale: 0.001, width: 640, height: 480 }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.depth_scale > 0.0) {
            return Err(invalid("focal lengths and depth scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionClass {
    Patch,
    Connector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedDetection {
    pub class: DetectionClass,
    /// Box center in pixels.
    pub center: [f64; 2],
    /// Box side lengths in pixels.
    pub extent: [f64; 2],
    /// Orientation of the box's first side in the image, radians in `(−π/2, π/2]`.
    pub angle: f64,
    pub confidence: f64,
    /// Raw depth at the box center, in depth units.
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionNoise {
    #[serde(rename = "pixel_sigma_px")]
    pub pixel_sigma: f64,
    #[serde(rename = "depth_sigma_m")]
    pub depth_sigma: f64,
    /// Constant depth offset added to every reading.
    #[serde(rename = "depth_bias_m", default)]
    pub depth_bias: f64,
    #[serde(rename = "angle_sigma_rad")]
    pub angle_sigma: f64,
    pub miss_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DetectionNoise {
    fn default() -> Self {
        DetectionNoise { pixel_sigma: 0.0, depth_sigma: 0.0, depth_bias: 0.0, angle_sigma: 0.0, miss_rate: 0.0, seed: 0 }
    }
}

impl DetectionNoise {
    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_sigma >= 0.0 && self.depth_sigma >= 0.0 && self.angle_sigma >= 0.0) {
            return Err(invalid("noise standard deviations must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return Err(invalid("miss_rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// What the camera can see: one panel with its marker patch and grapple connector.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleScene {
    /// Panel pose in the same frame as the camera pose.
    pub panel_pose: Pose,
    pub panel: PanelGeometry,
    /// Physical patch size along the panel x and y axes.
    pub patch_size: [f64; 2],
    pub connector_size: [f64; 2],
}

fn wrap_half_turn(a: f64) -> f64 {
    let w = wrap_angle(2.0 * a) / 2.0;
    if w <= -std::f64::consts::FRAC_PI_2 {
        w + std::f64::consts::PI
    } else {
        w
    }
}

/// Renders the patch and connector into detections. Deterministic for a given
/// noise seed. Targets behind the camera, outside the image, or whose noisy
/// depth is non-positive produce no detection.
pub fn synthetic_detect(
    scene: &VisibleScene,
    camera_pose: &Pose,
    intrinsics: &CameraIntrinsics,
    noise: &DetectionNoise,
) -> Result<Vec<OrientedDetection>> {
    intrinsics.validate()?;
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let x_axis = camera_pose.inverse_transform_vector(&scene.panel_pose.transform_vector(&Vec3::x()));
    let targets = [
        (DetectionClass::Patch, scene.panel.patch_offset, scene.patch_size),
        (DetectionClass::Connector, scene.panel.grapple_offset, scene.connector_size),
    ];
    let mut out = Vec::new();
    for (class, local, size) in targets {
        // draw every variate so one target's visibility never shifts another's noise
        let draws: [f64; 4] = std::array::from_fn(|_| unit.sample(&mut rng));
        let missed = rng.random::<f64>() < noise.miss_rate;
        let p = camera_pose.inverse_transform_point(&scene.panel_pose.transform_point(&local));
        if p.z <= 0.0 || missed {
            continue;
        }
        let u = intrinsics.fx * p.x / p.z + intrinsics.cx;
        let v = intrinsics.fy * p.y / p.z + intrinsics.cy;
        if u < 0.0 || v < 0.0 || u >= intrinsics.width as f64 || v >= intrinsics.height as f64 {
            continue;
        }
        let du = intrinsics.fx * (x_axis.x * p.z - p.x * x_axis.z);
        let dv = intrinsics.fy * (x_axis.y * p.z - p.y * x_axis.z);
        let depth = p.z + noise.depth_bias + noise.depth_sigma * draws[2];
        if depth <= 0.0 {
            continue;
        }
        out.push(OrientedDetection {
            class,
            center: [u + noise.pixel_sigma * draws[0], v + noise.pixel_sigma * draws[1]],
            extent: [intrinsics.fx * size[0] / p.z, intrinsics.fy * size[1] / p.z],
            angle: wrap_half_turn(dv.atan2(du) + noise.angle_sigma * draws[3]),
            confidence: 1.0,
            depth: depth / intrinsics.depth_scale,
        });
    }
    Ok(out)
}

/// Pinhole back-projection of pixel `(u, v)` at metric depth `d` into the frame of `camera_pose`.
pub fn deproject(u: f64, v: f64, d: f64, intrinsics: &CameraIntrinsics, camera_pose: &Pose) -> Result<Vec3> {
    if u.is_nan() || v.is_nan() || d.is_nan() {
        return Err(Error::DetectionUnusable("NaN pixel or depth".into()));
    }
    if d <= 0.0 {
        return Err(invalid(format!("depth must be positive, got {d}")));
    }
    let p = Vec3::new((u - intrinsics.cx) / intrinsics.fx * d, (v - intrinsics.cy) / intrinsics.fy * d, d);
    Ok(camera_pose.transform_point(&p))
}

fn best(dets: &[OrientedDetection], class: DetectionClass) -> Option<&OrientedDetection> {
    dets.iter()
        .filter(|d| d.class == class)
        .max_by(|a, b| a.confidence.total_cmp(&b.confidence))
}

/// Grasp target from one patch and one connector detection.
///
/// The connector center fixes the position. The patch box axis fixes the yaw
/// up to a half turn, which is resolved by where the patch sits relative to
/// the connector. Roll and pitch come from `grasp_convention`, applied after yaw.
pub fn grasp_pose_from_detections(
    dets: &[OrientedDetection],
    intrinsics: &CameraIntrinsics,
    camera_pose: &Pose,
    panel: &PanelGeometry,
    grasp_convention: &Rotation,
) -> Result<Pose> {
    let patch = best(dets, DetectionClass::Patch).ok_or(Error::PerceptionIncomplete("patch"))?;
    let conn = best(dets, DetectionClass::Connector).ok_or(Error::PerceptionIncomplete("connector"))?;
    if !patch.angle.is_finite() || !patch.center.iter().all(|c| c.is_finite()) {
        return Err(Error::DetectionUnusable("non-finite patch detection".into()));
    }
    let position = deproject(conn.center[0], conn.center[1], conn.depth * intrinsics.depth_scale, intrinsics, camera_pose)?;

    let dir_cam = Vec3::new(patch.angle.cos() / intrinsics.fx, patch.angle.sin() / intrinsics.fy, 0.0);
    let dir = camera_pose.transform_vector(&dir_cam);
    let mut yaw = dir.y.atan2(dir.x);
    let offset_cam = Vec3::new(
        (patch.center[0] - conn.center[0]) / intrinsics.fx,
        (patch.center[1] - conn.center[1]) / intrinsics.fy,
        0.0,
    );
    let observed = camera_pose.transform_vector(&offset_cam);
    let local = panel.patch_offset - panel.grapple_offset;
    let expected = Rotation::about_z(yaw).apply(&Vec3::new(local.x, local.y, 0.0));
    if observed.x * expected.x + observed.y * expected.y < 0.0 {
        yaw += std::f64::consts::PI;
    }
    let orientation = Rotation::about_z(wrap_angle(yaw)).compose(grasp_convention);
    Ok(Pose::new(position, orientation, camera_pose.frame))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReplayLine {
    attempt: usize,
    detections: Vec<OrientedDetection>,
}

/// Writes one JSON line per detection attempt.
pub fn write_detection_replay(path: &Path, attempts: &[Vec<OrientedDetection>]) -> Result<()> {
    let io = |source| Error::Io { path: path.display().to_string(), source };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for (attempt, detections) in attempts.iter().enumerate() {
        let line = serde_json::to_string(&ReplayLine { attempt, detections: detections.clone() })?;
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}

/// Reads detection attempts written by [`write_detection_replay`].
pub fn read_detection_replay(path: &Path) -> Result<Vec<Vec<OrientedDetection>>> {
    let io = |source| Error::Io { path: path.display().to_string(), source };
    let f = std::io::BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ReplayLine = serde_json::from_str(&line)?;
        out.push(rec.detections);
    }
    Ok(out)
}
