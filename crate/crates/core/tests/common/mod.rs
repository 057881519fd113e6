#![allow(dead_code)]

use panel_assembly::geometry::{relative_axis_angle, ArmSide, Frame, Rotation, Vec3};
use panel_assembly::nmpc::{LiftGoal, NmpcController, NmpcState, OcpConfig};
use panel_assembly::scene::{constraint_eval, ConstraintParams, EnvironmentParams, PanelGeometry};

use rand::Rng;

pub fn panel() -> PanelGeometry {
    PanelGeometry::rectangular(0.5, 0.5, 0.02, 1.0, Vec3::zeros(), 0.05, 0.014, Vec3::new(0.1, 0.0, 0.0)).unwrap()
}

/// Upright assembly orientation: panel x down, panel y toward −y, face normal toward the robot.
pub fn assembly_orientation() -> Rotation {
    Rotation::from_matrix(nalgebra::Matrix3::new(0.0, 0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 0.0)).unwrap()
}

pub struct LiftScenario {
    pub x0: NmpcState,
    pub goal: LiftGoal,
    pub params: ConstraintParams,
}

/// Flat panel on the table in front of one arm, lifted to a randomized upright
/// goal next to the wall. Goals are resampled until their corner margins are
/// at least 5 mm.
pub fn random_lift<R: Rng>(rng: &mut R, side: ArmSide) -> LiftScenario {
    let s = if side == ArmSide::Right { 1.0 } else { -1.0 };
    loop {
        let yaw = std::f64::consts::PI + rng.random_range(-0.3..0.3);
        let r_a = Rotation::about_z(yaw);
        let x0 = NmpcState { position: Vec3::new(rng.random_range(0.58..0.68), s * rng.random_range(0.0..0.10), 0.02), theta: 0.0 };
        let r_b = Rotation::about_z(rng.random_range(-0.1..0.1)) * assembly_orientation();
        let aa = relative_axis_angle(&r_a, &r_b);
        let goal = LiftGoal {
            position: Vec3::new(rng.random_range(0.40..0.50), s * rng.random_range(-0.12..-0.04), rng.random_range(0.35..0.45)),
            theta: aa.angle,
        };
        let params = ConstraintParams {
            r_a,
            axis: aa.axis,
            panel: panel(),
            env: EnvironmentParams { b_collision: 0.25, y_wall: -s * 0.35, wall_sign: s, z_min: Some(0.02), frame: Frame::Base(side) },
        };
        let at_goal = NmpcState { position: goal.position, theta: goal.theta };
        let start_ok = constraint_eval(&x0, &params).unwrap().iter().all(|m| *m >= -1e-12);
        if start_ok && constraint_eval(&at_goal, &params).unwrap().iter().all(|m| *m >= 0.005) {
            return LiftScenario { x0, goal, params };
        }
    }
}

/// Unrotated panel, table at `z_min`, wall and keep-out plane far from the workspace.
pub fn flat_params(z_min: f64) -> ConstraintParams {
    ConstraintParams {
        r_a: Rotation::identity(),
        axis: Vec3::z(),
        panel: panel(),
        env: EnvironmentParams { b_collision: 0.25, y_wall: -0.35, wall_sign: 1.0, z_min: Some(z_min), frame: Frame::Base(ArmSide::Right) },
    }
}

/// Vertical toy whose goal lies below the table: returns the closed-loop cost
/// of the receding-horizon controller and the value-iteration cost from the
/// same start over a 51-state, 21-input grid with the table as a wall.
pub fn vertical_toy_costs() -> (f64, f64) {
    let cfg = OcpConfig::default();
    let p = flat_params(0.0);
    let (z0, zg) = (0.3, -0.1);
    let (q, r, w, ubar) = (10.0, 1.0, 100.0, 0.1);
    let h = cfg.step();
    let n = cfg.nodes;

    let zs: Vec<f64> = (0..51).map(|i| 0.3 * i as f64 / 50.0).collect();
    let us: Vec<f64> = (0..21).map(|i| -ubar + 2.0 * ubar * i as f64 / 20.0).collect();
    let interp = |v: &[f64], z: f64| -> f64 {
        if !(-1e-12..=0.3 + 1e-12).contains(&z) {
            return f64::INFINITY;
        }
        let s = (z.clamp(0.0, 0.3) / 0.3) * 50.0;
        let i = (s.floor() as usize).min(49);
        let f = s - i as f64;
        v[i] * (1.0 - f) + v[i + 1] * f
    };
    let mut v: Vec<f64> = zs.iter().map(|z| w * (z - zg).powi(2)).collect();
    for _ in 0..n {
        v = zs
            .iter()
            .map(|&z| us.iter().map(|&u| h * (q * (z - zg).powi(2) + r * u * u) + interp(&v, z + h * u)).fold(f64::INFINITY, f64::min))
            .collect();
    }
    let dp_cost = interp(&v, z0);

    let mut ctl = NmpcController::new(p, cfg.clone(), LiftGoal { position: Vec3::new(0.6, 0.1, zg), theta: 0.0 });
    let mut x = NmpcState { position: Vec3::new(0.6, 0.1, z0), theta: 0.0 };
    let mut cost = 0.0;
    for _ in 0..n {
        let u = ctl.solve(x).unwrap().first_input();
        cost += h * (q * (x.position.z - zg).powi(2) + r * u.linear.z * u.linear.z);
        x.position.z += h * u.linear.z;
    }
    cost += w * (x.position.z - zg).powi(2);
    (cost, dp_cost)
}
