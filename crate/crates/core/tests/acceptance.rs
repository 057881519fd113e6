//! Acceptance suite. Every criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails. Pass a substring to run a subset.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::{Matrix6, Vector4};
use panel_assembly::config::ScenarioConfig;
use panel_assembly::geometry::{ee_orientation, relative_axis_angle, rotation_from_axis_angle, ArmSide, Frame, Pose, Rotation, Vec3};
use panel_assembly::impedance::{impedance_step, ImpedanceParams, ImpedanceReference, ImpedanceState, Vec6};
use panel_assembly::nmpc::{build_ocp, nmpc_step, NmpcController, NmpcState, OcpConfig};
use panel_assembly::pipeline::{run_batch, run_trial, FailureModality, Phase, TrialOutcome};
use panel_assembly::runlog::{export_csv, write_runlog};
use panel_assembly::scene::constraint_eval;
use panel_assembly::simworld::{world_step, ArmCommand, ConnectorParams, ContactParams, GraspParams, WorldSetup, WorldState};
use panel_assembly::wrench_control::{force_control_step, AxisMode, Wrench, WrenchCommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    let q = Vector4::from_fn(|_, _| StandardNormal.sample(rng)).normalize();
    let (w, v) = (q[0], Vec3::new(q[1], q[2], q[3]));
    let s = v.norm();
    if s == 0.0 {
        return Rotation::identity();
    }
    Rotation::exp(&(v / s * (2.0 * s.atan2(w))))
}

fn rotation_algebra() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut round_trip, mut reconstruct) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let r_a = random_rotation(&mut rng);
        let r_b = random_rotation(&mut rng);
        let aa = relative_axis_angle(&r_a, &r_b);
        let rel = r_a.matrix().transpose() * r_b.matrix();
        round_trip = round_trip.max((rotation_from_axis_angle(&aa).unwrap().matrix() - rel).norm());
        reconstruct = reconstruct.max((ee_orientation(&r_a, &aa.axis, aa.angle).unwrap().matrix() - r_b.matrix()).norm());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        round_trip <= 1e-9 && reconstruct <= 1e-9 && secs < 1.0,
        format!("1000 pairs: round trip {round_trip:.1e}, R_A·R(a,θ) vs R_B {reconstruct:.1e} (limit 1e-9), {secs:.2} s (limit 1 s)"),
    )
}

/// Integrates one scalar axis (replicated on all six) from `r − r_d = 1` at rest.
fn scalar_release(m: f64, d: f64, k: f64, dt: f64, t_end: f64, oracle: impl Fn(f64) -> f64) -> f64 {
    let p = ImpedanceParams::diagonal([m; 6], [d; 6], [k; 6], [false; 6]);
    let reference = ImpedanceReference::fixed(Vec6::zeros());
    let mut s = ImpedanceState { r: Vec6::from_element(1.0), rdot: Vec6::zeros() };
    let steps = (t_end / dt).round() as usize;
    let mut worst = 0.0f64;
    for i in 1..=steps {
        s = impedance_step(&s, &reference, &Vec6::zeros(), &p, dt).unwrap();
        worst = worst.max((s.r[0] - oracle(i as f64 * dt)).abs());
    }
    worst
}

fn impedance_oracle() -> Verdict {
    let start = Instant::now();
    let critical = scalar_release(1.0, 2.0, 1.0, 1e-4, 5.0, |t| (1.0 + t) * (-t).exp());
    let undamped = scalar_release(1.0, 0.0, 1.0, 1e-4, 5.0, f64::cos);

    let stiffness = Vec6::new(700.0, 300.0, 1500.0, 70.0, 20.0, 150.0);
    let mass = Vec6::new(5.0, 5.0, 5.0, 0.5, 0.5, 0.5);
    let damping = mass.zip_map(&stiffness, |m, k| 2.0 * (m * k).sqrt());
    let p = ImpedanceParams {
        mass: Matrix6::from_diagonal(&mass),
        damping: Matrix6::from_diagonal(&damping),
        stiffness: Matrix6::from_diagonal(&stiffness),
        rigid: [false; 6],
    };
    let f = Vec6::new(35.0, -12.0, 4.0, 1.5, -0.7, 0.2);
    let expected = p.stiffness.clone().lu().solve(&f).unwrap();
    let reference = ImpedanceReference::fixed(Vec6::zeros());
    let mut s = ImpedanceState::default();
    for _ in 0..30_000 {
        s = impedance_step(&s, &reference, &f, &p, 1e-3).unwrap();
    }
    let steady = (s.r - expected).amax();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        critical <= 1e-6 && undamped <= 1e-3 && steady <= 1e-6 && secs < 5.0,
        format!(
            "critically damped {critical:.1e} (limit 1e-6), undamped {undamped:.1e} (limit 1e-3), steady offset vs K⁻¹f {steady:.1e} (limit 1e-6), {secs:.2} s (limit 5 s)"
        ),
    )
}

fn nmpc_constraints() -> Verdict {
    let start = Instant::now();
    let cfg = OcpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (dt, resolve_every) = (1e-3, 20);
    let (mut worst_node, mut worst_tick) = (f64::INFINITY, f64::INFINITY);
    let (mut solves, mut converged, mut reached) = (0usize, 0usize, 0usize);
    for i in 0..100 {
        let side = if i % 2 == 0 { ArmSide::Left } else { ArmSide::Right };
        let sc = common::random_lift(&mut rng, side);
        let goal = Vector4::new(sc.goal.position.x, sc.goal.position.y, sc.goal.position.z, sc.goal.theta);
        let mut ctl = NmpcController::new(sc.params.clone(), cfg.clone(), sc.goal);
        let mut x = sc.x0;
        let mut u = None;
        for tick in 0..20_000 {
            if tick % resolve_every == 0 {
                let sol = ctl.solve(x).unwrap();
                solves += 1;
                if sol.diagnostics.converged {
                    converged += 1;
                    let ocp = build_ocp(x, sc.goal, &sc.params, &cfg).unwrap();
                    let margins = ocp.node_margins(&sol.states).unwrap();
                    worst_node = margins[1..].iter().flatten().copied().fold(worst_node, f64::min);
                }
                u = Some(sol.first_input());
            }
            x = NmpcState::from_vector(&(x.to_vector() + u.unwrap().to_vector() * dt));
            worst_tick = constraint_eval(&x, &sc.params).unwrap().iter().copied().fold(worst_tick, f64::min);
            if (x.to_vector() - goal).norm() < 3e-4 {
                reached += 1;
                break;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_node >= -1e-6 && worst_tick >= -0.005 && secs < 120.0,
        format!(
            "100 lifts ({reached} reached goal), {converged}/{solves} solves converged: worst node margin {worst_node:.1e} (limit −1e-6), worst 1 kHz margin {worst_tick:.2e} m (limit −5e-3), {secs:.1} s (limit 120 s)"
        ),
    )
}

fn nmpc_oracle() -> Verdict {
    let start = Instant::now();
    let (cost, dp) = common::vertical_toy_costs();
    let rel = (cost - dp).abs() / dp;

    let cfg = OcpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sc = common::random_lift(&mut rng, ArmSide::Right);
    let at_goal = NmpcState { position: sc.goal.position, theta: sc.goal.theta };
    let sol = nmpc_step(at_goal, sc.goal, &sc.params, &cfg, None).unwrap();
    let u_max = sol.inputs.iter().map(|u| u.to_vector().amax()).fold(0.0, f64::max);
    let d = sol.diagnostics;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        rel < 0.05 && u_max <= 1e-8 && d.cost.abs() <= 1e-8 && d.kkt_residual <= 1e-8 && secs < 30.0,
        format!(
            "closed-loop cost {cost:.6} vs value iteration {dp:.6} ({:.2}%, limit 5%); at goal |u| {u_max:.1e}, cost {:.1e}, KKT {:.1e} (limit 1e-8); {secs:.2} s (limit 30 s)",
            100.0 * rel,
            d.cost,
            d.kkt_residual
        ),
    )
}

/// Driving arm pressing along −y into a linear spring of stiffness `k`, with
/// the simulator's EE velocity lag. Returns the time after which f_y stays
/// within 0.5 N of the target up to `horizon`.
fn spring_settle_time(cfg: &ScenarioConfig, k: f64, horizon: f64) -> Option<f64> {
    let side = ArmSide::Right;
    let setup = WorldSetup {
        gravity: Vec3::zeros(),
        table_height: -1.0,
        table_extent: cfg.world.table_extent_m,
        ee_lag: cfg.world.ee_lag_s,
        arm_bases: [Pose::identity(Frame::World), Pose::identity(Frame::World)],
        sensor_mounts: [Rotation::identity(); 2],
        panels: Vec::new(),
        connector: ConnectorParams::default(),
        grasp: GraspParams::default(),
        insertion_pair: None,
    };
    let start = Pose::new(Vec3::new(0.5, 0.0, 0.4), Rotation::identity(), Frame::World);
    let contact = ContactParams::default();
    let mut w = WorldState::new(setup, [start, start], Vec::new(), &contact).unwrap();
    let wc = &cfg.controllers.wrench;
    let desired = Wrench { force: Vec3::from(wc.desired_force_n), moment: Vec3::from(wc.desired_moment_n_m), frame: Frame::Base(side) };
    let cmd = WrenchCommand { modes: wc.modes, desired, gains: wc.gains() };
    let dt = cfg.world.sim_dt_s;
    let surface = start.position.y;
    let mut integral = Vec6::zeros();
    let mut settled_since = None;
    for i in 0..(horizon / dt).round() as usize {
        // the sensor reports the force the tool applies to the spring
        let y = w.arm(side).ee.position.y;
        let measured = Wrench { force: Vec3::new(0.0, -k * (surface - y).max(0.0), 0.0), moment: Vec3::zeros(), frame: Frame::Base(side) };
        let t = i as f64 * dt;
        if (measured.force.y - desired.force.y).abs() <= 0.5 {
            settled_since.get_or_insert(t);
        } else {
            settled_since = None;
        }
        let (vel, next) = force_control_step(&measured, &cmd, &integral, dt).unwrap();
        integral = next;
        let commands = [ArmCommand::hold(), ArmCommand::hold()];
        let mut commands = commands;
        commands[side.index()] = ArmCommand::Velocity(vel);
        w = world_step(&w, &commands, &contact, dt).unwrap();
    }
    settled_since
}

fn force_regulation() -> Verdict {
    let start = Instant::now();
    let cfg = ScenarioConfig::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for k in [200.0, 1000.0, 5000.0] {
        let settle = spring_settle_time(&cfg, k, 5.0);
        pass &= settle.is_some_and(|t| t < 5.0);
        parts.push(match settle {
            Some(t) => format!("k={k} settles at {t:.3} s"),
            None => format!("k={k} not settled"),
        });
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 10.0;
    verdict(pass, format!("{} (limit 5 s, band ±0.5 N about −35 N); {secs:.2} s (limit 10 s)", parts.join(", ")))
}

fn rigidity() -> Verdict {
    let start = Instant::now();
    let run = run_trial(&ScenarioConfig::default()).unwrap();
    let [dx, dyaw] = run.outcome.rigid_axis_deviation;

    let cfg = ScenarioConfig::default();
    let wc = &cfg.controllers.wrench;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rigid_out = 0.0f64;
    let mut impedance_out = 0.0f64;
    let yielding = cfg.controllers.yielding.params();
    for _ in 0..1000 {
        let mut v6 = || Vec6::from_fn(|_, _| rng.random_range(-200.0..200.0));
        let measured = Wrench::from_vec6(&v6(), Frame::Base(ArmSide::Right));
        let desired = Wrench::from_vec6(&v6(), Frame::Base(ArmSide::Right));
        let integral = v6() * 0.1;
        let cmd = WrenchCommand { modes: wc.modes, desired, gains: wc.gains() };
        let (vel, next) = force_control_step(&measured, &cmd, &integral, 1e-3).unwrap();
        let f_e = v6();
        let state = ImpedanceState { r: v6() * 1e-3, rdot: v6() * 1e-3 };
        let reference = ImpedanceReference { r: v6() * 1e-3, rdot: v6() * 1e-3, rddot: v6() * 1e-3 };
        let after = impedance_step(&state, &reference, &f_e, &yielding, 1e-3).unwrap();
        let end = reference.advanced(1e-3);
        for i in 0..6 {
            if wc.modes[i] == AxisMode::Rigid {
                rigid_out = rigid_out.max(vel[i].abs()).max(next[i].abs());
            }
            if yielding.rigid[i] {
                impedance_out = impedance_out.max((after.r[i] - end.r[i]).abs()).max((after.rdot[i] - end.rdot[i]).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        run.outcome.success && dx <= 1e-12 && dyaw <= 1e-12 && rigid_out == 0.0 && impedance_out == 0.0,
        format!(
            "insert deviation x {dx:.1e} m, yaw {dyaw:.1e} rad (limit 1e-12); 1000 probes: rigid force axes |v| {rigid_out:.1e}, rigid impedance axes off-reference {impedance_out:.1e} (both exactly 0); {secs:.2} s"
        ),
    )
}

const FLOWCHART: [Phase; 8] = [Phase::Init, Phase::Detect, Phase::Approach, Phase::Grasp, Phase::Lift, Phase::AssemblyPosition, Phase::Insert, Phase::Done];

fn phases_follow_flowchart(o: &TrialOutcome) -> bool {
    let legal = o.phases.windows(2).all(|w| w[0].phase.allows(w[1].phase) && w[1].t > w[0].t);
    let nominal = !o.success || o.phases.iter().map(|m| m.phase).eq(FLOWCHART);
    legal && nominal && o.phases.first().map(|m| m.phase) == Some(Phase::Init) && o.phases.last().is_some_and(|m| m.phase.is_terminal())
}

fn failure_table(counts: &BTreeMap<FailureModality, usize>) -> String {
    counts.iter().map(|(m, c)| format!("{}={c}", serde_json::to_value(m).unwrap().as_str().unwrap())).collect::<Vec<_>>().join(" ")
}

fn end_to_end() -> Verdict {
    let start = Instant::now();
    let cfg = ScenarioConfig::default();
    let seed = cfg.pipeline.seed;
    // trial i depends only on (seed, i), so the first 100 outcomes are the 100-trial batch
    let clean = run_batch(&cfg, 200, seed).unwrap();
    let first: Vec<_> = clean.outcomes[..100].to_vec();
    let rate_100 = first.iter().filter(|o| o.success).count() as f64 / 100.0;
    let clean_flow = clean.outcomes.iter().all(phases_follow_flowchart);

    let mut noisy_cfg = cfg.clone();
    noisy_cfg.perception.noise.depth_sigma = 0.010;
    let noisy = run_batch(&noisy_cfg, 200, seed).unwrap();
    let noisy_flow = noisy.outcomes.iter().all(phases_follow_flowchart);
    let dominant = noisy.summary.dominant_failure();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        rate_100 >= 0.95
            && clean_flow
            && noisy_flow
            && noisy.summary.success_rate <= clean.summary.success_rate
            && dominant == Some(FailureModality::FailedGrasp)
            && secs < 600.0,
        format!(
            "zero noise: {rate_100:.2} over 100 (limit 0.95), {:.3} over 200; depth σ 10 mm: {:.3} over 200, failures {}, failed-grasp share {:.2}; phase sequences legal: {}; {secs:.0} s (limit 600 s)",
            clean.summary.success_rate,
            noisy.summary.success_rate,
            failure_table(&noisy.summary.failure_counts),
            noisy.summary.failure_shares[&FailureModality::FailedGrasp],
            clean_flow && noisy_flow
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::default();
    cfg.perception.noise.depth_sigma = 0.002;
    cfg.perception.noise.pixel_sigma = 0.5;
    cfg.pipeline.seed = 7;
    let mut logs = Vec::new();
    for name in ["a", "b"] {
        let path = dir.path().join(name);
        write_runlog(&path, &run_trial(&cfg).unwrap().log).unwrap();
        logs.push(std::fs::read(&path).unwrap());
    }
    verdict(!logs[0].is_empty() && logs[0] == logs[1], format!("two runs with seed 7 and noise: {} bytes each, identical: {}", logs[0].len(), logs[0] == logs[1]))
}

fn read_csv(path: &Path) -> Vec<(f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            (t.parse().unwrap(), v.parse().unwrap())
        })
        .collect()
}

fn profile_signature() -> Verdict {
    let run = run_trial(&ScenarioConfig::default()).unwrap();
    let o = &run.outcome;
    let (Some(t_insert), Some(t_done)) = (o.phase_time(Phase::Insert), o.phase_time(Phase::Done)) else {
        return verdict(false, "nominal run did not reach insertion".into());
    };
    let dir = tempfile::tempdir().unwrap();
    let channels: Vec<String> = ["yielding.pose.y", "driving.wrench_S.fy", "contacts.count"].iter().map(|s| s.to_string()).collect();
    export_csv(&run.log, &channels, dir.path()).unwrap();
    let y = read_csv(&dir.path().join("yielding.pose.y.csv"));
    let fy = read_csv(&dir.path().join("driving.wrench_S.fy.csv"));
    let count = read_csv(&dir.path().join("contacts.count.csv"));

    // (a) flat until the panels first touch, then a one-directional drift
    let Some(t_contact) = count.iter().find(|(t, c)| *t >= t_insert && *c > 0.0).map(|(t, _)| *t) else {
        return verdict(false, "no contact during insertion".into());
    };
    let y0 = y.iter().find(|(t, _)| *t >= t_insert).unwrap().1;
    let flat = y.iter().filter(|(t, _)| *t >= t_insert && *t < t_contact).map(|(_, v)| (v - y0).abs()).fold(0.0, f64::max);
    let drift: Vec<f64> = y.iter().filter(|(t, _)| *t >= t_contact && *t <= t_done).map(|(_, v)| *v).collect();
    let net = drift.last().unwrap() - drift.first().unwrap();
    let dir_sign = net.signum();
    let mut extreme = drift[0];
    let mut reversal = 0.0f64;
    for v in &drift {
        extreme = if dir_sign > 0.0 { extreme.max(*v) } else { extreme.min(*v) };
        reversal = reversal.max((extreme - v) * dir_sign);
    }
    let shape_a = flat <= 1e-9 && net.abs() >= 0.005 && reversal <= 0.01 * net.abs();

    // (b) |f_y| dips at completion and recovers
    let abs_in = |a: f64, b: f64| fy.iter().filter(move |(t, _)| *t >= a && *t <= b).map(|(_, v)| v.abs());
    let before = abs_in(t_done - 0.5, t_done - 0.1).fold(0.0, f64::max);
    let dip = abs_in(t_done - 0.1, t_done + 0.2).fold(f64::INFINITY, f64::min);
    let after = fy.last().unwrap().1.abs();
    let shape_b = dip <= 0.5 * before && after >= 0.9 * before;

    verdict(
        o.success && shape_a && shape_b,
        format!(
            "(a) y flat to {flat:.1e} m until contact at {t_contact:.2} s, drift {:.1} mm to completion at {t_done:.2} s, largest reversal {:.3} mm (limit 1% of drift); (b) |f_y| {before:.1} N before, {dip:.1} N at completion, {after:.1} N at end",
            net * 1e3,
            reversal * 1e3
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 9] = [
    ("rotation algebra", rotation_algebra),
    ("impedance oracle", impedance_oracle),
    ("NMPC constraint satisfaction", nmpc_constraints),
    ("NMPC oracle equivalence", nmpc_oracle),
    ("force regulation", force_regulation),
    ("rigidity contract", rigidity),
    ("end-to-end pipeline", end_to_end),
    ("determinism", determinism),
    ("force and position profile signature", profile_signature),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let v = std::panic::catch_unwind(check).unwrap_or_else(|_| verdict(false, "panicked".into()));
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
