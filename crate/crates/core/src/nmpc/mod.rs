//! Lift-phase model predictive control.
//!
//! The lifted panel is driven as a pure integrator in `(x, y, z, θ)`, where
//! `θ` is the angle about the fixed lift axis. The optimal control problem is
//! transcribed by multiple shooting with exact discretization and solved by
//! SQP. Because the dynamics are linear, every QP subproblem is condensed onto
//! the inputs and solved with the dual active-set method in [`qp`].

pub mod qp;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Rotation, Vec3};
use crate::scene::{constraint_eval, margin_derivatives, ConstraintParams};

use qp::{solve_qp, QpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NmpcState {
    pub position: Vec3,
    /// Angle about the lift axis, zero at lift start.
    pub theta: f64,
}

impl NmpcState {
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.position.x, self.position.y, self.position.z, self.theta)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        NmpcState { position: Vec3::new(v[0], v[1], v[2]), theta: v[3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NmpcInput {
    pub linear: Vec3,
    pub theta_rate: f64,
}

impl NmpcInput {
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.linear.x, self.linear.y, self.linear.z, self.theta_rate)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        NmpcInput { linear: Vec3::new(v[0], v[1], v[2]), theta_rate: v[3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftGoal {
    pub position: Vec3,
    pub theta: f64,
}

impl LiftGoal {
    fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.position.x, self.position.y, self.position.z, self.theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpConfig {
    pub horizon: f64,
    pub nodes: usize,
    pub state_weight: Matrix4<f64>,
    pub input_weight: Matrix4<f64>,
    pub terminal_weight: Matrix4<f64>,
    pub input_lower: [f64; 4],
    pub input_upper: [f64; 4],
    /// Lower bounds on the twelve corner margins. The upper bound is +∞.
    pub margin_lower: [f64; 12],
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
    /// Exact-penalty weight on the (fixed) initial-node violation.
    pub start_penalty: f64,
}

impl Default for OcpConfig {
    fn default() -> Self {
        OcpConfig {
            horizon: 2.0,
            nodes: 20,
            state_weight: Matrix4::from_diagonal(&Vector4::new(10.0, 10.0, 10.0, 5.0)),
            input_weight: Matrix4::identity(),
            terminal_weight: Matrix4::from_diagonal(&Vector4::new(100.0, 100.0, 100.0, 50.0)),
            input_lower: [-0.1, -0.1, -0.1, -0.3],
            input_upper: [0.1, 0.1, 0.1, 0.3],
            margin_lower: [0.0; 12],
            kkt_tolerance: 1e-8,
            max_iterations: 50,
            start_penalty: 1e3,
        }
    }
}

impl OcpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon must be positive"));
        }
        if self.nodes < 2 {
            return Err(invalid("at least two nodes are required"));
        }
        let sym = |m: &Matrix4<f64>| (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0);
        for (name, m) in [("state", &self.state_weight), ("input", &self.input_weight), ("terminal", &self.terminal_weight)] {
            if !m.iter().all(|v| v.is_finite()) || !sym(m) {
                return Err(invalid(format!("{name} weight must be finite and symmetric")));
            }
        }
        if self.input_weight.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("input weight".into()));
        }
        for (name, m) in [("state", &self.state_weight), ("terminal", &self.terminal_weight)] {
            if m.symmetric_eigenvalues().min() < -1e-12 {
                return Err(invalid(format!("{name} weight must be positive semidefinite")));
            }
        }
        if (0..4).any(|i| !(self.input_lower[i] < self.input_upper[i])) {
            return Err(invalid("input lower bounds must be below upper bounds"));
        }
        if !(self.kkt_tolerance > 0.0) || self.max_iterations == 0 {
            return Err(invalid("solver tolerance and iteration limit must be positive"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.nodes as f64
    }
}

/// Transcribed problem: node states `X_0..X_N` and interval inputs `U_0..U_{N−1}`
/// with `X_{k+1} = X_k + h·U_k`.
#[derive(Debug, Clone)]
pub struct Ocp {
    pub x0: NmpcState,
    pub goal: LiftGoal,
    pub params: ConstraintParams,
    pub cfg: OcpConfig,
    z_min: f64,
    /// Margins of the fixed initial node.
    pub start_margins: [f64; 12],
    pub infeasible_start: bool,
    hessian: DMatrix<f64>,
}

/// Tolerance below which a negative start margin counts as infeasible.
pub const START_FEASIBILITY_TOL: f64 = 1e-9;

pub fn build_ocp(x0: NmpcState, goal: LiftGoal, params: &ConstraintParams, cfg: &OcpConfig) -> Result<Ocp> {
    cfg.validate()?;
    let start_margins = constraint_eval(&x0, params)?;
    let z_min = params.env.z_min.expect("checked by constraint_eval");
    if !x0.to_vector().iter().all(|v| v.is_finite()) || !goal.to_vector().iter().all(|v| v.is_finite()) {
        return Err(invalid("state and goal must be finite"));
    }
    let infeasible_start = start_margins.iter().zip(&cfg.margin_lower).any(|(m, lo)| *m < lo - START_FEASIBILITY_TOL);
    let hessian = objective_hessian(cfg);
    Ok(Ocp { x0, goal, params: params.clone(), cfg: cfg.clone(), z_min, start_margins, infeasible_start, hessian })
}

fn objective_hessian(cfg: &OcpConfig) -> DMatrix<f64> {
    let n = cfg.nodes;
    let h = cfg.step();
    let mut hess = DMatrix::zeros(4 * n, 4 * n);
    for i in 0..n {
        for j in 0..n {
            let later = (n - 1 - i.max(j)) as f64;
            let mut block = (cfg.terminal_weight * 2.0 + cfg.state_weight * (2.0 * h * later)) * (h * h);
            if i == j {
                block += cfg.input_weight * (2.0 * h);
            }
            hess.view_mut((4 * i, 4 * j), (4, 4)).copy_from(&block);
        }
    }
    hess
}

impl Ocp {
    pub fn step(&self) -> f64 {
        self.cfg.step()
    }

    /// Node states under piecewise-constant inputs (exact for the integrator).
    pub fn rollout(&self, inputs: &[NmpcInput]) -> Vec<NmpcState> {
        let h = self.step();
        let mut x = self.x0.to_vector();
        let mut out = Vec::with_capacity(inputs.len() + 1);
        out.push(self.x0);
        for u in inputs {
            x += u.to_vector() * h;
            out.push(NmpcState::from_vector(&x));
        }
        out
    }

    /// `x_{k+1} − x_k − h·u_k` for each interval.
    pub fn dynamics_defects(&self, states: &[NmpcState], inputs: &[NmpcInput]) -> Vec<Vector4<f64>> {
        let h = self.step();
        inputs
            .iter()
            .enumerate()
            .map(|(k, u)| states[k + 1].to_vector() - states[k].to_vector() - u.to_vector() * h)
            .collect()
    }

    /// Stage cost `h(eᵀQe + uᵀRu)` summed over intervals plus the terminal cost `eᵀWe`.
    pub fn objective(&self, states: &[NmpcState], inputs: &[NmpcInput]) -> f64 {
        let h = self.step();
        let p = self.goal.to_vector();
        let mut j = 0.0;
        for (k, u) in inputs.iter().enumerate() {
            let e = states[k].to_vector() - p;
            let u = u.to_vector();
            j += h * ((e.transpose() * self.cfg.state_weight * e)[0] + (u.transpose() * self.cfg.input_weight * u)[0]);
        }
        let e = states[inputs.len()].to_vector() - p;
        j + (e.transpose() * self.cfg.terminal_weight * e)[0]
    }

    pub fn node_margins(&self, states: &[NmpcState]) -> Result<Vec<[f64; 12]>> {
        states.iter().map(|s| constraint_eval(s, &self.params)).collect()
    }

    fn objective_of(&self, u: &[f64]) -> f64 {
        let inputs = unflatten(u);
        self.objective(&self.rollout(&inputs), &inputs)
    }

    fn gradient_of(&self, u: &[f64]) -> DVector<f64> {
        let n = self.cfg.nodes;
        let h = self.step();
        let inputs = unflatten(u);
        let states = self.rollout(&inputs);
        let p = self.goal.to_vector();
        let mut lam = self.cfg.terminal_weight * (states[n].to_vector() - p) * 2.0;
        let mut g = DVector::zeros(4 * n);
        for j in (0..n).rev() {
            let gj = self.cfg.input_weight * inputs[j].to_vector() * (2.0 * h) + lam * h;
            g.rows_mut(4 * j, 4).copy_from(&gj);
            lam += self.cfg.state_weight * (states[j].to_vector() - p) * (2.0 * h);
        }
        g
    }

    fn start_violation(&self) -> f64 {
        self.start_margins.iter().zip(&self.cfg.margin_lower).map(|(m, lo)| (lo - m).max(0.0)).sum()
    }
}

fn flatten(inputs: &[NmpcInput]) -> Vec<f64> {
    inputs.iter().flat_map(|u| u.to_vector().iter().copied().collect::<Vec<_>>()).collect()
}

fn unflatten(u: &[f64]) -> Vec<NmpcInput> {
    u.chunks_exact(4).map(|c| NmpcInput::from_vector(&Vector4::new(c[0], c[1], c[2], c[3]))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Largest margin shortfall over nodes `1..=N`.
    pub max_violation: f64,
    /// Largest margin shortfall at the fixed initial node.
    pub start_violation: f64,
    pub converged: bool,
    pub infeasible_start: bool,
    /// Number of SQP iterations that fell back to the elastic subproblem.
    pub elastic_iterations: usize,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct NmpcSolution {
    pub inputs: Vec<NmpcInput>,
    pub states: Vec<NmpcState>,
    pub diagnostics: SolveDiagnostics,
}

impl NmpcSolution {
    pub fn first_input(&self) -> NmpcInput {
        self.inputs[0]
    }
}

/// Linearized margin rows for nodes `1..=N`: row `r` reads
/// `Σ_j coeff[r][j]·ΔU_j ≥ margin_lower − value[r]`.
struct Linearization {
    values: Vec<f64>,
    /// Row-major `(12N) × (4N)`.
    rows: Vec<f64>,
    /// `∂²g/∂θ²` per row.
    curvature: Vec<f64>,
}

fn linearize(ocp: &Ocp, states: &[NmpcState]) -> Linearization {
    let n = ocp.cfg.nodes;
    let h = ocp.step();
    let nv = 4 * n;
    let mut lin = Linearization { values: vec![0.0; 12 * n], rows: vec![0.0; 12 * n * nv], curvature: vec![0.0; 12 * n] };
    for k in 1..=n {
        let d = margin_derivatives(&states[k], &ocp.params, ocp.z_min);
        for r in 0..12 {
            let row = 12 * (k - 1) + r;
            lin.values[row] = d.values[r];
            lin.curvature[row] = d.theta_curvature[r];
            let base = row * nv;
            for j in 0..k {
                for c in 0..4 {
                    lin.rows[base + 4 * j + c] = h * d.gradient[r][c];
                }
            }
        }
    }
    lin
}

fn margin_values(ocp: &Ocp, u: &[f64]) -> Vec<f64> {
    let states = ocp.rollout(&unflatten(u));
    let mut out = Vec::with_capacity(12 * ocp.cfg.nodes);
    for s in &states[1..] {
        out.extend_from_slice(&margin_derivatives(s, &ocp.params, ocp.z_min).values);
    }
    out
}

fn violation(ocp: &Ocp, values: &[f64]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for (i, v) in values.iter().enumerate() {
        let short = (ocp.cfg.margin_lower[i % 12] - v).max(0.0);
        sum += short;
        max = max.max(short);
    }
    (sum, max)
}

struct KktInputs<'a> {
    u: &'a [f64],
    lin: &'a Linearization,
    lam: &'a [f64],
    lam_lo: &'a [f64],
    lam_up: &'a [f64],
}

fn kkt_residual(ocp: &Ocp, k: &KktInputs) -> f64 {
    let nv = k.u.len();
    let mut stat = ocp.gradient_of(k.u);
    for (r, &l) in k.lam.iter().enumerate() {
        if l != 0.0 {
            let row = &k.lin.rows[r * nv..(r + 1) * nv];
            for j in 0..nv {
                stat[j] -= l * row[j];
            }
        }
    }
    for j in 0..nv {
        stat[j] += k.lam_up[j] - k.lam_lo[j];
    }
    let mut res = stat.amax();
    for (r, &l) in k.lam.iter().enumerate() {
        let slack = k.lin.values[r] - ocp.cfg.margin_lower[r % 12];
        res = res.max((-slack).max(0.0)).max((l * slack).abs());
    }
    for j in 0..nv {
        let c = j % 4;
        res = res.max((k.lam_lo[j] * (k.u[j] - ocp.cfg.input_lower[c])).abs());
        res = res.max((k.lam_up[j] * (ocp.cfg.input_upper[c] - k.u[j])).abs());
    }
    res
}

struct Subproblem {
    step: Vec<f64>,
    lam: Vec<f64>,
    lam_lo: Vec<f64>,
    lam_up: Vec<f64>,
    elastic: bool,
}

fn solve_subproblem(ocp: &Ocp, hess: &DMatrix<f64>, grad: &DVector<f64>, u: &[f64], lin: &Linearization, rhs_values: &[f64]) -> Result<Subproblem> {
    let n = ocp.cfg.nodes;
    let nv = 4 * n;
    let b: Vec<f64> = rhs_values.iter().enumerate().map(|(r, v)| ocp.cfg.margin_lower[r % 12] - v).collect();
    let lower: Vec<f64> = (0..nv).map(|j| ocp.cfg.input_lower[j % 4] - u[j]).collect();
    let upper: Vec<f64> = (0..nv).map(|j| ocp.cfg.input_upper[j % 4] - u[j]).collect();
    match solve_qp(&QpProblem { hessian: hess, gradient: grad, a: &lin.rows, b: &b, lower: Some(&lower), upper: Some(&upper) }) {
        Ok(sol) => Ok(Subproblem {
            step: sol.x.as_slice().to_vec(),
            lam: sol.multipliers,
            lam_lo: sol.lower_multipliers,
            lam_up: sol.upper_multipliers,
            elastic: false,
        }),
        Err(Error::QpInfeasible) => {
            // elastic mode: one non-negative slack per node, penalized linearly
            let ne = nv + n;
            let mut he = DMatrix::zeros(ne, ne);
            he.view_mut((0, 0), (nv, nv)).copy_from(hess);
            for k in 0..n {
                he[(nv + k, nv + k)] = 1e-6;
            }
            let mut ge = DVector::zeros(ne);
            ge.rows_mut(0, nv).copy_from(grad);
            let weight = 1e4 * ocp.cfg.start_penalty.max(1.0);
            for k in 0..n {
                ge[nv + k] = weight;
            }
            let rows_e: Vec<f64> = (0..12 * n)
                .flat_map(|r| {
                    let mut row = lin.rows[r * nv..(r + 1) * nv].to_vec();
                    row.extend((0..n).map(|k| if k == r / 12 { 1.0 } else { 0.0 }));
                    row
                })
                .collect();
            let mut lo_e = lower.clone();
            lo_e.extend(std::iter::repeat_n(0.0, n));
            let mut up_e = upper.clone();
            up_e.extend(std::iter::repeat_n(f64::INFINITY, n));
            let sol = solve_qp(&QpProblem { hessian: &he, gradient: &ge, a: &rows_e, b: &b, lower: Some(&lo_e), upper: Some(&up_e) })?;
            Ok(Subproblem {
                step: sol.x.as_slice()[..nv].to_vec(),
                lam: sol.multipliers,
                lam_lo: sol.lower_multipliers[..nv].to_vec(),
                lam_up: sol.upper_multipliers[..nv].to_vec(),
                elastic: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Lagrangian Hessian: objective curvature plus the constraint curvature in θ,
/// which reaches the inputs through the cumulative sums `θ_k = θ_0 + hΣ_{j<k} u_θ,j`.
fn lagrangian_hessian(ocp: &Ocp, lin: &Linearization, lam: &[f64], convexify: bool) -> DMatrix<f64> {
    let n = ocp.cfg.nodes;
    let h = ocp.step();
    let mut c = vec![0.0; n + 1];
    for k in 1..=n {
        let mut ck = 0.0;
        for r in 0..12 {
            let row = 12 * (k - 1) + r;
            ck -= lam[row] * lin.curvature[row];
        }
        c[k] = if convexify { ck.max(0.0) } else { ck };
    }
    // suffix[m] = Σ_{k ≥ m} c_k
    let mut suffix = vec![0.0; n + 2];
    for k in (1..=n).rev() {
        suffix[k] = suffix[k + 1] + c[k];
    }
    let mut hess = ocp.hessian.clone();
    for i in 0..n {
        for j in 0..n {
            let add = h * h * suffix[i.max(j) + 1];
            if add != 0.0 {
                hess[(4 * i + 3, 4 * j + 3)] += add;
            }
        }
    }
    hess
}

/// Solves the transcribed problem by SQP from `initial` inputs (clamped to the bounds).
pub fn solve_ocp(ocp: &Ocp, initial: &[NmpcInput]) -> Result<NmpcSolution> {
    let n = ocp.cfg.nodes;
    let nv = 4 * n;
    if initial.len() != n {
        return Err(invalid(format!("warm start has {} inputs, expected {n}", initial.len())));
    }
    let clamp = |u: &mut [f64]| {
        for (j, v) in u.iter_mut().enumerate() {
            *v = v.clamp(ocp.cfg.input_lower[j % 4], ocp.cfg.input_upper[j % 4]);
        }
    };
    let mut u = flatten(initial);
    if u.iter().any(|v| !v.is_finite()) {
        return Err(invalid("warm start must be finite"));
    }
    clamp(&mut u);

    let mut lam = vec![0.0; 12 * n];
    let mut lam_lo = vec![0.0; nv];
    let mut lam_up = vec![0.0; nv];
    let mut rho: f64 = 1.0;
    let mut iterations = 0;
    let mut elastic_iterations = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    let mut lin = linearize(ocp, &ocp.rollout(&unflatten(&u)));

    while iterations < ocp.cfg.max_iterations {
        iterations += 1;
        let grad = ocp.gradient_of(&u);
        let exact = lagrangian_hessian(ocp, &lin, &lam, false);
        let sub = match solve_subproblem(ocp, &exact, &grad, &u, &lin, &lin.values) {
            Err(Error::NotPositiveDefinite(_)) => {
                let convex = lagrangian_hessian(ocp, &lin, &lam, true);
                solve_subproblem(ocp, &convex, &grad, &u, &lin, &lin.values)?
            }
            other => other?,
        };
        if sub.elastic {
            elastic_iterations += 1;
        }
        let lam_max = sub.lam.iter().copied().fold(0.0, f64::max);
        rho = rho.max(2.0 * lam_max + 1.0);

        let merit = |u: &[f64]| -> f64 { ocp.objective_of(u) + rho * violation(ocp, &margin_values(ocp, u)).0 };
        let phi0 = merit(&u);
        let (viol0, _) = violation(ocp, &lin.values);
        let slope = grad.dot(&DVector::from_column_slice(&sub.step)) - rho * viol0;
        let step_norm = sub.step.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

        let mut alpha = 1.0;
        let mut next: Vec<f64> = u.iter().zip(&sub.step).map(|(a, d)| a + d).collect();
        clamp(&mut next);
        if step_norm > 1e-13 && merit(&next) > phi0 + 1e-4 * slope {
            // second-order correction re-linearizes the margins at the trial point
            let trial_values = margin_values(ocp, &next);
            let corrected_rhs: Vec<f64> = trial_values
                .iter()
                .enumerate()
                .map(|(r, v)| v - lin.rows[r * nv..(r + 1) * nv].iter().zip(&sub.step).map(|(a, d)| a * d).sum::<f64>())
                .collect();
            let exact = lagrangian_hessian(ocp, &lin, &lam, true);
            let soc = solve_subproblem(ocp, &exact, &grad, &u, &lin, &corrected_rhs).ok();
            let soc_next = soc.map(|s| {
                let mut v: Vec<f64> = u.iter().zip(&s.step).map(|(a, d)| a + d).collect();
                clamp(&mut v);
                v
            });
            match soc_next {
                Some(v) if merit(&v) <= phi0 + 1e-4 * slope => next = v,
                _ => loop {
                    alpha *= 0.5;
                    next = u.iter().zip(&sub.step).map(|(a, d)| a + alpha * d).collect();
                    clamp(&mut next);
                    if merit(&next) <= phi0 + 1e-4 * alpha * slope || alpha < 1e-10 {
                        break;
                    }
                },
            }
        }
        u = next;
        for (l, s) in lam.iter_mut().zip(&sub.lam) {
            *l += alpha * (s - *l);
        }
        for (l, s) in lam_lo.iter_mut().zip(&sub.lam_lo) {
            *l += alpha * (s - *l);
        }
        for (l, s) in lam_up.iter_mut().zip(&sub.lam_up) {
            *l += alpha * (s - *l);
        }
        lin = linearize(ocp, &ocp.rollout(&unflatten(&u)));
        kkt = kkt_residual(ocp, &KktInputs { u: &u, lin: &lin, lam: &lam, lam_lo: &lam_lo, lam_up: &lam_up });
        if kkt <= ocp.cfg.kkt_tolerance {
            converged = true;
            break;
        }
    }

    let inputs = unflatten(&u);
    let states = ocp.rollout(&inputs);
    let (_, max_violation) = violation(ocp, &lin.values);
    let start_violation = ocp.start_margins.iter().zip(&ocp.cfg.margin_lower).map(|(m, lo)| (lo - m).max(0.0)).fold(0.0, f64::max);
    let cost = ocp.objective(&states, &inputs) + ocp.cfg.start_penalty * ocp.start_violation();
    Ok(NmpcSolution {
        inputs,
        states,
        diagnostics: SolveDiagnostics {
            iterations,
            kkt_residual: kkt,
            max_violation,
            start_violation,
            converged,
            infeasible_start: ocp.infeasible_start,
            elastic_iterations,
            cost,
        },
    })
}

/// Shifts a previous solution one node forward, repeating the last input.
pub fn shift_warm_start(previous: &[NmpcInput]) -> Vec<NmpcInput> {
    if previous.is_empty() {
        return Vec::new();
    }
    let mut out: Vec<NmpcInput> = previous[1..].to_vec();
    out.push(*previous.last().unwrap());
    out
}

/// One receding-horizon solve from the current state. `warm_start` is used as
/// given (see [`shift_warm_start`]); `None` starts from zero inputs.
pub fn nmpc_step(
    x_current: NmpcState,
    goal: LiftGoal,
    params: &ConstraintParams,
    cfg: &OcpConfig,
    warm_start: Option<&[NmpcInput]>,
) -> Result<NmpcSolution> {
    let ocp = build_ocp(x_current, goal, params, cfg)?;
    let zeros = vec![NmpcInput::default(); cfg.nodes];
    solve_ocp(&ocp, warm_start.unwrap_or(&zeros))
}

/// Spatial angular velocity realizing `θ̇ = u_θ` about the lift axis: `R_A·a·u_θ`.
pub fn input_map(u_theta: f64, r_a: &Rotation, axis: &Vec3) -> Vec3 {
    r_a.apply(axis) * u_theta
}

/// Receding-horizon controller holding its warm-start buffer.
#[derive(Debug, Clone)]
pub struct NmpcController {
    pub params: ConstraintParams,
    pub cfg: OcpConfig,
    pub goal: LiftGoal,
    previous: Option<Vec<NmpcInput>>,
}

impl NmpcController {
    pub fn new(params: ConstraintParams, cfg: OcpConfig, goal: LiftGoal) -> Self {
        NmpcController { params, cfg, goal, previous: None }
    }

    pub fn solve(&mut self, x: NmpcState) -> Result<NmpcSolution> {
        let warm = self.previous.as_deref().map(shift_warm_start);
        let sol = nmpc_step(x, self.goal, &self.params, &self.cfg, warm.as_deref())?;
        self.previous = Some(sol.inputs.clone());
        Ok(sol)
    }

    /// The full six-dimensional EE velocity command `(u_x, u_y, u_z, u_Φ)`.
    pub fn twist_command(&self, u: &NmpcInput) -> (Vec3, Vec3) {
        (u.linear, input_map(u.theta_rate, &self.params.r_a, &self.params.axis))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ArmSide, Frame};
    use crate::scene::{EnvironmentParams, PanelGeometry};
    use approx::assert_abs_diff_eq;

    pub(crate) fn flat_params(z_min: f64) -> ConstraintParams {
        ConstraintParams {
            r_a: Rotation::about_z(std::f64::consts::PI),
            axis: Vec3::y(),
            panel: PanelGeometry::rectangular(0.5, 0.5, 0.02, 1.0, Vec3::zeros(), 0.05, 0.012, Vec3::new(0.1, 0.0, 0.0)).unwrap(),
            env: EnvironmentParams { b_collision: 0.25, y_wall: -0.35, wall_sign: 1.0, z_min: Some(z_min), frame: Frame::Base(ArmSide::Right) },
        }
    }

    #[test]
    fn input_map_examples() {
        assert_abs_diff_eq!(input_map(0.5, &Rotation::identity(), &Vec3::z()), Vec3::new(0.0, 0.0, 0.5));
        assert_eq!(input_map(0.0, &Rotation::about_x(0.3), &Vec3::z()), Vec3::zeros());
        let v = input_map(1.0, &Rotation::about_x(std::f64::consts::FRAC_PI_2), &Vec3::z());
        assert_abs_diff_eq!(v, Vec3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn at_goal_returns_zero_input() {
        let p = flat_params(0.0);
        let x = NmpcState { position: Vec3::new(0.6, 0.05, 0.2), theta: 0.0 };
        let goal = LiftGoal { position: x.position, theta: 0.0 };
        let sol = nmpc_step(x, goal, &p, &OcpConfig::default(), None).unwrap();
        assert!(sol.diagnostics.converged);
        assert!(sol.first_input().to_vector().amax() < 1e-6);
        assert!(sol.diagnostics.cost.abs() < 1e-8);
    }

    #[test]
    fn unset_table_height_is_rejected() {
        let mut p = flat_params(0.0);
        p.env.z_min = None;
        let x = NmpcState { position: Vec3::new(0.6, 0.05, 0.2), theta: 0.0 };
        let goal = LiftGoal { position: x.position, theta: 0.0 };
        assert!(matches!(build_ocp(x, goal, &p, &OcpConfig::default()), Err(Error::State(_))));
    }

    #[test]
    fn shift_repeats_last() {
        let a = NmpcInput { linear: Vec3::x(), theta_rate: 0.0 };
        let b = NmpcInput { linear: Vec3::y(), theta_rate: 1.0 };
        assert_eq!(shift_warm_start(&[a, b]), vec![b, b]);
    }

    #[test]
    fn hessian_matches_finite_differences_of_gradient() {
        let p = flat_params(0.0);
        let cfg = OcpConfig { nodes: 5, ..Default::default() };
        let x = NmpcState { position: Vec3::new(0.6, 0.05, 0.2), theta: 0.1 };
        let ocp = build_ocp(x, LiftGoal { position: Vec3::new(0.5, 0.0, 0.4), theta: 1.0 }, &p, &cfg).unwrap();
        let u: Vec<f64> = (0..20).map(|i| 0.01 * i as f64 - 0.1).collect();
        let g0 = ocp.gradient_of(&u);
        let eps = 1e-6;
        for j in 0..20 {
            let mut up = u.clone();
            up[j] += eps;
            let mut dn = u.clone();
            dn[j] -= eps;
            assert_abs_diff_eq!(g0[j], (ocp.objective_of(&up) - ocp.objective_of(&dn)) / (2.0 * eps), epsilon = 1e-6);
            let col = (ocp.gradient_of(&up) - ocp.gradient_of(&dn)) / (2.0 * eps);
            for i in 0..20 {
                assert_abs_diff_eq!(ocp.hessian[(i, j)], col[i], epsilon = 1e-5);
            }
        }
    }
}
