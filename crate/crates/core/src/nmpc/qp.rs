//! Dense strictly convex QP, solved with the Goldfarb–Idnani dual active-set method.
//!
//! minimize ½ xᵀHx + gᵀx subject to Ax ≥ b and optional simple bounds.
//!
//! The method keeps `J = L⁻ᵀ Q` and an upper-triangular `R` with
//! `Jᵀ N = [R; 0]`, where `N` holds the active constraint normals and
//! `H = L Lᵀ`. Constraints enter one at a time (most violated first) and
//! leave when their multiplier would turn negative.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Inequality rows are `a[i*n..(i+1)*n] · x ≥ b[i]`.
pub struct QpProblem<'a> {
    pub hessian: &'a DMatrix<f64>,
    pub gradient: &'a DVector<f64>,
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub lower: Option<&'a [f64]>,
    pub upper: Option<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the general rows.
    pub multipliers: Vec<f64>,
    pub lower_multipliers: Vec<f64>,
    pub upper_multipliers: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    General(usize),
    Lower(usize),
    Upper(usize),
}

struct Workspace {
    n: usize,
    /// Column-major `n × n`.
    j: Vec<f64>,
    /// Column-major `n × n`, upper triangle of the first `q` columns used.
    r: Vec<f64>,
    q: usize,
}

impl Workspace {
    fn jcol(&self, c: usize) -> &[f64] {
        &self.j[c * self.n..(c + 1) * self.n]
    }

    fn rotate_j_columns(&mut self, c0: usize, c1: usize, c: f64, s: f64) {
        let n = self.n;
        let (lo, hi) = self.j.split_at_mut(c1 * n);
        let a = &mut lo[c0 * n..(c0 + 1) * n];
        let b = &mut hi[..n];
        for k in 0..n {
            let (x, y) = (a[k], b[k]);
            a[k] = c * x + s * y;
            b[k] = -s * x + c * y;
        }
    }

    /// `d = Jᵀ n` for the normal of `row`.
    fn project(&self, prob: &QpProblem, row: Row, d: &mut [f64]) {
        let n = self.n;
        match row {
            Row::General(i) => {
                let ai = &prob.a[i * n..(i + 1) * n];
                for (c, dc) in d.iter_mut().enumerate() {
                    *dc = dot(self.jcol(c), ai);
                }
            }
            Row::Lower(k) => {
                for (c, dc) in d.iter_mut().enumerate() {
                    *dc = self.j[c * n + k];
                }
            }
            Row::Upper(k) => {
                for (c, dc) in d.iter_mut().enumerate() {
                    *dc = -self.j[c * n + k];
                }
            }
        }
    }

    fn add(&mut self, d: &mut [f64]) {
        let n = self.n;
        for c in (self.q + 1..n).rev() {
            let (c_, s_) = givens(d[c - 1], d[c]);
            if s_ == 0.0 {
                continue;
            }
            d[c - 1] = c_ * d[c - 1] + s_ * d[c];
            d[c] = 0.0;
            self.rotate_j_columns(c - 1, c, c_, s_);
        }
        let q = self.q;
        for k in 0..=q {
            self.r[q * n + k] = d[k];
        }
        self.q += 1;
    }

    fn drop(&mut self, l: usize) {
        let n = self.n;
        let q = self.q;
        for col in l..q - 1 {
            for k in 0..=col + 1 {
                self.r[col * n + k] = self.r[(col + 1) * n + k];
            }
        }
        for col in l..q - 1 {
            let (c_, s_) = givens(self.r[col * n + col], self.r[col * n + col + 1]);
            if s_ != 0.0 {
                for cc in col..q - 1 {
                    let (x, y) = (self.r[cc * n + col], self.r[cc * n + col + 1]);
                    self.r[cc * n + col] = c_ * x + s_ * y;
                    self.r[cc * n + col + 1] = -s_ * x + c_ * y;
                }
                self.rotate_j_columns(col, col + 1, c_, s_);
            }
            self.r[col * n + col + 1] = 0.0;
        }
        self.q -= 1;
    }

    /// Solves `R r = d[..q]`.
    fn back_substitute(&self, d: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in (0..self.q).rev() {
            let mut v = d[i];
            for k in i + 1..self.q {
                v -= self.r[k * n + i] * out[k];
            }
            out[i] = v / self.r[i * n + i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rotation `(c, s)` with `[c s; −s c]·[a; b] = [ρ; 0]`.
fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0);
    }
    let h = a.hypot(b);
    (a / h, b / h)
}

pub fn solve_qp(prob: &QpProblem) -> Result<QpSolution> {
    let n = prob.gradient.len();
    let m = prob.b.len();
    if prob.hessian.nrows() != n || prob.hessian.ncols() != n || prob.a.len() != m * n {
        return Err(Error::InvalidArgument("QP dimensions disagree".into()));
    }
    let chol = prob
        .hessian
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("QP Hessian".into()))?;
    let l = chol.l();
    // J = L⁻ᵀ
    let jm = l.transpose().solve_upper_triangular(&DMatrix::identity(n, n)).ok_or_else(|| Error::NotPositiveDefinite("QP Hessian".into()))?;
    let mut ws = Workspace { n, j: jm.as_slice().to_vec(), r: vec![0.0; n * n], q: 0 };

    // unconstrained minimum x = −J Jᵀ g
    let jt_g: Vec<f64> = (0..n).map(|c| dot(ws.jcol(c), prob.gradient.as_slice())).collect();
    let mut x = vec![0.0; n];
    for c in 0..n {
        for k in 0..n {
            x[k] -= ws.j[c * n + k] * jt_g[c];
        }
    }

    let norms: Vec<f64> = (0..m).map(|i| dot(&prob.a[i * n..(i + 1) * n], &prob.a[i * n..(i + 1) * n]).sqrt()).collect();
    let mut active: Vec<Row> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active_g = vec![false; m];
    let mut is_active_l = vec![false; n];
    let mut is_active_u = vec![false; n];
    let mut d = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut rr = vec![0.0; n];
    let max_iter = 20 * (m + 2 * n) + 100;
    let mut iterations = 0;

    let slack = |row: Row, x: &[f64]| -> f64 {
        match row {
            Row::General(i) => dot(&prob.a[i * n..(i + 1) * n], x) - prob.b[i],
            Row::Lower(k) => x[k] - prob.lower.unwrap()[k],
            Row::Upper(k) => prob.upper.unwrap()[k] - x[k],
        }
    };

    loop {
        // most violated constraint, scaled by its normal length
        let mut worst: Option<(Row, f64)> = None;
        let mut consider = |row: Row, s: f64, scale: f64, tol_ref: f64| {
            if s < -1e-11 * (1.0 + tol_ref.abs()) {
                let v = s / scale;
                if worst.is_none_or(|(_, w)| v < w) {
                    worst = Some((row, v));
                }
            }
        };
        for i in 0..m {
            if !is_active_g[i] && norms[i] > 0.0 {
                consider(Row::General(i), slack(Row::General(i), &x), norms[i], prob.b[i]);
            }
        }
        if let Some(lb) = prob.lower {
            for k in 0..n {
                if !is_active_l[k] {
                    consider(Row::Lower(k), x[k] - lb[k], 1.0, lb[k]);
                }
            }
        }
        if let Some(ub) = prob.upper {
            for k in 0..n {
                if !is_active_u[k] {
                    consider(Row::Upper(k), ub[k] - x[k], 1.0, ub[k]);
                }
            }
        }
        let Some((p, _)) = worst else { break };
        let mut u_p = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::Solver("QP iteration limit reached".into()));
            }
            ws.project(prob, p, &mut d);
            let q = ws.q;
            // primal direction z = J₂ d₂, dual direction r = R⁻¹ d₁
            z.iter_mut().for_each(|v| *v = 0.0);
            for c in q..n {
                let jc = &ws.j[c * n..(c + 1) * n];
                for k in 0..n {
                    z[k] += jc[k] * d[c];
                }
            }
            ws.back_substitute(&d, &mut rr);
            let d2: f64 = d[q..].iter().map(|v| v * v).sum();
            let dd: f64 = d.iter().map(|v| v * v).sum();

            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for k in 0..q {
                if rr[k] > 0.0 {
                    let t = u[k] / rr[k];
                    if t < t1 {
                        t1 = t;
                        drop_at = Some(k);
                    }
                }
            }
            let full_step = d2 > 1e-14 * dd;
            let t2 = if full_step { -slack(p, &x) / d2 } else { f64::INFINITY };

            if !full_step {
                let Some(l) = drop_at else {
                    return Err(Error::QpInfeasible);
                };
                for k in 0..q {
                    u[k] -= t1 * rr[k];
                }
                u_p += t1;
                deactivate(&mut active, &mut u, &mut is_active_g, &mut is_active_l, &mut is_active_u, l);
                ws.drop(l);
                continue;
            }

            let t = t1.min(t2);
            for k in 0..n {
                x[k] += t * z[k];
            }
            for k in 0..q {
                u[k] -= t * rr[k];
            }
            u_p += t;
            if t2 <= t1 {
                ws.add(&mut d);
                active.push(p);
                u.push(u_p);
                match p {
                    Row::General(i) => is_active_g[i] = true,
                    Row::Lower(k) => is_active_l[k] = true,
                    Row::Upper(k) => is_active_u[k] = true,
                }
                break;
            }
            let l = drop_at.expect("finite t1 has an index");
            deactivate(&mut active, &mut u, &mut is_active_g, &mut is_active_l, &mut is_active_u, l);
            ws.drop(l);
        }
    }

    let mut multipliers = vec![0.0; m];
    let mut lower_multipliers = vec![0.0; n];
    let mut upper_multipliers = vec![0.0; n];
    for (row, &mu) in active.iter().zip(&u) {
        match *row {
            Row::General(i) => multipliers[i] = mu,
            Row::Lower(k) => lower_multipliers[k] = mu,
            Row::Upper(k) => upper_multipliers[k] = mu,
        }
    }
    let xv = DVector::from_vec(x);
    let objective = 0.5 * xv.dot(&(prob.hessian * &xv)) + prob.gradient.dot(&xv);
    Ok(QpSolution { x: xv, multipliers, lower_multipliers, upper_multipliers, objective, iterations })
}

fn deactivate(active: &mut Vec<Row>, u: &mut Vec<f64>, g: &mut [bool], lo: &mut [bool], up: &mut [bool], l: usize) {
    match active.remove(l) {
        Row::General(i) => g[i] = false,
        Row::Lower(k) => lo[k] = false,
        Row::Upper(k) => up[k] = false,
    }
    u.remove(l);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Enumerates active sets of a small QP and returns the KKT point.
    fn brute_force(h: &DMatrix<f64>, g: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
        let (m, n) = (a.nrows(), a.ncols());
        let mut best: Option<(f64, DVector<f64>)> = None;
        for mask in 0u32..(1 << m) {
            let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let k = rows.len();
            if k > n {
                continue;
            }
            let mut kkt = DMatrix::zeros(n + k, n + k);
            let mut rhs = DVector::zeros(n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(h);
            rhs.rows_mut(0, n).copy_from(&(-g));
            for (c, &i) in rows.iter().enumerate() {
                for j in 0..n {
                    kkt[(j, n + c)] = -a[(i, j)];
                    kkt[(n + c, j)] = a[(i, j)];
                }
                rhs[n + c] = b[i];
            }
            let Some(sol) = kkt.lu().solve(&rhs) else { continue };
            let x = sol.rows(0, n).into_owned();
            let feasible = (a * &x - b).iter().all(|v| *v >= -1e-9);
            let duals_ok = sol.rows(n, k).iter().all(|v| *v >= -1e-9);
            if feasible && duals_ok {
                let f = 0.5 * x.dot(&(h * &x)) + g.dot(&x);
                if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                    best = Some((f, x));
                }
            }
        }
        best.map(|(_, x)| x)
    }

    #[test]
    fn matches_active_set_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(1..=6);
            let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let h = &f * f.transpose() + DMatrix::identity(n, n) * 0.1;
            let g = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            // feasible by construction around a random point
            let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let b = &a * &x0 - DVector::from_fn(m, |_, _| rng.random_range(0.0..0.5));
            let a_rows: Vec<f64> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect();
            let sol = solve_qp(&QpProblem { hessian: &h, gradient: &g, a: &a_rows, b: b.as_slice(), lower: None, upper: None }).unwrap();
            let oracle = brute_force(&h, &g, &a, &b).expect("feasible QP has a KKT point");
            assert!((&sol.x - &oracle).amax() < 1e-8, "x {} vs {}", sol.x, oracle);
        }
    }

    #[test]
    fn bounds_act_like_rows() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-3.0, 1.0]);
        let sol = solve_qp(&QpProblem { hessian: &h, gradient: &g, a: &[], b: &[], lower: Some(&[-0.5, -0.5]), upper: Some(&[1.0, 1.0]) }).unwrap();
        assert_eq!(sol.x.as_slice(), &[1.0, -0.5]);
        assert!((sol.upper_multipliers[0] - 2.0).abs() < 1e-14);
        assert!((sol.lower_multipliers[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn duplicate_rows_are_handled() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![1.0, 1.0]);
        let a = [1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 0.0, 1.0];
        let b = [1.0, 1.0, 2.0, -5.0];
        let sol = solve_qp(&QpProblem { hessian: &h, gradient: &g, a: &a, b: &b, lower: None, upper: None }).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let h = DMatrix::identity(1, 1);
        let g = DVector::from_vec(vec![0.0]);
        let a = [1.0, -1.0];
        let b = [1.0, 0.0];
        let r = solve_qp(&QpProblem { hessian: &h, gradient: &g, a: &a, b: &b, lower: None, upper: None });
        assert!(matches!(r, Err(Error::QpInfeasible)));
    }
}
