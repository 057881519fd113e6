//! Cartesian impedance law `M(r̈ − r̈_d) + D(ṙ − ṙ_d) + K(r − r_d) = f_e`.
//!
//! Coordinates are six-dimensional task coordinates: position followed by a
//! rotation vector. Axes flagged rigid track the reference exactly, which is
//! the limit of infinite stiffness on that axis.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Vec6 = Vector6<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceParams {
    pub mass: Matrix6<f64>,
    pub damping: Matrix6<f64>,
    pub stiffness: Matrix6<f64>,
    /// Axes that follow the reference exactly.
    pub rigid: [bool; 6],
}

impl ImpedanceParams {
    pub fn diagonal(mass: [f64; 6], damping: [f64; 6], stiffness: [f64; 6], rigid: [bool; 6]) -> Self {
        ImpedanceParams {
            mass: Matrix6::from_diagonal(&Vec6::from(mass)),
            damping: Matrix6::from_diagonal(&Vec6::from(damping)),
            stiffness: Matrix6::from_diagonal(&Vec6::from(stiffness)),
            rigid,
        }
    }

    /// Translational `M = 5 kg`, `D = 80 N·s/m`, `K = 700 N/m`, rotational
    /// counterparts scaled by one tenth.
    pub fn default_gains(rigid: [bool; 6]) -> Self {
        Self::diagonal([5.0, 5.0, 5.0, 0.5, 0.5, 0.5], [80.0, 80.0, 80.0, 8.0, 8.0, 8.0], [700.0, 700.0, 700.0, 70.0, 70.0, 70.0], rigid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("mass", &self.mass), ("damping", &self.damping), ("stiffness", &self.stiffness)] {
            if !m.iter().all(|v| v.is_finite()) {
                return Err(invalid(format!("{name} matrix has non-finite entries")));
            }
            if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
                return Err(invalid(format!("{name} matrix must be symmetric")));
            }
        }
        let compliant = self.compliant_axes();
        if !compliant.is_empty() {
            let m = self.mass.select_rows(&compliant).select_columns(&compliant);
            if m.cholesky().is_none() {
                return Err(Error::NotPositiveDefinite("impedance mass on the compliant axes".into()));
            }
        }
        Ok(())
    }

    fn compliant_axes(&self) -> Vec<usize> {
        (0..6).filter(|&i| !self.rigid[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpedanceState {
    pub r: Vec6,
    pub rdot: Vec6,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpedanceReference {
    pub r: Vec6,
    pub rdot: Vec6,
    pub rddot: Vec6,
}

impl ImpedanceReference {
    pub fn fixed(r: Vec6) -> Self {
        ImpedanceReference { r, ..Default::default() }
    }

    /// Constant-acceleration extrapolation `s` seconds ahead.
    pub fn advanced(&self, s: f64) -> Self {
        ImpedanceReference {
            r: self.r + self.rdot * s + self.rddot * (0.5 * s * s),
            rdot: self.rdot + self.rddot * s,
            rddot: self.rddot,
        }
    }
}

/// Acceleration commanded by the impedance law. Rigid axes take the reference acceleration.
pub fn impedance_accel(state: &ImpedanceState, reference: &ImpedanceReference, f_e: &Vec6, params: &ImpedanceParams) -> Result<Vec6> {
    params.validate()?;
    Ok(accel_unchecked(state, reference, f_e, params))
}

fn accel_unchecked(state: &ImpedanceState, reference: &ImpedanceReference, f_e: &Vec6, params: &ImpedanceParams) -> Vec6 {
    let e = state.r - reference.r;
    let edot = state.rdot - reference.rdot;
    let mut out = reference.rddot;
    let axes = params.compliant_axes();
    if axes.is_empty() {
        return out;
    }
    if axes.len() == 6 {
        let rhs = f_e - params.damping * edot - params.stiffness * e;
        let sol = params.mass.cholesky().expect("validated").solve(&rhs);
        return out + sol;
    }
    // rigid axes hold zero error, so only the compliant block enters
    let n = axes.len();
    let m = DMatrix::from_fn(n, n, |i, j| params.mass[(axes[i], axes[j])]);
    let rhs = DVector::from_fn(n, |i, _| {
        let row = axes[i];
        let mut v = f_e[row];
        for &col in &axes {
            v -= params.damping[(row, col)] * edot[col] + params.stiffness[(row, col)] * e[col];
        }
        v
    });
    let sol = m.cholesky().expect("validated").solve(&rhs);
    for (i, &ax) in axes.iter().enumerate() {
        out[ax] += sol[i];
    }
    out
}

/// Advances the impedance dynamics by `dt` with classical RK4. The reference
/// is extrapolated at constant acceleration and `f_e` is held over the step.
pub fn impedance_step(
    state: &ImpedanceState,
    reference: &ImpedanceReference,
    f_e: &Vec6,
    params: &ImpedanceParams,
    dt: f64,
) -> Result<ImpedanceState> {
    params.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("time step must be positive"));
    }
    let deriv = |s: &ImpedanceState, t: f64| -> (Vec6, Vec6) {
        (s.rdot, accel_unchecked(s, &reference.advanced(t), f_e, params))
    };
    let add = |s: &ImpedanceState, k: &(Vec6, Vec6), h: f64| ImpedanceState { r: s.r + k.0 * h, rdot: s.rdot + k.1 * h };
    let k1 = deriv(state, 0.0);
    let k2 = deriv(&add(state, &k1, dt / 2.0), dt / 2.0);
    let k3 = deriv(&add(state, &k2, dt / 2.0), dt / 2.0);
    let k4 = deriv(&add(state, &k3, dt), dt);
    let mut next = ImpedanceState {
        r: state.r + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (dt / 6.0),
        rdot: state.rdot + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (dt / 6.0),
    };
    let end = reference.advanced(dt);
    for i in 0..6 {
        if params.rigid[i] {
            next.r[i] = end.r[i];
            next.rdot[i] = end.rdot[i];
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(m: f64, d: f64, k: f64) -> ImpedanceParams {
        ImpedanceParams::diagonal([m; 6], [d; 6], [k; 6], [false; 6])
    }

    fn run(state: ImpedanceState, reference: ImpedanceReference, f: Vec6, p: &ImpedanceParams, dt: f64, t_end: f64) -> Vec<(f64, ImpedanceState)> {
        let n = (t_end / dt).round() as usize;
        let mut s = state;
        let mut out = vec![(0.0, s)];
        for k in 1..=n {
            s = impedance_step(&s, &reference, &f, p, dt).unwrap();
            out.push((k as f64 * dt, s));
        }
        out
    }

    #[test]
    fn critically_damped_step_response() {
        let p = scalar(1.0, 2.0, 1.0);
        let reference = ImpedanceReference::fixed(Vec6::repeat(1.0));
        let trace = run(ImpedanceState::default(), reference, Vec6::zeros(), &p, 1e-4, 5.0);
        let worst = trace
            .iter()
            .map(|(t, s)| (s.r[0] - (1.0 - (1.0 + t) * (-t).exp())).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst deviation {worst:e}");
    }

    #[test]
    fn undamped_oscillator_reaches_minus_one_at_pi() {
        let p = scalar(1.0, 0.0, 1.0);
        let start = ImpedanceState { r: Vec6::repeat(1.0), rdot: Vec6::zeros() };
        let dt = std::f64::consts::PI / 31416.0;
        let trace = run(start, ImpedanceReference::default(), Vec6::zeros(), &p, dt, std::f64::consts::PI);
        assert_abs_diff_eq!(trace.last().unwrap().1.r[0], -1.0, epsilon = 1e-3);
    }

    #[test]
    fn lateral_push_settles_at_force_over_stiffness() {
        let p = ImpedanceParams::default_gains([false; 6]);
        let mut f = Vec6::zeros();
        f[1] = -35.0;
        let trace = run(ImpedanceState::default(), ImpedanceReference::default(), f, &p, 1e-3, 10.0);
        assert_abs_diff_eq!(trace.last().unwrap().1.r[1], -0.05, epsilon = 1e-4);
    }

    #[test]
    fn rigid_axes_copy_reference() {
        let p = ImpedanceParams::default_gains([true, false, false, false, false, true]);
        let reference = ImpedanceReference { r: Vec6::repeat(0.2), rdot: Vec6::repeat(0.1), rddot: Vec6::zeros() };
        let f = Vec6::from([50.0, -35.0, 3.0, 1.0, -2.0, 9.0]);
        let s = impedance_step(&ImpedanceState::default(), &reference, &f, &p, 1e-3).unwrap();
        assert_eq!(s.r[0], reference.advanced(1e-3).r[0]);
        assert_eq!(s.r[5], reference.advanced(1e-3).r[5]);
        assert!(s.r[1] != reference.advanced(1e-3).r[1]);
    }

    #[test]
    fn singular_mass_is_rejected() {
        let p = ImpedanceParams::diagonal([5.0, 0.0, 5.0, 1.0, 1.0, 1.0], [1.0; 6], [1.0; 6], [false; 6]);
        let err = impedance_accel(&ImpedanceState::default(), &ImpedanceReference::default(), &Vec6::zeros(), &p);
        assert!(matches!(err, Err(Error::NotPositiveDefinite(_))));
        // the same mass is fine when the singular axis is rigid
        let mut q = p.clone();
        q.rigid[1] = true;
        assert!(impedance_accel(&ImpedanceState::default(), &ImpedanceReference::default(), &Vec6::zeros(), &q).is_ok());
    }
}
