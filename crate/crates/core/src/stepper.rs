//! One step of an additive Runge-Kutta method with a diagonally implicit part.
//!
//! Stage `i` solves `Y - dt·ã_ii·G(Y) = y + dt Σ_{j<i} (a_ij F_j + ã_ij G_j)`.

use nalgebra::ComplexField;

use crate::error::{Error, Result};
use crate::tableau::AdditiveTableau;

/// An ODE `y' = F(t, y) + G(t, y)` with `F` explicit and `G` implicit.
pub trait SplitSystem {
    type Scalar: ComplexField<RealField = f64> + Copy;

    fn dimension(&self) -> usize;

    fn explicit_rhs(&self, t: f64, y: &[Self::Scalar], out: &mut [Self::Scalar]);

    fn implicit_rhs(&self, t: f64, y: &[Self::Scalar], out: &mut [Self::Scalar]);

    /// Solve `u - coeff·G(t, u) = rhs`, with `u` holding the initial guess on
    /// entry. Returns the number of solver iterations.
    fn solve_stage(&self, t: f64, coeff: f64, rhs: &[Self::Scalar], u: &mut [Self::Scalar]) -> Result<usize>;

    /// Take `G(Y) = (Y - rhs)/coeff` after a stage solve instead of evaluating
    /// `G`. Worth it for stiff `G`, harmful when `coeff` is tiny relative to
    /// the solver tolerance.
    fn recover_implicit_from_stage(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord<S> {
    pub y_new: Vec<S>,
    pub stage_values: Vec<Vec<S>>,
    pub f_evals: usize,
    pub g_evals: usize,
    pub g_solves: usize,
    pub solver_iterations: usize,
}

fn axpy<S: ComplexField<RealField = f64> + Copy>(y: &mut [S], a: f64, x: &[S]) {
    if a != 0.0 {
        let a = S::from_real(a);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * *xi;
        }
    }
}

/// Advance `y` from `t` by `dt`.
pub fn step<Sys: SplitSystem>(
    t: &AdditiveTableau,
    sys: &Sys,
    time: f64,
    y: &[Sys::Scalar],
    dt: f64,
) -> Result<StepRecord<Sys::Scalar>> {
    let n = sys.dimension();
    if y.len() != n {
        return Err(Error::Shape(format!("state has length {}, system dimension {n}", y.len())));
    }
    let (ex, im) = (t.explicit_part(), t.implicit_part());
    let s = t.stages();
    let zero = Sys::Scalar::from_real(0.0);
    let mut f: Vec<Vec<Sys::Scalar>> = Vec::with_capacity(s);
    let mut g: Vec<Vec<Sys::Scalar>> = Vec::with_capacity(s);
    let mut stage_values = Vec::with_capacity(s);
    let (mut f_evals, mut g_evals, mut g_solves, mut iters) = (0, 0, 0, 0);

    for i in 0..s {
        let mut rhs = y.to_vec();
        for j in 0..i {
            axpy(&mut rhs, dt * ex.a(i, j), &f[j]);
            axpy(&mut rhs, dt * im.a(i, j), &g[j]);
        }
        let coeff = dt * im.a(i, i);
        let t_imp = time + im.c(i) * dt;
        let mut yi = rhs.clone();
        let mut gi = vec![zero; n];
        if coeff != 0.0 {
            iters += sys
                .solve_stage(t_imp, coeff, &rhs, &mut yi)
                .map_err(|e| match e {
                    Error::StageSolve { msg, .. } => Error::StageSolve { stage: i, msg },
                    other => Error::StageSolve { stage: i, msg: other.to_string() },
                })?;
            g_solves += 1;
            if sys.recover_implicit_from_stage() {
                let inv = Sys::Scalar::from_real(1.0 / coeff);
                for k in 0..n {
                    gi[k] = (yi[k] - rhs[k]) * inv;
                }
            } else {
                sys.implicit_rhs(t_imp, &yi, &mut gi);
                g_evals += 1;
            }
        } else {
            sys.implicit_rhs(t_imp, &yi, &mut gi);
            g_evals += 1;
        }
        let mut fi = vec![zero; n];
        sys.explicit_rhs(time + ex.c(i) * dt, &yi, &mut fi);
        f_evals += 1;
        f.push(fi);
        g.push(gi);
        stage_values.push(yi);
    }

    let mut y_new = y.to_vec();
    for j in 0..s {
        axpy(&mut y_new, dt * ex.b(j), &f[j]);
        axpy(&mut y_new, dt * im.b(j), &g[j]);
    }
    Ok(StepRecord { y_new, stage_values, f_evals, g_evals, g_solves, solver_iterations: iters })
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub y: Vec<S>,
    pub time: f64,
    pub steps: usize,
    pub f_evals: usize,
    pub g_solves: usize,
}

/// Constant steps of `dt` from `t0` to `t_end`, shortening the last one.
pub fn integrate<Sys: SplitSystem>(
    t: &AdditiveTableau,
    sys: &Sys,
    y0: &[Sys::Scalar],
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory<Sys::Scalar>> {
    if !(dt > 0.0) || !(t_end >= t0) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and t_end >= t0, got dt={dt}")));
    }
    let mut out = Trajectory { y: y0.to_vec(), time: t0, steps: 0, f_evals: 0, g_solves: 0 };
    let eps = 1e-12 * dt;
    while out.time < t_end - eps {
        let h = dt.min(t_end - out.time);
        let rec = step(t, sys, out.time, &out.y, h)?;
        out.y = rec.y_new;
        out.steps += 1;
        out.f_evals += rec.f_evals;
        out.g_solves += rec.g_solves;
        out.time = if t_end - out.time - h <= eps { t_end } else { out.time + h };
        if out.y.iter().any(|v| !v.real().is_finite() || !v.imaginary().is_finite()) {
            return Err(Error::NonFinite { step: out.steps });
        }
    }
    Ok(out)
}

/// Newton's method for a scalar equation `h(u) = 0`, halving the step while
/// the residual grows.
pub fn newton_scalar(
    h: impl Fn(f64) -> f64,
    dh: impl Fn(f64) -> f64,
    guess: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, usize)> {
    let mut u = guess;
    let mut r = h(u);
    for it in 0..max_iter {
        if r.abs() <= tol * (1.0 + u.abs()) {
            return Ok((u, it));
        }
        let d = dh(u);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::StageSolve { stage: 0, msg: format!("zero derivative at u = {u}") });
        }
        let delta = r / d;
        let mut lambda = 1.0;
        loop {
            let cand = u - lambda * delta;
            let rc = h(cand);
            if rc.abs() < r.abs() || lambda < 1e-6 {
                u = cand;
                r = rc;
                break;
            }
            lambda *= 0.5;
        }
        if delta.abs() <= f64::EPSILON * (1.0 + u.abs()) && r.abs() <= 1e3 * tol * (1.0 + u.abs()) {
            return Ok((u, it + 1));
        }
    }
    if r.abs() <= tol * (1.0 + u.abs()) {
        return Ok((u, max_iter));
    }
    Err(Error::StageSolve { stage: 0, msg: format!("Newton residual {r:.3e} after {max_iter} iterations") })
}

/// The split linear test equation `u' = iβu + αu`.
#[derive(Debug, Clone, Copy)]
pub struct LinearTestSystem {
    pub alpha: f64,
    pub beta: f64,
}

impl SplitSystem for LinearTestSystem {
    type Scalar = num_complex::Complex64;

    fn dimension(&self) -> usize {
        1
    }

    fn explicit_rhs(&self, _t: f64, y: &[Self::Scalar], out: &mut [Self::Scalar]) {
        out[0] = y[0] * num_complex::Complex64::new(0.0, self.beta);
    }

    fn implicit_rhs(&self, _t: f64, y: &[Self::Scalar], out: &mut [Self::Scalar]) {
        out[0] = y[0] * self.alpha;
    }

    fn solve_stage(&self, _t: f64, coeff: f64, rhs: &[Self::Scalar], u: &mut [Self::Scalar]) -> Result<usize> {
        let d = 1.0 - coeff * self.alpha;
        if d == 0.0 {
            return Err(Error::StageSolve { stage: 0, msg: "singular stage equation".into() });
        }
        u[0] = rhs[0] / d;
        Ok(1)
    }
}
