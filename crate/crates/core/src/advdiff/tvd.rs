//! Total-variation experiments on periodic 1D advection of a square wave.

use serde::Serialize;

use crate::advdiff::operators::{AdvectionScheme, Velocity};
use crate::advdiff::simulate::{CourantNumbers, TransportProblem, TransportSystem};
use crate::elliptic::CgSettings;
use crate::error::{Error, Result};
use crate::grid::{GridField, VerticalBc};
use crate::linear::Stencil;
use crate::monotonicity::radius;
use crate::stepper::step;
use crate::tableau::AdditiveTableau;

/// Unit-speed advection of `c = 1` on the second quarter of a periodic
/// line of `n` cells, `dx = 1/n`, no diffusion.
pub fn step_advection_problem(n: usize) -> Result<TransportProblem> {
    let c = GridField::from_fn(n, 1, 1.0, 1.0, VerticalBc::Periodic, |x, _| if (0.25..0.5).contains(&x) { 1.0 } else { 0.0 })?;
    let t = GridField { values: vec![0.0; n], ..c.clone() };
    Ok(TransportProblem {
        velocity: Velocity::uniform(&c, 1.0, 0.0)?,
        temperature: t,
        concentration: c,
        kappa_t: 0.0,
        kappa_c: 0.0,
        courant: CourantNumbers::default(),
        eta_over_rho: 0.0,
        gravity: 0.0,
    })
}

/// TV of `c` before the first step and after each of `steps` steps of size `dt`.
pub fn tv_history(
    problem: &TransportProblem,
    method: &AdditiveTableau,
    advection: AdvectionScheme,
    dt: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let sys = TransportSystem { problem, advection, stencil: Stencil::ThreePoint, cg: CgSettings::default() };
    let n = problem.temperature.len();
    let mut y: Vec<f64> = problem.temperature.values.iter().chain(&problem.concentration.values).copied().collect();
    let tv = |y: &[f64]| GridField { values: y[n..].to_vec(), ..problem.concentration.clone() }.total_variation();
    let mut out = vec![tv(&y)];
    for k in 0..steps {
        y = step(method, &sys, k as f64 * dt, &y, dt)?.y_new;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        out.push(tv(&y));
    }
    Ok(out)
}

/// Largest single-step TV increase (negative when TV strictly decreases).
pub fn max_tv_increase(history: &[f64]) -> f64 {
    history.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Whether no step increases TV by more than `tol`.
pub fn is_tv_nonincreasing(history: &[f64], tol: f64) -> bool {
    history.windows(2).all(|w| w[1] <= w[0] + tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvdSettings {
    pub cells: usize,
    pub steps: usize,
    pub tol: f64,
    pub advection: AdvectionScheme,
}

impl Default for TvdSettings {
    fn default() -> Self {
        Self { cells: 200, steps: 500, tol: 1e-12, advection: AdvectionScheme::Eno2 }
    }
}

/// Largest forward-Euler Courant number keeping the run TV non-increasing:
/// scanned upward in steps of 0.01 from 0.01 to 2, the first failure refined
/// by bisection to 1e-4.
pub fn empirical_fe_courant_limit(s: &TvdSettings) -> Result<f64> {
    let p = step_advection_problem(s.cells)?;
    let fe = AdditiveTableau::from_plain(
        &crate::tableau::RKTableau::from_fractions(&[&[(0, 1)]], &[(1, 1)])?,
        "forward_euler",
    )?;
    let dx = p.concentration.dx;
    let ok = |cfl: f64| {
        tv_history(&p, &fe, s.advection, cfl * dx, s.steps).map(|h| is_tv_nonincreasing(&h, s.tol)).unwrap_or(false)
    };
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=200 {
        let c = k as f64 * 0.01;
        if !ok(c) {
            hi = Some(c);
            break;
        }
        lo = c;
    }
    let Some(mut hi) = hi else { return Ok(lo) };
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// The step `R(A)·τ_FE` up to which the method is expected to stay TVD,
/// with `R(A)` the radius of absolute monotonicity of the explicit part.
pub fn ssp_step_bound(method: &AdditiveTableau, fe_courant: f64, dx: f64) -> f64 {
    radius(method.explicit_part(), 10.0) * fe_courant * dx
}

#[derive(Debug, Clone, Serialize)]
pub struct TvdScanRow {
    pub scheme: String,
    pub courant: f64,
    pub max_tv_increase: f64,
    pub nonincreasing: bool,
}

/// TV behaviour of `method` at each Courant number in `courants`.
pub fn tvd_scan(method: &AdditiveTableau, courants: &[f64], s: &TvdSettings) -> Result<Vec<TvdScanRow>> {
    let p = step_advection_problem(s.cells)?;
    let dx = p.concentration.dx;
    courants
        .iter()
        .map(|&c| {
            let h = tv_history(&p, method, s.advection, c * dx, s.steps)?;
            Ok(TvdScanRow {
                scheme: method.label().to_string(),
                courant: c,
                max_tv_increase: max_tv_increase(&h),
                nonincreasing: is_tv_nonincreasing(&h, s.tol),
            })
        })
        .collect()
}
