//! Convergence order and error constants on the nonlinear scalar problem
//! `y' = (1 + sin y) + (y² - sin y)`, `y(0) = 0`, with solution `tan t`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stepper::{newton_scalar, step, SplitSystem};
use crate::tableau::{builtin, Method, Scheme};

pub const T_END: f64 = 1.3;
pub const NEWTON_TOL: f64 = 1e-14;
pub const NEWTON_MAX_ITER: usize = 50;
/// Default refinement levels: `dt = 1.3 / 2^k`.
pub const DEFAULT_LEVELS: std::ops::RangeInclusive<u32> = 6..=12;
/// A fitted order further than this from the nominal one invalidates a report.
pub const ORDER_TOLERANCE: f64 = 0.3;

/// The test problem with `F = 1 + sin y` explicit and `G = y² - sin y` implicit.
#[derive(Debug, Clone, Copy, Default)]
pub struct TanProblem;

impl SplitSystem for TanProblem {
    type Scalar = f64;

    fn dimension(&self) -> usize {
        1
    }

    fn explicit_rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        out[0] = 1.0 + y[0].sin();
    }

    fn implicit_rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[0] * y[0] - y[0].sin();
    }

    fn solve_stage(&self, _t: f64, coeff: f64, rhs: &[f64], u: &mut [f64]) -> Result<usize> {
        let r = rhs[0];
        let (v, it) = newton_scalar(
            |v| v - coeff * (v * v - v.sin()) - r,
            |v| 1.0 - coeff * (2.0 * v - v.cos()),
            u[0],
            NEWTON_TOL,
            NEWTON_MAX_ITER,
        )?;
        u[0] = v;
        Ok(it)
    }
}

/// `|y_num(1.3) - tan(1.3)|` with constant step `dt`.
pub fn run_test_problem(method: &Method, dt: f64) -> Result<f64> {
    let n = (T_END / dt).round();
    if !(n >= 1.0) || (n * dt - T_END).abs() > 2.0 * f64::EPSILON * T_END {
        return Err(Error::InvalidArgument(format!("dt = {dt} does not divide {T_END}")));
    }
    let t = method.to_additive();
    let mut y = vec![0.0];
    for k in 0..n as usize {
        y = step(&t, &TanProblem, k as f64 * dt, &y, dt)?.y_new;
        if !y[0].is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
    }
    Ok((y[0] - T_END.tan()).abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub scheme: String,
    pub gamma: Option<f64>,
    pub nominal_order: u32,
    pub step_sizes: Vec<f64>,
    pub errors: Vec<f64>,
    /// Slope of the least-squares line through `(log dt, log error)`.
    pub fitted_order: f64,
    /// Root-mean-square residual of that line in `log error`.
    pub order_fit_residual: f64,
    /// `C` in `error ≈ C·dt^p` with `p` fixed at the nominal order, taken as
    /// the `dt → 0` intercept of `log(error/dt^p)` against `dt`.
    pub fitted_constant: f64,
    /// Slope `a` of that line, `error ≈ C·dt^p·(1 + a·dt)`.
    pub constant_drift: f64,
    pub valid: bool,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Fit `error ≈ C·dt^p` over `dt = 1.3/2^k`, `k` in `levels`.
pub fn fit_error_constant_levels(
    method: &Method,
    p: u32,
    levels: std::ops::RangeInclusive<u32>,
) -> Result<ConvergenceReport> {
    let step_sizes: Vec<f64> = levels.map(|k| T_END / 2f64.powi(k as i32)).collect();
    if step_sizes.len() < 2 {
        return Err(Error::InvalidArgument("need at least two step sizes".into()));
    }
    let errors = step_sizes
        .par_iter()
        .map(|&dt| run_test_problem(method, dt))
        .collect::<Result<Vec<f64>>>()?;
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidArgument(format!("error {e} is not positive; cannot fit on a log scale")));
    }
    let lx: Vec<f64> = step_sizes.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (fitted_order, _, order_fit_residual) = least_squares(&lx, &ly);
    // the leading pre-asymptotic term is O(dt); fitting it keeps C stable
    // when the refinement range changes
    let scaled: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - p as f64 * x).collect();
    let (constant_drift, log_c, _) = least_squares(&step_sizes, &scaled);
    Ok(ConvergenceReport {
        scheme: method.label().to_string(),
        gamma: method.gamma(),
        nominal_order: p,
        step_sizes,
        errors,
        fitted_order,
        order_fit_residual,
        fitted_constant: log_c.exp(),
        constant_drift,
        valid: (fitted_order - p as f64).abs() <= ORDER_TOLERANCE,
    })
}

pub fn fit_error_constant(method: &Method, p: u32) -> Result<ConvergenceReport> {
    fit_error_constant_levels(method, p, DEFAULT_LEVELS)
}

/// Reports for several built-in schemes at their nominal orders, in parallel.
pub fn convergence_study(schemes: &[(Scheme, Option<f64>)]) -> Result<Vec<ConvergenceReport>> {
    schemes
        .par_iter()
        .map(|&(s, g)| fit_error_constant(&builtin(s, g)?, s.nominal_order()))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaSweep {
    pub reports: Vec<ConvergenceReport>,
    /// `gamma` with the smallest fitted constant.
    pub argmin_gamma: f64,
    pub min_constant: f64,
}

/// Error constants of `imex_ssp2_222` for `gamma` in `[lo, hi]` at spacing `step`.
pub fn gamma_sweep(lo: f64, hi: f64, step: f64) -> Result<GammaSweep> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::InvalidArgument(format!("bad gamma range {lo}:{hi}:{step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let reports = (0..=n)
        .into_par_iter()
        .map(|k| {
            let g = lo + k as f64 * step;
            fit_error_constant(&builtin(Scheme::ImexSsp2_222, Some(g))?, 2)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = reports
        .iter()
        .min_by(|a, b| a.fitted_constant.total_cmp(&b.fitted_constant))
        .expect("non-empty sweep");
    Ok(GammaSweep {
        argmin_gamma: best.gamma.unwrap_or(f64::NAN),
        min_constant: best.fitted_constant,
        reports,
    })
}

/// One `scheme,gamma,dt,error` row per run.
pub fn write_csv<W: Write>(reports: &[ConvergenceReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "gamma", "dt", "error"])?;
    for r in reports {
        let g = r.gamma.map(|g| format!("{g:?}")).unwrap_or_default();
        for (dt, e) in r.step_sizes.iter().zip(&r.errors) {
            w.write_record([r.scheme.as_str(), g.as_str(), &format!("{dt:e}"), &format!("{e:e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: Scheme, g: Option<f64>) -> Method {
        builtin(s, g).unwrap()
    }

    #[test]
    fn halving_ratios() {
        let r = |s| {
            let mm = m(s, None);
            run_test_problem(&mm, T_END / 256.0).unwrap() / run_test_problem(&mm, T_END / 512.0).unwrap()
        };
        assert!((r(Scheme::Ssprk22) - 4.0).abs() < 0.2);
        assert!((r(Scheme::ImexSsp3_333) - 8.0).abs() < 0.5);
    }

    #[test]
    fn small_dt_is_accurate() {
        let e = run_test_problem(&m(Scheme::ImexSsp3_333, None), T_END / 4096.0).unwrap();
        assert!(e < 1e-9);
    }

    #[test]
    fn dt_must_divide_end_time() {
        assert!(run_test_problem(&m(Scheme::Ssprk22, None), 0.3).is_err());
    }

    #[test]
    fn orders_and_constants() {
        let rep = fit_error_constant(&m(Scheme::Ssprk33, None), 3).unwrap();
        assert!(rep.valid && (rep.fitted_order - 3.0).abs() < 0.15);
        assert_eq!(rep.step_sizes.len(), 7);
        let bad = fit_error_constant(&m(Scheme::Ssprk33, None), 2).unwrap();
        assert!(!bad.valid);
    }

    #[test]
    fn constant_is_stable_under_range_extension() {
        for s in Scheme::ALL {
            let (mm, p) = (m(s, None), s.nominal_order());
            let c = fit_error_constant(&mm, p).unwrap().fitted_constant;
            for lv in [5..=12, 6..=13] {
                let c2 = fit_error_constant_levels(&mm, p, lv).unwrap().fitted_constant;
                assert!((c2 / c - 1.0).abs() < 0.02, "{s}: {c} vs {c2}");
            }
        }
    }

    #[test]
    fn csv_rows() {
        let rep = fit_error_constant_levels(&m(Scheme::ImexSsp2_222, Some(0.24)), 2, 6..=7).unwrap();
        let mut buf = Vec::new();
        write_csv(&[rep], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scheme,gamma,dt,error");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("imex_ssp2_222,0.24,"));
    }
}
