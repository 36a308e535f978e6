//! Regions of absolute monotonicity of additive Runge-Kutta pairs.
//!
//! The pointwise test uses the extended arrays `Â = [[A, 0], [bᵀ, 0]]` and
//! `Ã̂ = [[Ã, 0], [b̃ᵀ, 0]]`: with `M = I + r·Â + r̃·Ã̂` the pair is absolutely
//! monotonic at `(r, r̃)` iff `M` is invertible and `M⁻¹Â`, `M⁻¹Ã̂` and
//! `M⁻¹𝟙` are componentwise nonnegative.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tableau::{AdditiveTableau, RKTableau, Scheme, DEFAULT_GAMMA};

/// Entries above this are treated as nonnegative.
const NONNEG_TOL: f64 = -1e-12;
const BISECT_TOL: f64 = 1e-12;
const CLOSED_FORM_SAMPLES: usize = 400;

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityRegion {
    /// Radius of absolute monotonicity of the explicit tableau, `R(A)`.
    pub radius_explicit: f64,
    /// Radius of absolute monotonicity of the implicit tableau, `R(Ã)`.
    pub radius_implicit: f64,
    /// Extent of the joint region along the `r` axis.
    pub joint_r_max: f64,
    /// Samples `(r, r̃)` of the curve of absolute monotonicity.
    pub boundary: Vec<(f64, f64)>,
    pub grid_step: f64,
}

impl MonotonicityRegion {
    /// Largest admissible `r̃` at `r`, linearly interpolated between samples;
    /// `None` outside `[0, joint_r_max]`.
    pub fn rtilde_at(&self, r: f64) -> Option<f64> {
        let pts = &self.boundary;
        if pts.is_empty() || r < pts[0].0 || r > pts[pts.len() - 1].0 {
            return None;
        }
        let k = pts.partition_point(|p| p.0 < r);
        if k == 0 {
            return Some(pts[0].1);
        }
        let (r0, y0) = pts[k - 1];
        let (r1, y1) = pts[k.min(pts.len() - 1)];
        if r1 == r0 {
            return Some(y0);
        }
        Some(y0 + (y1 - y0) * (r - r0) / (r1 - r0))
    }
}

fn extended(t: &RKTableau) -> DMatrix<f64> {
    let s = t.stages();
    let mut m = DMatrix::zeros(s + 1, s + 1);
    for i in 0..s {
        for j in 0..s {
            m[(i, j)] = t.a(i, j);
        }
        m[(s, i)] = t.b(i);
    }
    m
}

fn nonneg<'a>(m: impl IntoIterator<Item = &'a f64>) -> bool {
    m.into_iter().all(|&x| x >= NONNEG_TOL)
}

fn am_extended(parts: &[(&DMatrix<f64>, f64)]) -> bool {
    let n = parts[0].0.nrows();
    let mut m = DMatrix::<f64>::identity(n, n);
    for (e, scale) in parts {
        m += *e * *scale;
    }
    let Some(inv) = m.try_inverse() else {
        return false;
    };
    if inv.iter().any(|x| !x.is_finite()) {
        return false;
    }
    parts.iter().all(|(e, _)| nonneg(&(&inv * *e))) && nonneg(&(&inv * DVector::from_element(n, 1.0)))
}

/// Absolute monotonicity of the pair at `(r, r̃)`.
///
/// A singular `M` is reported as "not absolutely monotonic".
pub fn am_at_point(t: &AdditiveTableau, r: f64, rt: f64) -> bool {
    let a = extended(t.explicit_part());
    let at = extended(t.implicit_part());
    am_extended(&[(&a, r), (&at, rt)])
}

/// Absolute monotonicity of a single tableau at `r`.
pub fn am_single(t: &RKTableau, r: f64) -> bool {
    am_extended(&[(&extended(t), r)])
}

fn bisect_last_true(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> bool) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest `x` in `[0, max]` such that `f` holds on `[0, x]`, scanning in
/// increments of `step` and refining the crossing by bisection to `tol`.
fn largest_admissible(max: f64, step: f64, tol: f64, f: impl Fn(f64) -> bool) -> f64 {
    if !f(0.0) {
        return 0.0;
    }
    let n = (max / step).ceil() as usize;
    let mut prev = 0.0;
    for k in 1..=n {
        let x = (k as f64 * step).min(max);
        if !f(x) {
            return bisect_last_true(prev, x, tol, &f);
        }
        prev = x;
    }
    max
}

/// Radius of absolute monotonicity of a single tableau, searched up to `max`.
pub fn radius(t: &RKTableau, max: f64) -> f64 {
    largest_admissible(max, 0.01, BISECT_TOL, |r| am_single(t, r))
}

/// `R(Ã)` of the two-stage family as a function of `gamma`.
pub fn radius_implicit_gamma(gamma: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&gamma) || gamma.is_nan() {
        return Err(Error::GammaOutOfRange(gamma));
    }
    let g = gamma;
    if g <= 0.25 {
        return Ok(1.0 / (1.0 - 3.0 * g));
    }
    if g == DEFAULT_GAMMA {
        return Ok(1.0 + std::f64::consts::SQRT_2);
    }
    let d = 2.0 * g * g - 4.0 * g + 1.0;
    let root = ((4.0 * g - 1.0) / (d * d)).sqrt();
    if g < DEFAULT_GAMMA {
        Ok((1.0 - 2.0 * g) / d - root)
    } else {
        Ok((1.0 - 2.0 * g) / d + root)
    }
}

/// Regions printed in closed form for the three IMEX methods.
pub fn region_closed_form(scheme: Scheme, gamma: Option<f64>) -> Result<MonotonicityRegion> {
    let (radius_explicit, radius_implicit, r_max, phi): (f64, f64, f64, Box<dyn Fn(f64) -> f64>) =
        match scheme {
            Scheme::ImexSsp2_222 => {
                let g = gamma.unwrap_or(DEFAULT_GAMMA);
                let rt = radius_implicit_gamma(g)?;
                let r_max = if g <= 1.0 / 3.0 { 1.0 } else { (1.0 - 2.0 * g) / g };
                (1.0, rt, r_max, Box::new(move |r| (1.0 - r) / (1.0 - g)))
            }
            Scheme::ImexSsp2_332 if gamma.is_none() => (
                2.0,
                5.0 / 9.0 * (70f64.sqrt() - 4.0),
                1.0,
                Box::new(|r| {
                    0.25 * (-28.0 + 9.0 * r) + 0.25 * (1264.0 - 984.0 * r + 201.0 * r * r).sqrt()
                }),
            ),
            Scheme::ImexSsp3_333 if gamma.is_none() => (
                1.0,
                5.0 / 47.0 * (13.0 - 2.0 * 7f64.sqrt()),
                1.0,
                Box::new(|r| {
                    15.0 / 302.0 * (28.0 - 25.0 * r - (180.0 - 192.0 * r + 21.0 * r * r).sqrt())
                }),
            ),
            Scheme::ImexSsp2_332 | Scheme::ImexSsp3_333 => {
                return Err(Error::GammaNotAccepted(scheme.name().into()))
            }
            _ => return Err(Error::NoClosedForm(scheme.name().into())),
        };
    let n = CLOSED_FORM_SAMPLES;
    let boundary = (0..=n)
        .map(|k| {
            let r = r_max * k as f64 / n as f64;
            (r, phi(r).max(0.0))
        })
        .collect();
    Ok(MonotonicityRegion {
        radius_explicit,
        radius_implicit,
        joint_r_max: r_max,
        boundary,
        grid_step: r_max / n as f64,
    })
}

/// Numeric scan of the region with the pointwise criterion.
///
/// For each `r` on a grid of spacing `step` the largest `r̃` is located and
/// refined by bisection to `step / 100`. Radii come from each tableau alone.
pub fn region_numeric(t: &AdditiveTableau, r_max: f64, rt_max: f64, step: f64) -> Result<MonotonicityRegion> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("scan step must be positive, got {step}")));
    }
    let refine = step / 100.0;
    let radius_explicit = largest_admissible(r_max.max(rt_max) * 4.0, step, BISECT_TOL, |r| {
        am_single(t.explicit_part(), r)
    });
    let radius_implicit = largest_admissible(rt_max.max(r_max) * 4.0, step, BISECT_TOL, |r| {
        am_single(t.implicit_part(), r)
    });
    let joint_r_max = largest_admissible(r_max, step, BISECT_TOL, |r| am_at_point(t, r, 0.0));

    let n = (joint_r_max / step).floor() as usize;
    let mut rs: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    if rs.last().is_some_and(|&r| joint_r_max - r > BISECT_TOL) {
        rs.push(joint_r_max);
    }
    let boundary: Vec<(f64, f64)> = rs
        .par_iter()
        .map(|&r| (r, largest_admissible(rt_max, step, refine, |rt| am_at_point(t, r, rt))))
        .collect();
    Ok(MonotonicityRegion {
        radius_explicit,
        radius_implicit,
        joint_r_max,
        boundary,
        grid_step: step,
    })
}
