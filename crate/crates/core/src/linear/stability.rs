//! Stability functions on the split linear test equation and scans of the
//! resulting stability regions.
//!
//! For an additive pair the real part of `z` feeds the implicit field
//! `G(u) = αu` and the imaginary part the explicit field `F(u) = iβu`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tableau::{AdditiveTableau, Method, RKTableau, Scheme};

/// Something with a stability function `R(z)`.
pub trait StabilityFunction {
    /// `R(z)`; a singular stage matrix yields a value of infinite modulus.
    fn stability_value(&self, z: Complex64) -> Complex64;
}

fn pole() -> Complex64 {
    Complex64::new(f64::INFINITY, 0.0)
}

fn solve_stages(m: DMatrix<Complex64>) -> Option<DVector<Complex64>> {
    let n = m.nrows();
    let y = m.lu().solve(&DVector::from_element(n, Complex64::new(1.0, 0.0)))?;
    y.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(y)
}

fn weighted(b: &[f64], y: &DVector<Complex64>) -> Complex64 {
    b.iter().zip(y.iter()).map(|(w, v)| v * *w).sum()
}

impl StabilityFunction for RKTableau {
    fn stability_value(&self, z: Complex64) -> Complex64 {
        let a = self.a_matrix().map(|x| Complex64::new(x, 0.0));
        let m = DMatrix::identity(self.stages(), self.stages()) - a * z;
        match solve_stages(m) {
            Some(y) => Complex64::new(1.0, 0.0) + z * weighted(self.weights(), &y),
            None => pole(),
        }
    }
}

impl StabilityFunction for AdditiveTableau {
    fn stability_value(&self, z: Complex64) -> Complex64 {
        let s = self.stages();
        let explicit = Complex64::new(0.0, z.im);
        let implicit = Complex64::new(z.re, 0.0);
        let a = self.explicit_part().a_matrix().map(|x| Complex64::new(x, 0.0));
        let at = self.implicit_part().a_matrix().map(|x| Complex64::new(x, 0.0));
        let m = DMatrix::identity(s, s) - a * explicit - at * implicit;
        match solve_stages(m) {
            Some(y) => {
                Complex64::new(1.0, 0.0)
                    + explicit * weighted(self.explicit_part().weights(), &y)
                    + implicit * weighted(self.implicit_part().weights(), &y)
            }
            None => pole(),
        }
    }
}

impl StabilityFunction for Method {
    fn stability_value(&self, z: Complex64) -> Complex64 {
        match self {
            Method::Additive(t) => t.stability_value(z),
            Method::Plain { tableau, .. } => tableau.stability_value(z),
        }
    }
}

/// `R(z)` evaluated through the stage matrices.
pub fn stability_value(t: &impl StabilityFunction, z: Complex64) -> Complex64 {
    t.stability_value(z)
}

/// The printed rational stability functions of the implicit parts of the
/// three IMEX methods (default `gamma` for `imex_ssp2_222`).
pub fn implicit_stability_closed_form(scheme: Scheme, z: Complex64) -> Result<Complex64> {
    let sqrt2 = std::f64::consts::SQRT_2;
    let (num, den) = match scheme {
        Scheme::ImexSsp2_222 => {
            let d = -z + 2.0 + sqrt2;
            (2.0 * (1.0 + sqrt2) * (z + 1.0 + sqrt2), d * d)
        }
        Scheme::ImexSsp2_332 => {
            let d = z - 5.0;
            (-150.0 - 40.0 * z + 9.0 * z * z, 2.0 * d * d * (z - 3.0))
        }
        Scheme::ImexSsp3_333 => {
            let d = z - 15.0;
            (450.0 + 390.0 * z + 167.0 * z * z + 47.0 * z * z * z, 2.0 * d * d)
        }
        _ => return Err(Error::NoClosedForm(scheme.name().into())),
    };
    if den == Complex64::new(0.0, 0.0) {
        return Err(Error::Pole { re: z.re, im: z.im });
    }
    Ok(num / den)
}

/// Where the boundary of the stability region meets the negative real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZLeft {
    Finite(f64),
    Unbounded,
}

impl ZLeft {
    pub fn value(self) -> Option<f64> {
        match self {
            ZLeft::Finite(x) => Some(x),
            ZLeft::Unbounded => None,
        }
    }
}

impl Serialize for ZLeft {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ZLeft::Finite(x) => s.serialize_f64(*x),
            ZLeft::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

/// Behaviour of `|R(x)|` as `x → -∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitClass {
    Zero,
    FiniteNonzero,
    Infinite,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRegionReport {
    /// Points with `|R(z)| = 1` located on the scan grid edges.
    #[serde(skip)]
    pub boundary: Vec<Complex64>,
    pub z_left: ZLeft,
    pub limit_at_minus_infinity: LimitClass,
    /// `max |R(iy)|` over sampled `y ≥ 0`, recorded instead of an A-stability claim.
    pub max_modulus_imag_axis: f64,
}

/// Distance along the negative real axis beyond which a region counts as unbounded.
pub const UNBOUNDED_THRESHOLD: f64 = 1e6;

fn excess(t: &impl StabilityFunction, z: Complex64) -> f64 {
    let r = t.stability_value(z).norm();
    if r.is_nan() {
        f64::INFINITY
    } else {
        r - 1.0
    }
}

/// Left end of the stability interval on the negative real axis, bisected to 1e-9.
pub fn z_left(t: &impl StabilityFunction) -> ZLeft {
    let f = |x: f64| excess(t, Complex64::new(x, 0.0));
    let mut prev = 0.0;
    let mut x = -1e-3;
    while x >= -UNBOUNDED_THRESHOLD {
        if f(x) >= 0.0 {
            let (mut lo, mut hi) = (x, prev);
            while hi - lo > 1e-9 * (1.0 + hi.abs()) {
                let mid = 0.5 * (lo + hi);
                if f(mid) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return ZLeft::Finite(0.5 * (lo + hi));
        }
        prev = x;
        x = if x > -1.0 { x - 1e-3 } else { x * 1.001 };
    }
    ZLeft::Unbounded
}

/// Classify `|R|` at `x ∈ {-1e3, -1e6, -1e9}`.
pub fn limit_class(t: &impl StabilityFunction) -> LimitClass {
    let at = |x: f64| t.stability_value(Complex64::new(x, 0.0)).norm();
    let (r3, r6, r9) = (at(-1e3), at(-1e6), at(-1e9));
    if !r9.is_finite() || (r9 > 1e3 && r9 > 100.0 * r6 && r6 > r3) {
        LimitClass::Infinite
    } else if r9 < 1e-12 || (r9 < 1e-3 && r9 < 1e-2 * r6) {
        LimitClass::Zero
    } else {
        LimitClass::FiniteNonzero
    }
}

fn max_modulus_imag_axis(t: &impl StabilityFunction) -> f64 {
    (0..=4000)
        .map(|k| {
            // 0 .. 1e3, denser near the origin
            let y = 1e3 * (k as f64 / 4000.0).powi(3);
            t.stability_value(Complex64::new(0.0, y)).norm()
        })
        .fold(0.0, f64::max)
}

/// Scan a rectangle of the complex plane for the boundary `|R(z)| = 1`.
///
/// Every grid edge whose end points straddle the boundary is bisected; points
/// are kept once `||R(z)| - 1| < 1e-8`.
pub fn scan_stability_region<T: StabilityFunction + Sync>(
    t: &T,
    re_range: (f64, f64),
    im_range: (f64, f64),
    resolution: usize,
) -> Result<StabilityRegionReport> {
    if resolution < 64 {
        return Err(Error::InvalidArgument(format!(
            "resolution must be at least 64 per axis, got {resolution}"
        )));
    }
    let n = resolution;
    let node = |i: usize, j: usize| {
        Complex64::new(
            re_range.0 + (re_range.1 - re_range.0) * i as f64 / (n - 1) as f64,
            im_range.0 + (im_range.1 - im_range.0) * j as f64 / (n - 1) as f64,
        )
    };
    let values: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| (0..n).map(|i| excess(t, node(i, j))).collect())
        .collect();

    let refine = |a: Complex64, b: Complex64| -> Option<Complex64> {
        let (mut inside, mut outside) = if excess(t, a) < 0.0 { (a, b) } else { (b, a) };
        for _ in 0..80 {
            let mid = (inside + outside) * 0.5;
            if excess(t, mid) < 0.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        let z = (inside + outside) * 0.5;
        (excess(t, z).abs() < 1e-8).then_some(z)
    };
    let straddles = |u: f64, v: f64| (u < 0.0) != (v < 0.0);

    let boundary: Vec<Complex64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut pts = Vec::new();
            for i in 0..n {
                if i + 1 < n && straddles(values[j][i], values[j][i + 1]) {
                    pts.extend(refine(node(i, j), node(i + 1, j)));
                }
                if j + 1 < n && straddles(values[j][i], values[j + 1][i]) {
                    pts.extend(refine(node(i, j), node(i, j + 1)));
                }
            }
            pts
        })
        .collect();

    Ok(StabilityRegionReport {
        boundary,
        z_left: z_left(t),
        limit_at_minus_infinity: limit_class(t),
        max_modulus_imag_axis: max_modulus_imag_axis(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::builtin;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn method(s: Scheme, g: Option<f64>) -> Method {
        builtin(s, g).unwrap()
    }

    #[test]
    fn forward_euler_is_one_plus_z() {
        let m = method(Scheme::ForwardEuler, None);
        for z in [c(-2.0, 0.0), c(0.3, -1.2), c(-0.5, 4.0)] {
            assert!((m.stability_value(z) - (z + 1.0)).norm() < 1e-15);
        }
        assert!((m.stability_value(c(-2.0, 0.0)).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ssprk32_matches_polynomial() {
        let m = method(Scheme::Ssprk32, None);
        for z in [c(-1.0, 0.0), c(-2.0, 1.0), c(0.0, 3.0)] {
            let p = 1.0 + z + z * z / 2.0 + z * z * z / 12.0;
            assert!((m.stability_value(z) - p).norm() <= 1e-12 * p.norm().max(1.0));
        }
    }

    #[test]
    fn hig1_implicit_part_at_minus_one() {
        let m = method(Scheme::ImexSsp2_222, None);
        let r = m.diffusive_part().stability_value(c(-1.0, 0.0));
        let s2 = 2f64.sqrt();
        let want = 2.0 * (1.0 + s2) * s2 / (3.0 + s2).powi(2);
        assert!((r.re - want).abs() < 1e-14 && r.im.abs() < 1e-15);
        assert!((want - 0.35044).abs() < 1e-5);
    }

    #[test]
    fn closed_forms_at_origin_and_limits() {
        assert!((implicit_stability_closed_form(Scheme::ImexSsp2_332, c(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-15);
        let far = implicit_stability_closed_form(Scheme::ImexSsp2_222, c(-1e9, 0.0)).unwrap();
        assert!(far.norm() < 1e-8);
        let far = implicit_stability_closed_form(Scheme::ImexSsp3_333, c(-1e9, 0.0)).unwrap();
        assert!(far.norm() > 1e9);
        assert!(matches!(
            implicit_stability_closed_form(Scheme::ImexSsp2_332, c(5.0, 0.0)),
            Err(Error::Pole { .. })
        ));
        assert!(implicit_stability_closed_form(Scheme::Heun3, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn singular_stage_matrix_reports_pole() {
        // I - z·Ã is singular at z = 1/γ for the two-stage family.
        let m = method(Scheme::ImexSsp2_222, Some(0.25));
        let r = m.diffusive_part().stability_value(c(4.0, 0.0));
        assert!(r.norm().is_infinite());
    }

    #[test]
    fn additive_value_on_real_axis_is_implicit_value() {
        for s in [Scheme::ImexSsp2_222, Scheme::ImexSsp2_332, Scheme::ImexSsp3_333] {
            let m = method(s, None);
            for x in [-0.3, -2.0, -7.5] {
                let a = m.stability_value(c(x, 0.0));
                let b = m.diffusive_part().stability_value(c(x, 0.0));
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn z_left_examples() {
        let zl = z_left(&method(Scheme::ImexSsp2_222, Some(0.24)));
        assert!((zl.value().unwrap() + 50.0).abs() < 1e-6, "{zl:?}");
        let zl = z_left(&method(Scheme::Ssprk33, None)).value().unwrap();
        assert!((zl + 2.512).abs() < 1e-3, "{zl}");
        let imex = z_left(&method(Scheme::ImexSsp3_333, None)).value().unwrap();
        let part = z_left(method(Scheme::ImexSsp3_333, None).diffusive_part()).value().unwrap();
        assert!((imex + 3.248).abs() < 1e-3);
        assert!((imex - part).abs() < 1e-9);
        assert_eq!(z_left(&method(Scheme::ImexSsp2_222, None)), ZLeft::Unbounded);
    }

    #[test]
    fn limit_classes() {
        assert_eq!(limit_class(&method(Scheme::ImexSsp2_222, None)), LimitClass::Zero);
        assert_eq!(limit_class(&method(Scheme::ImexSsp2_332, None)), LimitClass::Zero);
        assert_eq!(limit_class(&method(Scheme::ImexSsp3_333, None)), LimitClass::Infinite);
        assert_eq!(limit_class(&method(Scheme::Ssprk32, None)), LimitClass::Infinite);
        assert_eq!(limit_class(&method(Scheme::ImexSsp2_222, Some(0.3))), LimitClass::FiniteNonzero);
    }

    #[test]
    fn scan_boundary_points_lie_on_unit_modulus() {
        let m = method(Scheme::Ssprk33, None);
        let rep = scan_stability_region(&m, (-3.0, 0.5), (-3.0, 3.0), 96).unwrap();
        assert!(rep.boundary.len() > 100);
        for z in &rep.boundary {
            assert!((m.stability_value(*z).norm() - 1.0).abs() < 1e-8);
        }
        assert!(scan_stability_region(&m, (-3.0, 0.5), (-3.0, 3.0), 32).is_err());
    }

    #[test]
    fn forward_euler_boundary_is_unit_circle() {
        let m = method(Scheme::ForwardEuler, None);
        let rep = scan_stability_region(&m, (-2.5, 0.5), (-1.5, 1.5), 64).unwrap();
        for z in &rep.boundary {
            assert!(((z + 1.0).norm() - 1.0).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn matrix_route_equals_closed_forms(re in -5.0f64..5.0, im in -5.0f64..5.0) {
            prop_assume!(re * re + im * im <= 25.0);
            let z = c(re, im);
            for s in [Scheme::ImexSsp2_222, Scheme::ImexSsp2_332, Scheme::ImexSsp3_333] {
                let Ok(want) = implicit_stability_closed_form(s, z) else { continue };
                let got = method(s, None).diffusive_part().stability_value(z);
                prop_assert!((got - want).norm() <= 1e-10 * want.norm().max(1e-300));
            }
        }
    }
}
