//! Amplification factors of the diffusion equation discretised by a centred
//! stencil and advanced with a method's diffusive tableau.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear::stability::StabilityFunction;
use crate::tableau::RKTableau;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// `[1, -2, 1]`
    ThreePoint,
    /// `[-1, 16, -30, 16, -1] / 12`
    FourthOrder,
}

impl Stencil {
    pub fn name(self) -> &'static str {
        match self {
            Stencil::ThreePoint => "3pt",
            Stencil::FourthOrder => "4th",
        }
    }

    /// Fourier symbol `σ(θ)`, real and non-positive.
    pub fn symbol(self, theta: f64) -> f64 {
        match self {
            Stencil::ThreePoint => 2.0 * theta.cos() - 2.0,
            Stencil::FourthOrder => {
                (-2.0 * (2.0 * theta).cos() + 32.0 * theta.cos() - 30.0) / 12.0
            }
        }
    }

    /// Stencil weights at offsets `-h..=h`, in units of `1/dx²`.
    pub fn weights(self) -> &'static [f64] {
        match self {
            Stencil::ThreePoint => &[1.0, -2.0, 1.0],
            Stencil::FourthOrder => &[-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0],
        }
    }

    /// Half width of the stencil.
    pub fn reach(self) -> usize {
        self.weights().len() / 2
    }

    /// `σ(π)`, the most negative symbol value.
    pub fn symbol_at_pi(self) -> f64 {
        self.symbol(std::f64::consts::PI)
    }
}

impl std::str::FromStr for Stencil {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3pt" | "three_point" => Ok(Stencil::ThreePoint),
            "4th" | "fourth_order" => Ok(Stencil::FourthOrder),
            _ => Err(Error::InvalidArgument(format!("unknown stencil `{s}` (3pt or 4th)"))),
        }
    }
}

impl std::fmt::Display for Stencil {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `g(θ, μ) = R(μ σ(θ))`, real for a real tableau.
pub fn amplification(t: &RKTableau, stencil: Stencil, theta: f64, mu: f64) -> f64 {
    t.stability_value(Complex64::new(mu * stencil.symbol(theta), 0.0)).re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipativityLandmarks {
    /// Smallest `μ > 0` with `g(π, μ) = 0`.
    pub first_zero: Option<f64>,
    /// Smallest `μ > 0` where `|g(π, μ)|` reaches 1 from below.
    pub unit_modulus: Option<f64>,
}

/// Largest `μ` inspected when looking for landmarks.
pub const MU_MAX: f64 = 1e3;

fn mu_grid() -> impl Iterator<Item = f64> {
    let linear = (1..=10_000).map(|k| k as f64 * 1e-3);
    let geometric = std::iter::successors(Some(10.0 * 1.001), |m| Some(m * 1.001)).take_while(|m| *m <= MU_MAX);
    linear.chain(geometric).chain(std::iter::once(MU_MAX))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo) < 0.0;
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == flo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First zero and first unit-modulus crossing of `g(π, ·)` on `(0, 1e3]`.
pub fn locate_dissipativity_landmarks(t: &RKTableau, stencil: Stencil) -> DissipativityLandmarks {
    let g = |mu: f64| amplification(t, stencil, std::f64::consts::PI, mu);
    let excess = |mu: f64| {
        let v = g(mu).abs();
        if v.is_nan() {
            f64::INFINITY
        } else {
            v - 1.0
        }
    };
    let mut first_zero = None;
    let mut unit_modulus = None;
    let (mut prev, mut g_prev, mut e_prev) = (0.0, 1.0_f64, -0.0_f64);
    for mu in mu_grid() {
        let (gv, ev) = (g(mu), excess(mu));
        if first_zero.is_none() && gv.is_finite() && g_prev.is_finite() {
            if gv == 0.0 {
                first_zero = Some(mu);
            } else if (gv < 0.0) != (g_prev < 0.0) {
                let z = bisect(prev, mu, g);
                // a sign change through a pole is not a zero
                if g(z).abs() < 1e-8 {
                    first_zero = Some(z);
                }
            }
        }
        if unit_modulus.is_none() && ev >= 0.0 && e_prev < 0.0 {
            unit_modulus = Some(if prev == 0.0 && ev == 0.0 { mu } else { bisect(prev, mu, excess) });
        }
        if first_zero.is_some() && unit_modulus.is_some() {
            break;
        }
        (prev, g_prev, e_prev) = (mu, gv, ev);
    }
    DissipativityLandmarks { first_zero, unit_modulus }
}

/// Closed-form landmarks of the two-stage `gamma` family on a stencil.
pub mod gamma_family {
    use super::*;

    fn scale(stencil: Stencil) -> f64 {
        // σ(π) is -4 for 3pt and -16/3 for 4th
        -4.0 / stencil.symbol_at_pi()
    }

    /// `z_left = 2/(4γ - 1)` for `γ < 1/4`, unbounded otherwise.
    pub fn z_left(gamma: f64) -> Option<f64> {
        (gamma < 0.25).then(|| 2.0 / (4.0 * gamma - 1.0))
    }

    /// First zero of `g(π, μ)`, present for `γ ≥ 1/4`.
    pub fn first_zero(gamma: f64, stencil: Stencil) -> Option<f64> {
        if gamma < 0.25 {
            return None;
        }
        let singular = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let mu = if (gamma - singular).abs() < 1e-12 {
            // 0/0 in the general expression; this is its limit
            (1.0 + std::f64::consts::SQRT_2) / 4.0
        } else {
            (1.0 - 2.0 * gamma - (4.0 * gamma - 1.0).sqrt())
                / (8.0 * gamma * gamma - 16.0 * gamma + 4.0)
        };
        Some(mu * scale(stencil))
    }

    /// Unit-modulus point `1/(2 - 8γ)`, present for `γ < 1/4`.
    pub fn unit_modulus(gamma: f64, stencil: Stencil) -> Option<f64> {
        (gamma < 0.25).then(|| scale(stencil) / (2.0 - 8.0 * gamma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::{builtin, Scheme};
    use proptest::prelude::*;

    fn part(s: Scheme, g: Option<f64>) -> RKTableau {
        builtin(s, g).unwrap().diffusive_part().clone()
    }

    #[test]
    fn symbols_at_pi() {
        assert!((Stencil::ThreePoint.symbol_at_pi() + 4.0).abs() < 1e-15);
        assert!((Stencil::FourthOrder.symbol_at_pi() + 16.0 / 3.0).abs() < 1e-14);
        for st in [Stencil::ThreePoint, Stencil::FourthOrder] {
            assert!(st.symbol(0.0).abs() < 1e-15);
            let sum: f64 = st.weights().iter().sum();
            assert!(sum.abs() < 1e-15);
        }
    }

    #[test]
    fn forward_euler_landmarks() {
        let t = part(Scheme::ForwardEuler, None);
        let l = locate_dissipativity_landmarks(&t, Stencil::ThreePoint);
        assert!((l.first_zero.unwrap() - 0.25).abs() < 1e-9);
        assert!((l.unit_modulus.unwrap() - 0.5).abs() < 1e-9);
        let l = locate_dissipativity_landmarks(&t, Stencil::FourthOrder);
        assert!((l.first_zero.unwrap() - 0.1875).abs() < 1e-9);
        assert!((l.unit_modulus.unwrap() - 0.375).abs() < 1e-9);
    }

    #[test]
    fn default_gamma_has_no_unit_crossing() {
        let t = part(Scheme::ImexSsp2_222, None);
        let l = locate_dissipativity_landmarks(&t, Stencil::ThreePoint);
        assert_eq!(l.unit_modulus, None);
        let want = gamma_family::first_zero(crate::tableau::DEFAULT_GAMMA, Stencil::ThreePoint).unwrap();
        assert!((l.first_zero.unwrap() - want).abs() < 1e-6);
    }

    #[test]
    fn gamma_024_fourth_order_unit_modulus() {
        let t = part(Scheme::ImexSsp2_222, Some(0.24));
        let l = locate_dissipativity_landmarks(&t, Stencil::FourthOrder);
        assert!((l.unit_modulus.unwrap() - 9.375).abs() < 1e-6);
        assert_eq!(l.first_zero, None);
    }

    #[test]
    fn stencil_parse() {
        assert_eq!("4th".parse::<Stencil>().unwrap(), Stencil::FourthOrder);
        assert!("5pt".parse::<Stencil>().is_err());
    }

    proptest! {
        #[test]
        fn gamma_family_closed_forms(gamma in 0.0f64..0.5, four in any::<bool>()) {
            // avoid the double root at 1/4
            prop_assume!((gamma - 0.25).abs() > 1e-3);
            let st = if four { Stencil::FourthOrder } else { Stencil::ThreePoint };
            let t = part(Scheme::ImexSsp2_222, Some(gamma));
            let l = locate_dissipativity_landmarks(&t, st);
            match (l.first_zero, gamma_family::first_zero(gamma, st)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-6, "{} {}", a, b),
                (None, None) => {}
                (a, b) => prop_assert!(false, "zero mismatch {:?} {:?}", a, b),
            }
            match (l.unit_modulus, gamma_family::unit_modulus(gamma, st)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-6 * b.max(1.0)),
                (None, None) => {}
                (a, b) => prop_assert!(false, "unit mismatch {:?} {:?}", a, b),
            }
        }

        #[test]
        fn amplification_is_real_stability_value(theta in 0.0f64..3.2, mu in 0.0f64..20.0) {
            let t = part(Scheme::ImexSsp3_333, None);
            let z = Complex64::new(mu * Stencil::ThreePoint.symbol(theta), 0.0);
            let r = t.stability_value(z);
            prop_assert!(r.im.abs() < 1e-12 * r.norm().max(1.0));
            prop_assert!((amplification(&t, Stencil::ThreePoint, theta, mu) - r.re).abs() == 0.0);
        }
    }
}
