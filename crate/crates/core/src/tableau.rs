//! Butcher tableaux for plain and additive (IMEX) Runge-Kutta methods.
//!
//! Coefficients printed as fractions are kept as exact rationals so that the
//! text format round-trips bit-exactly; irrational entries (the `gamma`
//! family) are stored as `f64`. The abscissae `c` are always derived from
//! row sums of `A`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CONSISTENCY_TOL: f64 = 1e-14;
const ORDER_TOL: f64 = 1e-12;

/// Default `gamma` of the two-stage IMEX method, `1 - 1/sqrt(2)`.
pub const DEFAULT_GAMMA: f64 = 1.0 - FRAC_1_SQRT_2;

/// A single tableau entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coeff {
    Exact(Rational64),
    Real(f64),
}

impl Coeff {
    pub fn frac(num: i64, den: i64) -> Self {
        Coeff::Exact(Rational64::new(num, den))
    }

    pub fn int(n: i64) -> Self {
        Coeff::Exact(Rational64::from_integer(n))
    }

    pub fn value(&self) -> f64 {
        match *self {
            Coeff::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Coeff::Real(x) => x,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value() == 0.0
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Exact(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Coeff::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            // `{:?}` on f64 is the shortest representation that parses back
            // to the same bits, and always carries a '.' or exponent.
            Coeff::Real(x) => write!(f, "{x:?}"),
        }
    }
}

impl FromStr for Coeff {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
            let d: i64 = d.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
            if d == 0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            return Ok(Coeff::frac(n, d));
        }
        if let Ok(n) = s.parse::<i64>() {
            return Ok(Coeff::int(n));
        }
        let x: f64 = s.parse().map_err(|_| format!("not a number: `{s}`"))?;
        if !x.is_finite() {
            return Err(format!("non-finite coefficient `{s}`"));
        }
        Ok(Coeff::Real(x))
    }
}

/// A plain Butcher tableau `(A, b)` with `c` taken as the row sums of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct RKTableau {
    a: Vec<Vec<Coeff>>,
    b: Vec<Coeff>,
    a_val: Vec<f64>,
    b_val: Vec<f64>,
    c_val: Vec<f64>,
}

impl RKTableau {
    pub fn new(a: Vec<Vec<Coeff>>, b: Vec<Coeff>) -> Result<Self> {
        let s = b.len();
        if s == 0 {
            return Err(Error::InvalidTableau("zero stages".into()));
        }
        if a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::InvalidTableau(format!(
                "A must be {s}x{s} to match {s} weights"
            )));
        }
        let a_val: Vec<f64> = a.iter().flatten().map(Coeff::value).collect();
        let b_val: Vec<f64> = b.iter().map(Coeff::value).collect();
        let c_val = (0..s).map(|i| a_val[i * s..(i + 1) * s].iter().sum()).collect();
        let weight_sum: f64 = b_val.iter().sum();
        if (weight_sum - 1.0).abs() > CONSISTENCY_TOL {
            return Err(Error::InvalidTableau(format!(
                "weights sum to {weight_sum}, not 1"
            )));
        }
        Ok(Self { a, b, a_val, b_val, c_val })
    }

    /// Build from rows of `(numerator, denominator)` pairs.
    pub fn from_fractions(a: &[&[(i64, i64)]], b: &[(i64, i64)]) -> Result<Self> {
        let a = a
            .iter()
            .map(|row| row.iter().map(|&(n, d)| Coeff::frac(n, d)).collect())
            .collect();
        let b = b.iter().map(|&(n, d)| Coeff::frac(n, d)).collect();
        Self::new(a, b)
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a_val[i * self.stages() + j]
    }

    #[inline]
    pub fn b(&self, j: usize) -> f64 {
        self.b_val[j]
    }

    #[inline]
    pub fn c(&self, i: usize) -> f64 {
        self.c_val[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.b_val
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.c_val
    }

    pub fn coeff_a(&self, i: usize, j: usize) -> Coeff {
        self.a[i][j]
    }

    pub fn coeff_b(&self, j: usize) -> Coeff {
        self.b[j]
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.stages(), self.stages(), &self.a_val)
    }

    /// `a[i][j] = 0` for all `j >= i`.
    pub fn is_explicit(&self) -> bool {
        let s = self.stages();
        (0..s).all(|i| (i..s).all(|j| self.a(i, j) == 0.0))
    }

    /// `a[i][j] = 0` for all `j > i`.
    pub fn is_diagonally_implicit(&self) -> bool {
        let s = self.stages();
        (0..s).all(|i| (i + 1..s).all(|j| self.a(i, j) == 0.0))
    }
}

/// Classical order conditions up to order three, checked to 1e-12.
///
/// Orders above three are outside what this check covers and return `false`.
pub fn check_order_conditions(t: &RKTableau, p: u32) -> bool {
    if p > 3 {
        return false;
    }
    let s = t.stages();
    let b = t.weights();
    let c = t.abscissae();
    let close = |x: f64, target: f64| (x - target).abs() <= ORDER_TOL;
    if p >= 1 && !close(b.iter().sum(), 1.0) {
        return false;
    }
    if p >= 2 && !close(dot(b, c), 0.5) {
        return false;
    }
    if p >= 3 {
        let bc2: f64 = (0..s).map(|i| b[i] * c[i] * c[i]).sum();
        let ac: Vec<f64> = (0..s).map(|i| (0..s).map(|j| t.a(i, j) * c[j]).sum()).collect();
        if !close(bc2, 1.0 / 3.0) || !close(dot(b, &ac), 1.0 / 6.0) {
            return false;
        }
    }
    true
}

/// Order conditions of the additive pair, coupling conditions included.
///
/// Each condition must hold for every way of choosing the weights, the
/// abscissae and the stage matrix from either part.
pub fn check_additive_order_conditions(t: &AdditiveTableau, p: u32) -> bool {
    if p > 3 {
        return false;
    }
    let parts = [&t.explicit, &t.implicit];
    if !parts.iter().all(|part| check_order_conditions(part, p.min(1))) {
        return false;
    }
    let s = t.stages();
    let close = |x: f64, target: f64| (x - target).abs() <= ORDER_TOL;
    if p >= 2 {
        for wb in parts {
            for pc in parts {
                if !close(dot(wb.weights(), pc.abscissae()), 0.5) {
                    return false;
                }
            }
        }
    }
    if p >= 3 {
        for wb in parts {
            let b = wb.weights();
            for p1 in parts {
                for p2 in parts {
                    let v: f64 = (0..s).map(|i| b[i] * p1.c(i) * p2.c(i)).sum();
                    if !close(v, 1.0 / 3.0) {
                        return false;
                    }
                    let v: f64 = (0..s)
                        .map(|i| b[i] * (0..s).map(|j| p1.a(i, j) * p2.c(j)).sum::<f64>())
                        .sum();
                    if !close(v, 1.0 / 6.0) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Paired explicit/implicit tableaux of an IMEX method.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveTableau {
    explicit: RKTableau,
    implicit: RKTableau,
    label: String,
    gamma: Option<f64>,
}

impl AdditiveTableau {
    pub fn new(
        explicit: RKTableau,
        implicit: RKTableau,
        label: impl Into<String>,
        gamma: Option<f64>,
    ) -> Result<Self> {
        if explicit.stages() != implicit.stages() {
            return Err(Error::InvalidTableau(format!(
                "explicit part has {} stages, implicit part {}",
                explicit.stages(),
                implicit.stages()
            )));
        }
        if !explicit.is_explicit() {
            return Err(Error::InvalidTableau(
                "explicit part is not strictly lower triangular".into(),
            ));
        }
        if !implicit.is_diagonally_implicit() {
            return Err(Error::InvalidTableau(
                "implicit part is not lower triangular".into(),
            ));
        }
        Ok(Self { explicit, implicit, label: label.into(), gamma })
    }

    /// A plain explicit method applied to both vector fields.
    pub fn from_plain(t: &RKTableau, label: impl Into<String>) -> Result<Self> {
        Self::new(t.clone(), t.clone(), label, None)
    }

    pub fn explicit_part(&self) -> &RKTableau {
        &self.explicit
    }

    pub fn implicit_part(&self) -> &RKTableau {
        &self.implicit
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn stages(&self) -> usize {
        self.explicit.stages()
    }

    /// Serialize to the line-oriented tableau file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {}\n", self.label));
        out.push_str(&format!("stages {}\n", self.stages()));
        out.push_str(&format!("label {}\n", self.label));
        if let Some(g) = self.gamma {
            out.push_str(&format!("gamma {g:?}\n"));
        }
        for (name, weights, part) in [
            ("explicit", "b", &self.explicit),
            ("implicit", "bt", &self.implicit),
        ] {
            out.push_str(name);
            out.push('\n');
            for row in &part.a {
                out.push_str(&join(row));
                out.push('\n');
            }
            out.push_str(weights);
            out.push(' ');
            out.push_str(&join(&part.b));
            out.push('\n');
        }
        out
    }
}

fn join(xs: &[Coeff]) -> String {
    xs.iter().map(Coeff::to_string).collect::<Vec<_>>().join(" ")
}

/// Parse the tableau file format.
///
/// ```text
/// stages 2
/// label my_method      # optional
/// gamma 0.25           # optional
/// explicit
/// 0 0
/// 1 0
/// b 1/2 1/2
/// implicit
/// 1/4 0
/// 1/2 1/4
/// bt 1/2 1/2
/// ```
pub fn parse_tableau(text: &str) -> Result<AdditiveTableau> {
    #[derive(PartialEq)]
    enum Block {
        Header,
        Explicit,
        Implicit,
        Done,
    }
    let err = |line: usize, msg: String| Error::Parse { line, msg };

    let mut stages: Option<usize> = None;
    let mut label = String::from("custom");
    let mut gamma = None;
    let mut block = Block::Header;
    let mut rows: [Vec<Vec<Coeff>>; 2] = [Vec::new(), Vec::new()];
    let mut weights: [Option<Vec<Coeff>>; 2] = [None, None];

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        let numbers = |tokens: std::str::SplitWhitespace<'_>| -> Result<Vec<Coeff>> {
            tokens
                .map(|t| t.parse::<Coeff>().map_err(|m| err(lineno, m)))
                .collect()
        };
        match head {
            "stages" => {
                if block != Block::Header || stages.is_some() {
                    return Err(err(lineno, "`stages` must appear once, first".into()));
                }
                let s: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .filter(|&s| s > 0)
                    .ok_or_else(|| err(lineno, "expected a positive stage count".into()))?;
                stages = Some(s);
            }
            "label" if block == Block::Header => {
                label = tokens.collect::<Vec<_>>().join(" ");
            }
            "gamma" if block == Block::Header => {
                let g = tokens
                    .next()
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| err(lineno, "expected a number after `gamma`".into()))?;
                gamma = Some(g);
            }
            "explicit" if block == Block::Header => {
                if stages.is_none() {
                    return Err(err(lineno, "`stages` header missing".into()));
                }
                block = Block::Explicit;
            }
            "implicit" if block == Block::Explicit => {
                if weights[0].is_none() {
                    return Err(err(lineno, "explicit block lacks a `b` row".into()));
                }
                block = Block::Implicit;
            }
            "b" if block == Block::Explicit && weights[0].is_none() => {
                weights[0] = Some(numbers(tokens)?);
            }
            "bt" if block == Block::Implicit && weights[1].is_none() => {
                weights[1] = Some(numbers(tokens)?);
                block = Block::Done;
            }
            _ if matches!(block, Block::Explicit | Block::Implicit) => {
                let k = if block == Block::Explicit { 0 } else { 1 };
                if weights[k].is_some() {
                    return Err(err(lineno, "matrix row after the weight row".into()));
                }
                rows[k].push(numbers(line.split_whitespace())?);
            }
            other => return Err(err(lineno, format!("unexpected `{other}`"))),
        }
    }

    let s = stages.ok_or_else(|| err(0, "missing `stages` header".into()))?;
    let [Some(b), Some(bt)] = weights else {
        return Err(err(0, "file ends before both blocks are complete".into()));
    };
    let [a, at] = rows;
    for (name, m, w) in [("explicit", &a, &b), ("implicit", &at, &bt)] {
        if m.len() != s || m.iter().any(|r| r.len() != s) || w.len() != s {
            return Err(Error::InvalidTableau(format!(
                "{name} block is not consistent with `stages {s}`"
            )));
        }
    }
    AdditiveTableau::new(RKTableau::new(a, b)?, RKTableau::new(at, bt)?, label, gamma)
}

/// Identifiers of the built-in methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImexSsp2_222,
    ImexSsp2_332,
    ImexSsp3_333,
    PrSsp2_332Original,
    Ssprk22,
    Ssprk32,
    Ssprk33,
    Heun3,
    ForwardEuler,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::ImexSsp2_222,
        Scheme::ImexSsp2_332,
        Scheme::ImexSsp3_333,
        Scheme::PrSsp2_332Original,
        Scheme::Ssprk22,
        Scheme::Ssprk32,
        Scheme::Ssprk33,
        Scheme::Heun3,
        Scheme::ForwardEuler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImexSsp2_222 => "imex_ssp2_222",
            Scheme::ImexSsp2_332 => "imex_ssp2_332",
            Scheme::ImexSsp3_333 => "imex_ssp3_333",
            Scheme::PrSsp2_332Original => "pr_ssp2_332_original",
            Scheme::Ssprk22 => "ssprk22",
            Scheme::Ssprk32 => "ssprk32",
            Scheme::Ssprk33 => "ssprk33",
            Scheme::Heun3 => "heun3",
            Scheme::ForwardEuler => "forward_euler",
        }
    }

    /// Global order of the method.
    pub fn nominal_order(self) -> u32 {
        match self {
            Scheme::ForwardEuler => 1,
            Scheme::ImexSsp3_333 | Scheme::Ssprk33 | Scheme::Heun3 => 3,
            _ => 2,
        }
    }

    pub fn is_additive(self) -> bool {
        matches!(
            self,
            Scheme::ImexSsp2_222
                | Scheme::ImexSsp2_332
                | Scheme::ImexSsp3_333
                | Scheme::PrSsp2_332Original
        )
    }

    /// Whether the method carries the strong-stability-preserving property.
    pub fn is_ssp(self) -> bool {
        !matches!(self, Scheme::Heun3 | Scheme::PrSsp2_332Original)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

/// Either an additive pair or a plain tableau, as returned by [`builtin`].
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Additive(AdditiveTableau),
    Plain { label: String, tableau: RKTableau },
}

impl Method {
    pub fn label(&self) -> &str {
        match self {
            Method::Additive(t) => t.label(),
            Method::Plain { label, .. } => label,
        }
    }

    pub fn stages(&self) -> usize {
        match self {
            Method::Additive(t) => t.stages(),
            Method::Plain { tableau, .. } => tableau.stages(),
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Method::Additive(t) => t.gamma(),
            Method::Plain { .. } => None,
        }
    }

    /// The additive form: plain tableaux are paired with themselves.
    pub fn to_additive(&self) -> AdditiveTableau {
        match self {
            Method::Additive(t) => t.clone(),
            Method::Plain { label, tableau } => AdditiveTableau::from_plain(tableau, label.clone())
                .expect("builtin plain tableaux are explicit"),
        }
    }

    /// The tableau applied to the stiff (diffusive) term: the implicit part of
    /// an additive method, or the tableau itself for a plain method.
    pub fn diffusive_part(&self) -> &RKTableau {
        match self {
            Method::Additive(t) => t.implicit_part(),
            Method::Plain { tableau, .. } => tableau,
        }
    }

    pub fn explicit_part(&self) -> &RKTableau {
        match self {
            Method::Additive(t) => t.explicit_part(),
            Method::Plain { tableau, .. } => tableau,
        }
    }
}

/// The built-in tableau for `scheme`. `gamma` is only accepted for
/// `imex_ssp2_222`, where it defaults to `1 - 1/sqrt(2)`.
pub fn builtin(scheme: Scheme, gamma: Option<f64>) -> Result<Method> {
    if gamma.is_some() && scheme != Scheme::ImexSsp2_222 {
        return Err(Error::GammaNotAccepted(scheme.name().into()));
    }
    let f = Coeff::frac;
    let z = || Coeff::int(0);
    let third = || f(1, 3);
    let ssprk22 = || RKTableau::new(vec![vec![z(), z()], vec![Coeff::int(1), z()]], vec![f(1, 2), f(1, 2)]);
    let ssprk32 = || {
        RKTableau::new(
            vec![
                vec![z(), z(), z()],
                vec![f(1, 2), z(), z()],
                vec![f(1, 2), f(1, 2), z()],
            ],
            vec![third(), third(), third()],
        )
    };
    let ssprk33 = || {
        RKTableau::new(
            vec![
                vec![z(), z(), z()],
                vec![Coeff::int(1), z(), z()],
                vec![f(1, 4), f(1, 4), z()],
            ],
            vec![f(1, 6), f(1, 6), f(2, 3)],
        )
    };
    let plain = |t: RKTableau| Method::Plain { label: scheme.name().into(), tableau: t };
    let additive = |e: RKTableau, i: RKTableau, g: Option<f64>| {
        AdditiveTableau::new(e, i, scheme.name(), g).map(Method::Additive)
    };

    match scheme {
        Scheme::ImexSsp2_222 => {
            let g = gamma.unwrap_or(DEFAULT_GAMMA);
            if !(0.0..=0.5).contains(&g) || g.is_nan() {
                return Err(Error::GammaOutOfRange(g));
            }
            let implicit = RKTableau::new(
                vec![
                    vec![Coeff::Real(g), z()],
                    vec![Coeff::Real(1.0 - 2.0 * g), Coeff::Real(g)],
                ],
                vec![f(1, 2), f(1, 2)],
            )?;
            additive(ssprk22()?, implicit, Some(g))
        }
        Scheme::ImexSsp2_332 | Scheme::PrSsp2_332Original => {
            let (r1, r2) = if scheme == Scheme::ImexSsp2_332 {
                ([f(1, 5), z(), z()], [f(1, 10), f(1, 5), z()])
            } else {
                ([f(1, 4), z(), z()], [z(), f(1, 4), z()])
            };
            let implicit = RKTableau::new(
                vec![r1.to_vec(), r2.to_vec(), vec![third(), third(), third()]],
                vec![third(), third(), third()],
            )?;
            additive(ssprk32()?, implicit, None)
        }
        Scheme::ImexSsp3_333 => {
            let implicit = RKTableau::new(
                vec![
                    vec![z(), z(), z()],
                    vec![f(14, 15), f(1, 15), z()],
                    vec![f(7, 30), f(1, 5), f(1, 15)],
                ],
                vec![f(1, 6), f(1, 6), f(2, 3)],
            )?;
            additive(ssprk33()?, implicit, None)
        }
        Scheme::Ssprk22 => Ok(plain(ssprk22()?)),
        Scheme::Ssprk32 => Ok(plain(ssprk32()?)),
        Scheme::Ssprk33 => Ok(plain(ssprk33()?)),
        Scheme::Heun3 => Ok(plain(RKTableau::new(
            vec![
                vec![z(), z(), z()],
                vec![f(1, 3), z(), z()],
                vec![z(), f(2, 3), z()],
            ],
            vec![f(1, 4), z(), f(3, 4)],
        )?)),
        Scheme::ForwardEuler => Ok(plain(RKTableau::new(vec![vec![z()]], vec![Coeff::int(1)])?)),
    }
}

/// [`builtin`] by textual identifier.
pub fn builtin_by_name(name: &str, gamma: Option<f64>) -> Result<Method> {
    builtin(name.parse()?, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64 as Q;

    fn exact(c: Coeff) -> Q {
        match c {
            Coeff::Exact(r) => r,
            Coeff::Real(_) => panic!("expected an exact entry"),
        }
    }

    // Order conditions in exact rational arithmetic, independent of the f64 path.
    fn exact_conditions(t: &RKTableau) -> [Q; 4] {
        let s = t.stages();
        let a = |i, j| exact(t.coeff_a(i, j));
        let b = |i| exact(t.coeff_b(i));
        let c: Vec<Q> = (0..s).map(|i| (0..s).map(|j| a(i, j)).sum()).collect();
        let be: Q = (0..s).map(b).sum();
        let bc: Q = (0..s).map(|i| b(i) * c[i]).sum();
        let bc2: Q = (0..s).map(|i| b(i) * c[i] * c[i]).sum();
        let bac: Q = (0..s)
            .map(|i| b(i) * (0..s).map(|j| a(i, j) * c[j]).sum::<Q>())
            .sum();
        [be, bc, bc2, bac]
    }

    fn plain(s: Scheme) -> RKTableau {
        match builtin(s, None).unwrap() {
            Method::Plain { tableau, .. } => tableau,
            Method::Additive(_) => panic!("{s} is additive"),
        }
    }

    fn additive(s: Scheme, g: Option<f64>) -> AdditiveTableau {
        match builtin(s, g).unwrap() {
            Method::Additive(t) => t,
            Method::Plain { .. } => panic!("{s} is plain"),
        }
    }

    #[test]
    fn heun3_satisfies_third_order_exactly() {
        let [be, bc, bc2, bac] = exact_conditions(&plain(Scheme::Heun3));
        assert_eq!(be, Q::from_integer(1));
        assert_eq!(bc, Q::new(1, 2));
        assert_eq!(bc2, Q::new(1, 3));
        assert_eq!(bac, Q::new(1, 6));
    }

    #[test]
    fn imex_ssp2_222_default_coefficients() {
        let t = additive(Scheme::ImexSsp2_222, None);
        let g = DEFAULT_GAMMA;
        assert!((g - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(t.gamma(), Some(g));
        let e = t.explicit_part();
        assert_eq!((e.a(0, 0), e.a(0, 1), e.a(1, 0), e.a(1, 1)), (0.0, 0.0, 1.0, 0.0));
        assert_eq!(e.weights(), &[0.5, 0.5]);
        let i = t.implicit_part();
        assert_eq!((i.a(0, 0), i.a(0, 1), i.a(1, 0), i.a(1, 1)), (g, 0.0, 1.0 - 2.0 * g, g));
        assert_eq!(i.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn imex_ssp3_333_implicit_rows() {
        let t = additive(Scheme::ImexSsp3_333, None);
        let i = t.implicit_part();
        let rows: Vec<Vec<Coeff>> = (0..3).map(|r| (0..3).map(|c| i.coeff_a(r, c)).collect()).collect();
        assert_eq!(rows[0], vec![Coeff::int(0); 3]);
        assert_eq!(rows[1], vec![Coeff::frac(14, 15), Coeff::frac(1, 15), Coeff::int(0)]);
        assert_eq!(rows[2], vec![Coeff::frac(7, 30), Coeff::frac(1, 5), Coeff::frac(1, 15)]);
        assert_eq!(
            (0..3).map(|j| i.coeff_b(j)).collect::<Vec<_>>(),
            vec![Coeff::frac(1, 6), Coeff::frac(1, 6), Coeff::frac(2, 3)]
        );
    }

    #[test]
    fn forward_euler_is_identity_case() {
        let t = plain(Scheme::ForwardEuler);
        assert_eq!(t.stages(), 1);
        assert_eq!(t.a(0, 0), 0.0);
        assert_eq!(t.weights(), &[1.0]);
    }

    #[test]
    fn pr_original_differs_only_in_first_two_implicit_rows() {
        let hig = additive(Scheme::ImexSsp2_332, None);
        let pr = additive(Scheme::PrSsp2_332Original, None);
        assert_eq!(hig.explicit_part(), pr.explicit_part());
        let p = pr.implicit_part();
        assert_eq!((p.a(0, 0), p.a(1, 0), p.a(1, 1)), (0.25, 0.0, 0.25));
        for j in 0..3 {
            assert_eq!(p.coeff_a(2, j), hig.implicit_part().coeff_a(2, j));
        }
    }

    #[test]
    fn gamma_validation() {
        assert!(matches!(
            builtin(Scheme::ImexSsp2_222, Some(0.6)),
            Err(Error::GammaOutOfRange(_))
        ));
        assert!(matches!(
            builtin(Scheme::ImexSsp2_222, Some(-0.01)),
            Err(Error::GammaOutOfRange(_))
        ));
        assert!(matches!(
            builtin(Scheme::Ssprk22, Some(0.2)),
            Err(Error::GammaNotAccepted(_))
        ));
        assert!(builtin(Scheme::ImexSsp2_222, Some(0.0)).is_ok());
        assert!(builtin(Scheme::ImexSsp2_222, Some(0.5)).is_ok());
        assert!(matches!(builtin_by_name("rk4", None), Err(Error::UnknownScheme(_))));
    }

    #[test]
    fn order_condition_examples() {
        assert!(check_order_conditions(&plain(Scheme::Ssprk22), 2));
        assert!(!check_order_conditions(&plain(Scheme::Ssprk32), 3));
        assert!(check_order_conditions(&plain(Scheme::ForwardEuler), 1));
        assert!(!check_order_conditions(&plain(Scheme::ForwardEuler), 4));
    }

    #[test]
    fn builtins_meet_nominal_order_and_no_more() {
        for s in Scheme::ALL {
            let p = s.nominal_order();
            let m = builtin(s, None).unwrap();
            let parts: Vec<&RKTableau> = match &m {
                Method::Additive(t) => vec![t.explicit_part(), t.implicit_part()],
                Method::Plain { tableau, .. } => vec![tableau],
            };
            for part in parts {
                assert!(check_order_conditions(part, p), "{s} fails order {p}");
                if p < 3 {
                    assert!(!check_order_conditions(part, p + 1), "{s} passes order {}", p + 1);
                }
            }
            if let Method::Additive(t) = &m {
                assert!(check_additive_order_conditions(t, p), "{s} coupling order {p}");
                if p < 3 {
                    assert!(!check_additive_order_conditions(t, p + 1));
                }
            }
        }
    }

    #[test]
    fn special_gamma_gives_third_order_implicit_part() {
        let g = (1.0 - 1.0 / 3f64.sqrt()) / 2.0;
        let t = additive(Scheme::ImexSsp2_222, Some(g));
        assert!(check_order_conditions(t.implicit_part(), 3));
        assert!(!check_additive_order_conditions(&t, 3));
    }

    #[test]
    fn imex_weights_agree() {
        for s in [Scheme::ImexSsp2_222, Scheme::ImexSsp2_332, Scheme::ImexSsp3_333] {
            let t = additive(s, None);
            assert_eq!(t.explicit_part().weights(), t.implicit_part().weights());
        }
    }

    #[test]
    fn abscissae_are_row_sums() {
        let t = additive(Scheme::ImexSsp2_332, None);
        assert_eq!(t.implicit_part().abscissae(), &[0.2, 0.30000000000000004, 1.0]);
    }

    #[test]
    fn round_trip_imex_ssp2_332() {
        let t = additive(Scheme::ImexSsp2_332, None);
        let text = t.to_file_string();
        assert_eq!(parse_tableau(&text).unwrap(), t);
    }

    #[test]
    fn round_trip_irrational_gamma_is_bit_exact() {
        let t = additive(Scheme::ImexSsp2_222, None);
        let back = parse_tableau(&t.to_file_string()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.implicit_part().a(1, 0).to_bits(), t.implicit_part().a(1, 0).to_bits());
    }

    #[test]
    fn rejects_implicit_entry_above_diagonal() {
        let text = "stages 2\nexplicit\n0 0\n1 0\nb 1/2 1/2\nimplicit\n1/2 1/4\n0 1/2\nbt 1/2 1/2\n";
        assert!(matches!(parse_tableau(text), Err(Error::InvalidTableau(_))));
    }

    #[test]
    fn rejects_stage_count_mismatch() {
        let text = "stages 3\nexplicit\n0 0 0\n1/2 0 0\n1/2 1/2 0\nb 1/3 1/3 1/3\n\
                    implicit\n1/2 0\n0 1/2\nbt 1/2 1/2\n";
        assert!(parse_tableau(text).is_err());
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(parse_tableau("explicit\n0\nb 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_tableau("stages 1\nexplicit\n0\nb x\nimplicit\n0\nbt 1\n"),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(parse_tableau("stages 1\nexplicit\n0\nb 1\n").is_err());
        assert!(matches!(
            parse_tableau("stages 1\nexplicit\n0\nb 1/2\nimplicit\n0\nbt 1\n"),
            Err(Error::InvalidTableau(_))
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# forward Euler twice\nstages 1\n\nexplicit # A\n0\nb 1\nimplicit\n0 # still explicit\nbt 1\n";
        let t = parse_tableau(text).unwrap();
        assert_eq!(t.stages(), 1);
        assert_eq!(t.label(), "custom");
    }
}
