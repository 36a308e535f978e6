//! `key = value` run configuration for the transport simulation.
//!
//! Blank lines and `#` comments are ignored; unknown keys are errors.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::advdiff::operators::{AdvectionScheme, Velocity};
use crate::advdiff::simulate::{CourantNumbers, SimulationOptions, TransportProblem};
use crate::elliptic::CgSettings;
use crate::error::{Error, Result};
use crate::grid::{GridField, VerticalBc};
use crate::linear::Stencil;
use crate::tableau::{builtin, AdditiveTableau, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialProfile {
    Zero,
    /// Straight line between the wall values; zero when periodic.
    Linear,
    Gaussian,
    /// One on `Lx/4 ≤ x < Lx/2`.
    Step,
    Sine,
}

impl std::str::FromStr for InitialProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => Self::Zero,
            "linear" => Self::Linear,
            "gaussian" => Self::Gaussian,
            "step" => Self::Step,
            "sine" => Self::Sine,
            _ => return Err(Error::Config(format!("unknown initial profile `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityField {
    Zero,
    Uniform { u: f64 },
    Cellular { amplitude: f64 },
}

impl std::str::FromStr for VelocityField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').map_or((s, None), |(k, a)| (k, Some(a)));
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Config(format!("velocity `{kind}` needs a value, e.g. `{kind}:1.0`")))?
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad velocity value in `{s}`")))
        };
        match kind.trim() {
            "zero" => Ok(Self::Zero),
            "uniform" => Ok(Self::Uniform { u: num(arg)? }),
            "cellular" => Ok(Self::Cellular { amplitude: num(arg)? }),
            _ => Err(Error::Config(format!("unknown velocity `{s}` (zero, uniform:U, cellular:A)"))),
        }
    }
}

/// Inclusive, evenly spaced list of step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DtScan {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl DtScan {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        (0..self.count).map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.count - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub periodic_vertical: bool,
    pub t_bottom: f64,
    pub t_top: f64,
    pub c_bottom: f64,
    pub c_top: f64,
    pub t_init: InitialProfile,
    pub c_init: InitialProfile,
    pub perturbation: f64,
    pub seed: u64,
    pub velocity: VelocityField,
    pub kappa_t: f64,
    pub kappa_c: f64,
    pub courant: CourantNumbers,
    pub eta_over_rho: f64,
    pub gravity: f64,
    pub scheme: Scheme,
    pub gamma: Option<f64>,
    pub stencil: Stencil,
    pub advection: AdvectionScheme,
    pub t_end: Option<f64>,
    /// Fixed number of steps; needs `dt` or `dt_scan` and replaces `t_end`.
    pub steps: Option<usize>,
    pub dt: Option<f64>,
    pub dt_scan: Option<DtScan>,
    pub controller: bool,
    pub snapshot_every: usize,
    pub scan_vertical: bool,
    pub osc_limit_fraction: f64,
    pub quiet_threshold: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub jacobi: bool,
    pub max_steps: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 63,
            lx: 1.0,
            ly: 1.0,
            periodic_vertical: false,
            t_bottom: 0.0,
            t_top: 0.0,
            c_bottom: 0.0,
            c_top: 0.0,
            t_init: InitialProfile::Gaussian,
            c_init: InitialProfile::Gaussian,
            perturbation: 0.0,
            seed: 0,
            velocity: VelocityField::Zero,
            kappa_t: 1.0,
            kappa_c: 0.1,
            courant: CourantNumbers::default(),
            eta_over_rho: 0.0,
            gravity: 0.0,
            scheme: Scheme::ImexSsp2_222,
            gamma: None,
            stencil: Stencil::ThreePoint,
            advection: AdvectionScheme::Eno2,
            t_end: None,
            steps: None,
            dt: None,
            dt_scan: None,
            controller: true,
            snapshot_every: 0,
            scan_vertical: false,
            osc_limit_fraction: 0.1,
            quiet_threshold: 0,
            cg_tol: 1e-10,
            cg_max_iter: 2000,
            jacobi: false,
            max_steps: 1_000_000,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` expects on/off, got `{v}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}` has an invalid value `{v}`")))
}

fn parse_scan(v: &str) -> Result<DtScan> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let [lo, hi, count] = parts[..] else {
        return Err(Error::Config(format!("dt_scan expects lo:hi:count, got `{v}`")));
    };
    let scan = DtScan { lo: parse_num("dt_scan", lo)?, hi: parse_num("dt_scan", hi)?, count: parse_num("dt_scan", count)? };
    if !(scan.lo > 0.0 && scan.hi >= scan.lo && scan.count > 0) {
        return Err(Error::Config(format!("dt_scan needs 0 < lo <= hi and count > 0, got `{v}`")));
    }
    Ok(scan)
}

impl SimulationConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: n + 1, msg: format!("expected `key = value`, got `{line}`") })?;
            let (k, v) = (k.trim(), v.trim());
            if seen.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Parse { line: n + 1, msg: format!("duplicate key `{k}`") });
            }
        }
        let mut c = Self::default();
        for (k, v) in &seen {
            let v = v.as_str();
            match k.as_str() {
                "nx" => c.nx = parse_num(k, v)?,
                "ny" => c.ny = parse_num(k, v)?,
                "Lx" => c.lx = parse_num(k, v)?,
                "Ly" => c.ly = parse_num(k, v)?,
                "vertical_bc" => {
                    c.periodic_vertical = match v {
                        "periodic" => true,
                        "dirichlet" => false,
                        _ => return Err(Error::Config(format!("vertical_bc is periodic or dirichlet, got `{v}`"))),
                    }
                }
                "T_bottom" => c.t_bottom = parse_num(k, v)?,
                "T_top" => c.t_top = parse_num(k, v)?,
                "c_bottom" => c.c_bottom = parse_num(k, v)?,
                "c_top" => c.c_top = parse_num(k, v)?,
                "T_init" => c.t_init = v.parse()?,
                "c_init" => c.c_init = v.parse()?,
                "perturbation" => c.perturbation = parse_num(k, v)?,
                "seed" => c.seed = parse_num(k, v)?,
                "velocity" => c.velocity = v.parse()?,
                "kappa_T" => c.kappa_t = parse_num(k, v)?,
                "kappa_c" => c.kappa_c = parse_num(k, v)?,
                "C_c" => c.courant.c_c = parse_num(k, v)?,
                "C_T" => c.courant.c_t = parse_num(k, v)?,
                "C_visc" => c.courant.c_visc = parse_num(k, v)?,
                "C_fluid" => c.courant.c_fluid = parse_num(k, v)?,
                "eta_over_rho" => c.eta_over_rho = parse_num(k, v)?,
                "gravity" => c.gravity = parse_num(k, v)?,
                "scheme" => c.scheme = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "gamma" => c.gamma = Some(parse_num(k, v)?),
                "stencil" => c.stencil = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "advection" => c.advection = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "t_end" => c.t_end = Some(parse_num(k, v)?),
                "steps" => c.steps = Some(parse_num(k, v)?),
                "dt" => c.dt = Some(parse_num(k, v)?),
                "dt_scan" => c.dt_scan = Some(parse_scan(v)?),
                "controller" => c.controller = parse_bool(k, v)?,
                "snapshot_every" => c.snapshot_every = parse_num(k, v)?,
                "scan_vertical" => c.scan_vertical = parse_bool(k, v)?,
                "osc_limit_fraction" => c.osc_limit_fraction = parse_num(k, v)?,
                "quiet_threshold" => c.quiet_threshold = parse_num(k, v)?,
                "cg_tol" => c.cg_tol = parse_num(k, v)?,
                "cg_max_iter" => c.cg_max_iter = parse_num(k, v)?,
                "jacobi" => c.jacobi = parse_bool(k, v)?,
                "max_steps" => c.max_steps = parse_num(k, v)?,
                _ => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.nx == 0 || self.ny == 0 {
            return bad("nx and ny must be positive".into());
        }
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return bad("Lx and Ly must be positive".into());
        }
        match (self.t_end, self.steps) {
            (None, None) => return bad("set t_end or steps".into()),
            (Some(_), Some(_)) => return bad("t_end and steps are exclusive".into()),
            (None, Some(_)) if self.dt.is_none() && self.dt_scan.is_none() => return bad("steps needs dt or dt_scan".into()),
            _ => {}
        }
        if self.dt.is_some() && self.dt_scan.is_some() {
            return bad("dt and dt_scan are exclusive".into());
        }
        if self.gamma.is_some() && self.scheme != Scheme::ImexSsp2_222 {
            return bad(format!("gamma is only accepted for imex_ssp2_222, not {}", self.scheme));
        }
        Ok(())
    }

    pub fn method(&self) -> Result<AdditiveTableau> {
        Ok(builtin(self.scheme, self.gamma).map_err(|e| Error::Config(e.to_string()))?.to_additive())
    }

    fn field(&self, profile: InitialProfile, bottom: f64, top: f64, rng: &mut ChaCha8Rng) -> Result<GridField> {
        let bc = if self.periodic_vertical { VerticalBc::Periodic } else { VerticalBc::Dirichlet { bottom, top } };
        let (lx, ly) = (self.lx, self.ly);
        let w2 = (0.1 * lx.min(ly)).powi(2);
        let periodic = self.periodic_vertical;
        let mut f = GridField::from_fn(self.nx, self.ny, lx, ly, bc, |x, y| match profile {
            InitialProfile::Zero => 0.0,
            InitialProfile::Linear if periodic => 0.0,
            InitialProfile::Linear => bottom + (top - bottom) * y / ly,
            InitialProfile::Gaussian => (-((x - 0.5 * lx).powi(2) + (y - 0.5 * ly).powi(2)) / (2.0 * w2)).exp(),
            InitialProfile::Step => {
                if (0.25 * lx..0.5 * lx).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            InitialProfile::Sine => (2.0 * PI * x / lx).sin(),
        })
        .map_err(|e| Error::Config(e.to_string()))?;
        if self.perturbation != 0.0 {
            for v in &mut f.values {
                *v += self.perturbation * rng.random_range(-1.0..1.0);
            }
        }
        Ok(f)
    }

    /// The problem, with any perturbation drawn from `seed`.
    pub fn problem(&self) -> Result<TransportProblem> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let temperature = self.field(self.t_init, self.t_bottom, self.t_top, &mut rng)?;
        let concentration = self.field(self.c_init, self.c_bottom, self.c_top, &mut rng)?;
        let velocity = match self.velocity {
            VelocityField::Zero => Velocity::zero(&temperature),
            VelocityField::Uniform { u } => Velocity::uniform(&temperature, u, 0.0)?,
            VelocityField::Cellular { amplitude } => Velocity::cellular(&temperature, amplitude),
        };
        let p = TransportProblem {
            temperature,
            concentration,
            velocity,
            kappa_t: self.kappa_t,
            kappa_c: self.kappa_c,
            courant: self.courant,
            eta_over_rho: self.eta_over_rho,
            gravity: self.gravity,
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }

    /// Options for a run with initial step `dt` (falls back to `self.dt`).
    pub fn options(&self, dt: Option<f64>) -> SimulationOptions {
        let dt = dt.or(self.dt);
        let t_end = match (self.t_end, self.steps, dt) {
            (Some(t), _, _) => t,
            (None, Some(n), Some(dt)) => n as f64 * dt,
            _ => unreachable!("checked at parse time"),
        };
        SimulationOptions {
            t_end,
            dt,
            controller: self.controller,
            advection: self.advection,
            stencil: self.stencil,
            cg: CgSettings { tol: self.cg_tol, max_iter: self.cg_max_iter, jacobi: self.jacobi },
            max_steps: self.max_steps,
            scan_vertical: self.scan_vertical,
            osc_limit_fraction: self.osc_limit_fraction,
            quiet_threshold: self.quiet_threshold,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_file() {
        let c = SimulationConfig::parse(
            "# comment\nnx = 16\nny=15\nLx = 2\nkappa_T = 0.5 # inline\nscheme = imex_ssp2_222\ngamma = 0.24\n\
             stencil = 4th\nt_end = 0.1\ncontroller = off\nvelocity = cellular:0.3\nvertical_bc = dirichlet\nT_top = 1\n",
        )
        .unwrap();
        assert_eq!((c.nx, c.ny, c.lx, c.kappa_t), (16, 15, 2.0, 0.5));
        assert_eq!(c.gamma, Some(0.24));
        assert_eq!(c.stencil, Stencil::FourthOrder);
        assert!(!c.controller);
        assert_eq!(c.velocity, VelocityField::Cellular { amplitude: 0.3 });
        let p = c.problem().unwrap();
        assert_eq!(p.temperature.bc, VerticalBc::Dirichlet { bottom: 0.0, top: 1.0 });
        assert_eq!(c.method().unwrap().gamma(), Some(0.24));
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "nx = 4\n",
            "t_end = 1\nbogus = 3\n",
            "t_end = 1\nt_end = 2\n",
            "t_end = 1\nnx = -3\n",
            "t_end = 1\nscheme = rk4\n",
            "t_end = 1\nscheme = ssprk22\ngamma = 0.2\n",
            "steps = 10\n",
            "t_end = 1\ndt_scan = 1:0.5:3\n",
            "t_end = 1\ncontroller = maybe\n",
            "no equals sign\n",
        ] {
            let e = SimulationConfig::parse(text).unwrap_err();
            assert!(matches!(e, Error::Config(_) | Error::Parse { .. }), "{text}: {e:?}");
        }
    }

    #[test]
    fn scan_values_are_inclusive() {
        let s = parse_scan("0.1:0.3:3").unwrap();
        let v = s.values();
        assert_eq!(v.len(), 3);
        assert!((v[1] - 0.2).abs() < 1e-15 && v[2] == 0.3);
    }

    #[test]
    fn perturbation_is_seeded() {
        let text = "t_end = 1\nperturbation = 0.01\nseed = 7\nnx = 8\nny = 7\n";
        let a = SimulationConfig::parse(text).unwrap().problem().unwrap();
        let b = SimulationConfig::parse(text).unwrap().problem().unwrap();
        assert_eq!(a.temperature.values, b.temperature.values);
        let c = SimulationConfig::parse(&text.replace("seed = 7", "seed = 8")).unwrap().problem().unwrap();
        assert_ne!(a.temperature.values, c.temperature.values);
    }

    #[test]
    fn steps_fix_the_end_time() {
        let c = SimulationConfig::parse("steps = 10\ndt = 0.01\n").unwrap();
        assert!((c.options(None).t_end - 0.1).abs() < 1e-15);
        assert!((c.options(Some(0.02)).t_end - 0.2).abs() < 1e-15);
    }
}
