//! Method-of-lines transport of two scalars, explicit advection and implicit
//! diffusion, with the two-point-instability step controller.

use serde::Serialize;

use crate::advdiff::control::{controller_update, max_line_count, ControllerAction, StepControllerState};
use crate::advdiff::operators::{advect, diffuse_stencil, stencil_centre, AdvectionScheme, Velocity};
use crate::elliptic::{solve_cg, stage_solver_for_diffusion, CgSettings, SymmetricOperator};
use crate::error::{Error, Result};
use crate::grid::{GridField, VerticalBc};
use crate::linear::Stencil;
use crate::stepper::{step, SplitSystem};
use crate::tableau::AdditiveTableau;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CourantNumbers {
    pub c_c: f64,
    pub c_t: f64,
    pub c_visc: f64,
    pub c_fluid: f64,
}

impl Default for CourantNumbers {
    fn default() -> Self {
        Self { c_c: 0.25, c_t: 0.25, c_visc: 0.25, c_fluid: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct TransportProblem {
    pub temperature: GridField,
    pub concentration: GridField,
    pub velocity: Velocity,
    pub kappa_t: f64,
    pub kappa_c: f64,
    pub courant: CourantNumbers,
    pub eta_over_rho: f64,
    pub gravity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DtLimits {
    pub dt: f64,
    pub tau_c: f64,
    pub tau_t: f64,
    pub tau_visc: f64,
    pub tau_fluid: f64,
}

fn over(c: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        c / rate
    } else {
        f64::INFINITY
    }
}

impl TransportProblem {
    pub fn validate(&self) -> Result<()> {
        let (t, c) = (&self.temperature, &self.concentration);
        if !t.same_shape(c) || t.dx != c.dx || t.dy != c.dy {
            return Err(Error::Shape("temperature and concentration grids differ".into()));
        }
        if self.velocity.nx != t.nx || self.velocity.ny != t.ny {
            return Err(Error::Shape("velocity does not match the grid".into()));
        }
        for (name, k) in [("kappa_T", self.kappa_t), ("kappa_c", self.kappa_c)] {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite and nonnegative, got {k}")));
            }
        }
        if t.values.iter().chain(&c.values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("initial fields must be finite".into()));
        }
        Ok(())
    }

    fn vertical_active(&self) -> bool {
        !(self.temperature.ny == 1 && matches!(self.temperature.bc, VerticalBc::Periodic))
    }

    /// `min(dx, dy)`, ignoring a degenerate single-row periodic direction.
    pub fn min_spacing(&self) -> f64 {
        let g = &self.temperature;
        if self.vertical_active() {
            g.dx.min(g.dy)
        } else {
            g.dx
        }
    }

    pub fn explicit_dt_limit(&self) -> DtLimits {
        let h = self.min_spacing();
        let c = &self.courant;
        let tau_c = over(c.c_c, self.kappa_c) * h * h;
        let tau_t = over(c.c_t, self.kappa_t) * h * h;
        let tau_visc = over(c.c_visc, self.eta_over_rho) * h * h;
        let tau_fluid = over(c.c_fluid, self.velocity.max_speed()) * h;
        DtLimits { dt: tau_c.min(tau_t).min(tau_visc).min(tau_fluid), tau_c, tau_t, tau_visc, tau_fluid }
    }

    /// `min(dx, dy)^{1/2} / g^{1/2}`, infinite without gravity.
    pub fn buoyancy_timescale(&self) -> f64 {
        if self.gravity > 0.0 {
            (self.min_spacing() / self.gravity).sqrt()
        } else {
            f64::INFINITY
        }
    }

    /// Cap on the step: all four limits for explicit methods, only the
    /// viscous and fluid ones when diffusion is implicit.
    pub fn dt_cap(&self, method: &AdditiveTableau) -> f64 {
        let l = self.explicit_dt_limit();
        if implicit_diffusion(method) {
            l.tau_visc.min(l.tau_fluid)
        } else {
            l.dt
        }
    }
}

/// True when every stage of the implicit part has a nonzero diagonal after
/// the first explicit ones, i.e. diffusion is actually treated implicitly.
pub fn implicit_diffusion(t: &AdditiveTableau) -> bool {
    let im = t.implicit_part();
    (0..t.stages()).any(|i| im.a(i, i) != 0.0)
}

struct StencilStage<'a> {
    template: &'a GridField,
    stencil: Stencil,
    kappa: f64,
    inv_coeff: f64,
}

impl SymmetricOperator for StencilStage<'_> {
    fn dim(&self) -> usize {
        self.template.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let homogeneous = match self.template.bc {
            VerticalBc::Dirichlet { .. } => VerticalBc::Dirichlet { bottom: 0.0, top: 0.0 },
            p => p,
        };
        let f = GridField { bc: homogeneous, values: x.to_vec(), ..self.template.clone() };
        let l = diffuse_stencil(&f, self.stencil).expect("stencil size checked before the solve");
        for k in 0..x.len() {
            out[k] = self.inv_coeff * x[k] - self.kappa * l.values[k];
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        vec![self.inv_coeff + self.kappa * stencil_centre(self.template, self.stencil); self.dim()]
    }
}

/// The transport problem as a split ODE on `[T | c]`.
pub struct TransportSystem<'a> {
    pub problem: &'a TransportProblem,
    pub advection: AdvectionScheme,
    pub stencil: Stencil,
    pub cg: CgSettings,
}

impl TransportSystem<'_> {
    fn fields(&self, y: &[f64]) -> (GridField, GridField) {
        let n = self.problem.temperature.len();
        let t = GridField { values: y[..n].to_vec(), ..self.problem.temperature.clone() };
        let c = GridField { values: y[n..].to_vec(), ..self.problem.concentration.clone() };
        (t, c)
    }

    fn solve_field(&self, template: &GridField, kappa: f64, coeff: f64, rhs: &[f64], u: &mut [f64]) -> Result<usize> {
        if kappa == 0.0 {
            u.copy_from_slice(rhs);
            return Ok(0);
        }
        let y_star = GridField { values: rhs.to_vec(), ..template.clone() };
        match self.stencil {
            Stencil::ThreePoint => {
                let kf = template.with_values(vec![kappa; template.len()])?;
                let (sol, it) = stage_solver_for_diffusion(&kf, coeff, self.cg)?.solve(&y_star, Some(u))?;
                u.copy_from_slice(&sol.values);
                Ok(it)
            }
            Stencil::FourthOrder => {
                let op = StencilStage { template, stencil: self.stencil, kappa, inv_coeff: 1.0 / coeff };
                // wall values enter through L applied to the zero field
                let walls = diffuse_stencil(&template.with_values(vec![0.0; template.len()])?, self.stencil)?;
                let b: Vec<f64> = rhs.iter().zip(&walls.values).map(|(r, w)| r / coeff + kappa * w).collect();
                let out = solve_cg(&op, &b, Some(u), self.cg)?;
                u.copy_from_slice(&out.x);
                Ok(out.iterations)
            }
        }
    }
}

impl SplitSystem for TransportSystem<'_> {
    type Scalar = f64;

    fn dimension(&self) -> usize {
        2 * self.problem.temperature.len()
    }

    fn explicit_rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        let n = self.problem.temperature.len();
        let (t, c) = self.fields(y);
        let v = &self.problem.velocity;
        let at = advect(&t, v, self.advection).expect("shapes validated");
        let ac = advect(&c, v, self.advection).expect("shapes validated");
        out[..n].copy_from_slice(&at.values);
        out[n..].copy_from_slice(&ac.values);
    }

    fn implicit_rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        let n = self.problem.temperature.len();
        let (t, c) = self.fields(y);
        let lt = diffuse_stencil(&t, self.stencil).expect("stencil size checked");
        let lc = diffuse_stencil(&c, self.stencil).expect("stencil size checked");
        for k in 0..n {
            out[k] = self.problem.kappa_t * lt.values[k];
            out[n + k] = self.problem.kappa_c * lc.values[k];
        }
    }

    fn solve_stage(&self, _t: f64, coeff: f64, rhs: &[f64], u: &mut [f64]) -> Result<usize> {
        let n = self.problem.temperature.len();
        let (ut, uc) = u.split_at_mut(n);
        let p = self.problem;
        let a = self.solve_field(&p.temperature, p.kappa_t, coeff, &rhs[..n], ut)?;
        let b = self.solve_field(&p.concentration, p.kappa_c, coeff, &rhs[n..], uc)?;
        Ok(a + b)
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub t_end: f64,
    /// Initial step; defaults to the cap.
    pub dt: Option<f64>,
    pub controller: bool,
    pub advection: AdvectionScheme,
    pub stencil: Stencil,
    pub cg: CgSettings,
    pub max_steps: usize,
    /// Any value beyond this in magnitude counts as a blow-up.
    pub blowup: f64,
    pub scan_vertical: bool,
    pub osc_limit_fraction: f64,
    pub quiet_threshold: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: None,
            controller: true,
            advection: AdvectionScheme::Eno2,
            stencil: Stencil::ThreePoint,
            cg: CgSettings::default(),
            max_steps: 1_000_000,
            blowup: 1e8,
            scan_vertical: false,
            osc_limit_fraction: 0.1,
            quiet_threshold: 0,
        }
    }
}

/// One accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub osc_count: usize,
    pub cg_iters: usize,
    pub tv_t: f64,
    pub tv_c: f64,
    pub min_c: f64,
    pub max_c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationFailure {
    pub message: String,
    pub numerical: bool,
    pub step: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub scheme: String,
    pub limits: DtLimits,
    pub dt_cap: f64,
    pub initial: TrajectoryRow,
    pub rows: Vec<TrajectoryRow>,
    pub reductions: usize,
    pub repeated_steps: usize,
    pub growths: usize,
    pub failure: Option<SimulationFailure>,
    #[serde(skip)]
    pub temperature: GridField,
    #[serde(skip)]
    pub concentration: GridField,
    pub max_abs_t: f64,
}

impl SimulationSummary {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    /// Largest single-step increase of the concentration TV.
    pub fn max_tv_c_increase(&self) -> f64 {
        let mut prev = self.initial.tv_c;
        let mut worst = f64::NEG_INFINITY;
        for r in &self.rows {
            worst = worst.max(r.tv_c - prev);
            prev = r.tv_c;
        }
        worst
    }

    pub fn write_trajectory_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "time", "dt", "osc_count", "cg_iters", "tv_T", "tv_c", "min_c", "max_c"])?;
        for r in std::iter::once(&self.initial).chain(&self.rows) {
            w.write_record([
                r.step.to_string(),
                format!("{:e}", r.time),
                format!("{:e}", r.dt),
                r.osc_count.to_string(),
                r.cg_iters.to_string(),
                format!("{:e}", r.tv_t),
                format!("{:e}", r.tv_c),
                format!("{:e}", r.min_c),
                format!("{:e}", r.max_c),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn row(step: usize, time: f64, dt: f64, osc: usize, cg: usize, t: &GridField, c: &GridField) -> TrajectoryRow {
    TrajectoryRow {
        step,
        time,
        dt,
        osc_count: osc,
        cg_iters: cg,
        tv_t: t.total_variation(),
        tv_c: c.total_variation(),
        min_c: c.min(),
        max_c: c.max(),
    }
}

/// Called with `(step, time, T, c)` after every accepted step.
pub type Observer<'a> = dyn FnMut(usize, f64, &GridField, &GridField) -> Result<()> + 'a;

/// Advance both scalars to `t_end`.
///
/// With the controller on, a step whose worst line shows more than
/// `osc_limit_fraction · ny` detections triggers a reduction and is redone
/// from the previous state with the smaller step.
pub fn run_simulation(
    problem: &TransportProblem,
    method: &AdditiveTableau,
    opts: &SimulationOptions,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<SimulationSummary> {
    problem.validate()?;
    diffuse_stencil(&problem.temperature, opts.stencil)?;
    let limits = problem.explicit_dt_limit();
    let dt_cap = problem.dt_cap(method);
    let dt0 = match opts.dt {
        Some(d) if d > 0.0 => d,
        Some(d) => return Err(Error::Config(format!("dt must be positive, got {d}"))),
        None if dt_cap.is_finite() => dt_cap,
        None => return Err(Error::Config("no finite step limit applies; set dt".into())),
    };
    if !(opts.t_end > 0.0) {
        return Err(Error::Config(format!("t_end must be positive, got {}", opts.t_end)));
    }
    let mut ctl = StepControllerState::new(dt0, if opts.controller { dt_cap } else { f64::INFINITY });
    ctl.osc_limit_fraction = opts.osc_limit_fraction;
    ctl.quiet_threshold = opts.quiet_threshold;
    let floor = 1e-12 * if dt_cap.is_finite() { dt_cap } else { dt0 };

    let sys = TransportSystem { problem, advection: opts.advection, stencil: opts.stencil, cg: opts.cg };
    let n = problem.temperature.len();
    let ny = problem.temperature.ny;
    let mut y: Vec<f64> = problem.temperature.values.iter().chain(&problem.concentration.values).copied().collect();
    let (t0, c0) = sys.fields(&y);
    let initial = row(0, 0.0, 0.0, max_line_count(&t0, opts.scan_vertical).max(max_line_count(&c0, opts.scan_vertical)), 0, &t0, &c0);

    let mut summary = SimulationSummary {
        scheme: method.label().to_string(),
        limits,
        dt_cap,
        initial,
        rows: Vec::new(),
        reductions: 0,
        repeated_steps: 0,
        growths: 0,
        failure: None,
        temperature: t0,
        concentration: c0,
        max_abs_t: 0.0,
    };
    let mut time = 0.0;
    let mut steps = 0;
    let fail = |s: &mut SimulationSummary, e: Error, step: usize, time: f64| {
        s.failure = Some(SimulationFailure { numerical: e.is_numerical(), message: e.to_string(), step, time });
    };

    while time < opts.t_end * (1.0 - 1e-12) && steps < opts.max_steps {
        if ctl.dt < floor {
            fail(&mut summary, Error::DtUnderflow { dt: ctl.dt, time }, steps, time);
            break;
        }
        let mut cg_iters = 0;
        let (y_new, dt_used, osc) = loop {
            let h = ctl.dt.min(opts.t_end - time);
            let rec = match step(method, &sys, time, &y, h) {
                Ok(r) => r,
                Err(e) => break (Err(e), h, 0),
            };
            cg_iters += rec.solver_iterations;
            let (t, c) = sys.fields(&rec.y_new);
            let osc = max_line_count(&t, opts.scan_vertical).max(max_line_count(&c, opts.scan_vertical));
            if !opts.controller {
                break (Ok(rec.y_new), h, osc);
            }
            let (next, action) = controller_update(&ctl, osc, ny);
            ctl = next;
            match action {
                ControllerAction::Reduced => {
                    summary.reductions += 1;
                    summary.repeated_steps += 1;
                    if ctl.dt < floor {
                        break (Err(Error::DtUnderflow { dt: ctl.dt, time }), h, osc);
                    }
                }
                ControllerAction::Grown => {
                    summary.growths += 1;
                    break (Ok(rec.y_new), h, osc);
                }
                _ => break (Ok(rec.y_new), h, osc),
            }
        };
        let y_new = match y_new {
            Ok(v) => v,
            Err(e) => {
                fail(&mut summary, e, steps + 1, time);
                break;
            }
        };
        steps += 1;
        time = if opts.t_end - (time + dt_used) <= 1e-12 * opts.t_end { opts.t_end } else { time + dt_used };
        y = y_new;
        let (t, c) = sys.fields(&y);
        let bad = y.iter().any(|v| !v.is_finite() || v.abs() > opts.blowup);
        summary.max_abs_t = summary.max_abs_t.max(t.max_abs());
        summary.rows.push(row(steps, time, dt_used, osc, cg_iters, &t, &c));
        if let Some(obs) = observer.as_mut() {
            obs(steps, time, &t, &c)?;
        }
        summary.temperature = t;
        summary.concentration = c;
        if bad {
            fail(&mut summary, Error::NonFinite { step: steps }, steps, time);
            break;
        }
    }
    debug_assert_eq!(summary.temperature.len(), n);
    Ok(summary)
}
