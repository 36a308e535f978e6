//! The `imexlab` command line.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::accuracy::{self, ConvergenceReport};
use crate::advdiff::config::SimulationConfig;
use crate::advdiff::simulate::{run_simulation, SimulationSummary};
use crate::error::{Error, Result};
use crate::linear::{
    amplification, limit_class, locate_dissipativity_landmarks, scan_stability_region, z_left, DissipativityLandmarks,
    LimitClass, Stencil, ZLeft,
};
use crate::monotonicity::{radius, region_closed_form, region_numeric, MonotonicityRegion};
use crate::tableau::{builtin, Method, Scheme};

#[derive(Debug, Parser)]
#[command(name = "imexlab", version, about = "Analysis and testing of SSP IMEX Runge-Kutta methods")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stability regions, z_left and the limit at -infinity.
    Stability(StabilityArgs),
    /// First zero and unit-modulus crossing of g(pi, mu).
    Dissipativity(DissipativityArgs),
    /// Regions of absolute monotonicity.
    Monotonicity(MonotonicityArgs),
    /// Convergence orders and error constants on the tan test problem.
    Convergence(ConvergenceArgs),
    /// Error constant of imex_ssp2_222 across gamma.
    GammaSweep(GammaSweepArgs),
    /// Run an advection-diffusion configuration.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct SchemeArgs {
    /// Scheme names, comma separated or repeated; `all` for every builtin.
    #[arg(long = "scheme", value_delimiter = ',', required = true, num_args = 1..)]
    pub schemes: Vec<String>,
    /// Gamma for imex_ssp2_222.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Gamma values `lo:hi:step` for imex_ssp2_222.
    #[arg(long, conflicts_with = "gamma")]
    pub gamma_range: Option<String>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub schemes: SchemeArgs,
    /// Scan points per axis.
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    /// Real range `lo:hi` of the scan.
    #[arg(long, default_value = "-6:2", allow_hyphen_values = true)]
    pub re_range: String,
    /// Imaginary range `lo:hi` of the scan.
    #[arg(long, default_value = "-5:5", allow_hyphen_values = true)]
    pub im_range: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DissipativityArgs {
    #[command(flatten)]
    pub schemes: SchemeArgs,
    /// `3pt`, `4th` or `both`.
    #[arg(long, default_value = "both")]
    pub stencil: String,
    /// Theta samples in [0, pi] for the amplification profile.
    #[arg(long, default_value_t = 65)]
    pub resolution: usize,
    /// Mu values of the amplification profile.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,1,2,5")]
    pub mu: Vec<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MonotonicityArgs {
    #[command(flatten)]
    pub schemes: SchemeArgs,
    /// Grid points per unit of r in the numeric scan.
    #[arg(long, default_value_t = 200)]
    pub resolution: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub schemes: SchemeArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GammaSweepArgs {
    /// `lo:hi:step`.
    #[arg(long, default_value = "0.05:0.45:0.005")]
    pub gamma_range: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the perturbation seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else if matches!(e, Error::Io(_) | Error::Csv(_) | Error::Json(_)) {
        1
    } else {
        2
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidArgument(format!("expected lo:hi, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if !(a < b) {
        return Err(bad());
    }
    Ok((a, b))
}

/// `lo:hi:step`, inclusive of `hi` up to rounding.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("expected lo:hi:step, got `{s}`"));
    let v: Vec<f64> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
    let [lo, hi, step] = v[..] else { return Err(bad()) };
    if !(step > 0.0 && hi >= lo) {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}

/// Expand `--scheme`/`--gamma`/`--gamma-range` into concrete methods.
pub fn resolve_methods(a: &SchemeArgs) -> Result<Vec<(Scheme, Method)>> {
    let mut names: Vec<Scheme> = Vec::new();
    for s in a.schemes.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        if s == "all" {
            names.extend(Scheme::ALL);
        } else {
            names.push(s.parse()?);
        }
    }
    if names.is_empty() {
        return Err(Error::InvalidArgument("no schemes given".into()));
    }
    let family = names.contains(&Scheme::ImexSsp2_222);
    if !family && (a.gamma.is_some() || a.gamma_range.is_some()) {
        return Err(Error::GammaNotAccepted(names[0].name().into()));
    }
    let gammas = match &a.gamma_range {
        Some(r) => parse_range(r)?.into_iter().map(Some).collect(),
        None => vec![a.gamma],
    };
    let mut out = Vec::new();
    for s in names {
        if s == Scheme::ImexSsp2_222 {
            for &g in &gammas {
                out.push((s, builtin(s, g)?));
            }
        } else {
            out.push((s, builtin(s, None)?));
        }
    }
    Ok(out)
}

fn file_tag(m: &Method) -> String {
    match m.gamma() {
        Some(g) => format!("{}_g{g:.4}", m.label()),
        None => m.label().to_string(),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct StabilityRow {
    pub scheme: String,
    pub gamma: Option<f64>,
    pub z_left: ZLeft,
    pub limit_at_minus_infinity: LimitClass,
    pub max_modulus_imag_axis: f64,
    pub boundary_points: usize,
}

pub fn cmd_stability(a: &StabilityArgs) -> Result<Vec<StabilityRow>> {
    let methods = resolve_methods(&a.schemes)?;
    let (re, im) = (parse_pair(&a.re_range)?, parse_pair(&a.im_range)?);
    let mut rows = Vec::new();
    for (_, m) in &methods {
        let rep = scan_stability_region(m, re, im, a.resolution)?;
        let mut w = csv::Writer::from_writer(create(&a.out, &format!("stability_{}.csv", file_tag(m)))?);
        w.write_record(["re", "im"])?;
        for z in &rep.boundary {
            w.write_record([format!("{:e}", z.re), format!("{:e}", z.im)])?;
        }
        w.flush()?;
        rows.push(StabilityRow {
            scheme: m.label().into(),
            gamma: m.gamma(),
            z_left: rep.z_left,
            limit_at_minus_infinity: rep.limit_at_minus_infinity,
            max_modulus_imag_axis: rep.max_modulus_imag_axis,
            boundary_points: rep.boundary.len(),
        });
    }
    write_json(&a.out, "stability_summary.json", &rows)?;
    Ok(rows)
}

/// z_left and limit class only, without the boundary scan.
pub fn stability_summary(m: &Method) -> (ZLeft, LimitClass) {
    (z_left(m), limit_class(m))
}

#[derive(Debug, Serialize)]
pub struct DissipativityRow {
    pub scheme: String,
    pub gamma: Option<f64>,
    /// `implicit` for additive methods, `full` for plain ones.
    pub part: &'static str,
    pub stencil: &'static str,
    #[serde(flatten)]
    pub landmarks: DissipativityLandmarks,
}

pub fn cmd_dissipativity(a: &DissipativityArgs) -> Result<Vec<DissipativityRow>> {
    let methods = resolve_methods(&a.schemes)?;
    let stencils = match a.stencil.as_str() {
        "both" => vec![Stencil::ThreePoint, Stencil::FourthOrder],
        s => vec![s.parse()?],
    };
    if a.resolution < 2 {
        return Err(Error::InvalidArgument("need at least two theta samples".into()));
    }
    let mut rows = Vec::new();
    let mut w = csv::Writer::from_writer(create(&a.out, "dissipativity.csv")?);
    w.write_record(["scheme", "gamma", "part", "stencil", "first_zero", "unit_modulus"])?;
    let mut prof = csv::Writer::from_writer(create(&a.out, "amplification.csv")?);
    prof.write_record(["scheme", "gamma", "stencil", "theta", "mu", "g"])?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for (_, m) in &methods {
        let part = if matches!(m, Method::Additive(_)) { "implicit" } else { "full" };
        let t = m.diffusive_part();
        let g = opt(m.gamma());
        for &st in &stencils {
            let lm = locate_dissipativity_landmarks(t, st);
            w.write_record([m.label(), &g, part, st.name(), &opt(lm.first_zero), &opt(lm.unit_modulus)])?;
            for k in 0..a.resolution {
                let theta = std::f64::consts::PI * k as f64 / (a.resolution - 1) as f64;
                for &mu in &a.mu {
                    let v = amplification(t, st, theta, mu);
                    prof.write_record([m.label(), &g, st.name(), &format!("{theta:e}"), &format!("{mu:e}"), &format!("{v:e}")])?;
                }
            }
            rows.push(DissipativityRow { scheme: m.label().into(), gamma: m.gamma(), part, stencil: st.name(), landmarks: lm });
        }
    }
    w.flush()?;
    prof.flush()?;
    write_json(&a.out, "dissipativity_summary.json", &rows)?;
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct MonotonicityRow {
    pub scheme: String,
    pub gamma: Option<f64>,
    pub radius_explicit: f64,
    pub radius_implicit: f64,
    /// Extent of the joint region on the `r` axis; `null` for plain methods.
    pub joint_r_max: Option<f64>,
    /// Largest gap between the numeric boundary and the closed form, where one exists.
    pub closed_form_max_deviation: Option<f64>,
}

pub fn cmd_monotonicity(a: &MonotonicityArgs) -> Result<Vec<MonotonicityRow>> {
    let methods = resolve_methods(&a.schemes)?;
    if a.resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let step = 1.0 / a.resolution as f64;
    let mut rows = Vec::new();
    for (s, m) in &methods {
        let row = match m {
            Method::Additive(t) => {
                let region = region_numeric(t, 4.0, 8.0, step)?;
                write_region(&a.out, &format!("monotonicity_{}.csv", file_tag(m)), &region)?;
                let dev = match region_closed_form(*s, m.gamma()) {
                    Ok(cf) => Some(
                        region
                            .boundary
                            .iter()
                            .filter_map(|&(r, rt)| cf.rtilde_at(r).map(|c| (c - rt).abs()))
                            .fold(0.0, f64::max),
                    ),
                    Err(Error::NoClosedForm(_)) => None,
                    Err(e) => return Err(e),
                };
                MonotonicityRow {
                    scheme: m.label().into(),
                    gamma: m.gamma(),
                    radius_explicit: region.radius_explicit,
                    radius_implicit: region.radius_implicit,
                    joint_r_max: Some(region.joint_r_max),
                    closed_form_max_deviation: dev,
                }
            }
            Method::Plain { tableau, .. } => {
                let r = radius(tableau, 10.0);
                MonotonicityRow {
                    scheme: m.label().into(),
                    gamma: None,
                    radius_explicit: r,
                    radius_implicit: r,
                    joint_r_max: None,
                    closed_form_max_deviation: None,
                }
            }
        };
        rows.push(row);
    }
    write_json(&a.out, "monotonicity_summary.json", &rows)?;
    Ok(rows)
}

fn write_region(dir: &Path, name: &str, region: &MonotonicityRegion) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, name)?);
    w.write_record(["r", "rtilde"])?;
    for (r, rt) in &region.boundary {
        w.write_record([format!("{r:e}"), format!("{rt:e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_convergence(a: &ConvergenceArgs) -> Result<Vec<ConvergenceReport>> {
    let methods = resolve_methods(&a.schemes)?;
    let reports = methods
        .iter()
        .map(|(s, m)| accuracy::fit_error_constant(m, s.nominal_order()))
        .collect::<Result<Vec<_>>>()?;
    accuracy::write_csv(&reports, create(&a.out, "convergence.csv")?)?;
    write_json(&a.out, "convergence_summary.json", &reports)?;
    Ok(reports)
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    argmin_gamma: f64,
    min_constant: f64,
}

pub fn cmd_gamma_sweep(a: &GammaSweepArgs) -> Result<accuracy::GammaSweep> {
    let parts: Vec<f64> = a
        .gamma_range
        .split(':')
        .map(|p| p.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad gamma range `{}`", a.gamma_range))))
        .collect::<Result<_>>()?;
    let [lo, hi, step] = parts[..] else {
        return Err(Error::InvalidArgument(format!("expected lo:hi:step, got `{}`", a.gamma_range)));
    };
    let sweep = accuracy::gamma_sweep(lo, hi, step)?;
    let mut w = csv::Writer::from_writer(create(&a.out, "gamma_sweep.csv")?);
    w.write_record(["gamma", "fitted_constant", "fitted_order", "valid"])?;
    for r in &sweep.reports {
        w.write_record([
            format!("{:?}", r.gamma.unwrap_or(f64::NAN)),
            format!("{:e}", r.fitted_constant),
            format!("{:e}", r.fitted_order),
            r.valid.to_string(),
        ])?;
    }
    w.flush()?;
    write_json(&a.out, "gamma_sweep_summary.json", &SweepSummary { argmin_gamma: sweep.argmin_gamma, min_constant: sweep.min_constant })?;
    Ok(sweep)
}

#[derive(Debug, Serialize)]
pub struct ScanRow {
    pub dt: f64,
    pub completed: bool,
    pub steps: usize,
    pub max_tv_increase_t: f64,
    pub max_tv_increase_c: f64,
    pub reductions: usize,
    pub failure: Option<String>,
}

fn max_increase(first: f64, seq: impl Iterator<Item = f64>) -> f64 {
    let mut prev = first;
    seq.fold(f64::NEG_INFINITY, |m, v| {
        let d = v - prev;
        prev = v;
        m.max(d)
    })
}

fn simulate_into(cfg: &SimulationConfig, dt: Option<f64>, dir: &Path) -> Result<SimulationSummary> {
    let problem = cfg.problem()?;
    let method = cfg.method()?;
    let opts = cfg.options(dt);
    fs::create_dir_all(dir)?;
    let every = cfg.snapshot_every;
    let mut snap = |step: usize, _t: f64, tf: &crate::grid::GridField, cf: &crate::grid::GridField| -> Result<()> {
        if every > 0 && step.is_multiple_of(every) {
            tf.write_csv(create(dir, &format!("T_{step:06}.csv"))?)?;
            cf.write_csv(create(dir, &format!("c_{step:06}.csv"))?)?;
        }
        Ok(())
    };
    if every > 0 {
        problem.temperature.write_csv(create(dir, "T_000000.csv")?)?;
        problem.concentration.write_csv(create(dir, "c_000000.csv")?)?;
    }
    let summary = run_simulation(&problem, &method, &opts, Some(&mut snap))?;
    summary.write_trajectory_csv(create(dir, "trajectory.csv")?)?;
    write_json(dir, "summary.json", &summary)?;
    Ok(summary)
}

/// Runs the configuration; a failed single run is reported as an error
/// after its diagnostics are written. Scans record failures per row.
pub fn cmd_simulate(a: &SimulateArgs) -> Result<Vec<ScanRow>> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", a.config.display())))?;
    let mut cfg = SimulationConfig::parse(&text).map_err(|e| match e {
        Error::Parse { .. } | Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    })?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let Some(scan) = cfg.dt_scan else {
        let s = simulate_into(&cfg, None, &a.out)?;
        if let Some(f) = &s.failure {
            return Err(if f.numerical {
                Error::SimulationFailed { step: f.step, msg: f.message.clone() }
            } else {
                Error::Config(f.message.clone())
            });
        }
        return Ok(vec![scan_row(cfg.dt.unwrap_or(s.rows.first().map_or(0.0, |r| r.dt)), &s)]);
    };
    let mut rows = Vec::new();
    for (k, dt) in scan.values().into_iter().enumerate() {
        let s = simulate_into(&cfg, Some(dt), &a.out.join(format!("run_{k:02}")))?;
        rows.push(scan_row(dt, &s));
    }
    let mut w = csv::Writer::from_writer(create(&a.out, "scan.csv")?);
    w.write_record(["dt", "completed", "steps", "max_tv_increase_T", "max_tv_increase_c", "reductions", "failure"])?;
    for r in &rows {
        w.write_record([
            format!("{:e}", r.dt),
            r.completed.to_string(),
            r.steps.to_string(),
            format!("{:e}", r.max_tv_increase_t),
            format!("{:e}", r.max_tv_increase_c),
            r.reductions.to_string(),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

fn scan_row(dt: f64, s: &SimulationSummary) -> ScanRow {
    ScanRow {
        dt,
        completed: s.completed(),
        steps: s.rows.len(),
        max_tv_increase_t: max_increase(s.initial.tv_t, s.rows.iter().map(|r| r.tv_t)),
        max_tv_increase_c: max_increase(s.initial.tv_c, s.rows.iter().map(|r| r.tv_c)),
        reductions: s.reductions,
        failure: s.failure.as_ref().map(|f| f.message.clone()),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Stability(a) => cmd_stability(a).map(drop),
        Command::Dissipativity(a) => cmd_dissipativity(a).map(drop),
        Command::Monotonicity(a) => cmd_monotonicity(a).map(drop),
        Command::Convergence(a) => cmd_convergence(a).map(drop),
        Command::GammaSweep(a) => cmd_gamma_sweep(a).map(drop),
        Command::Simulate(a) => cmd_simulate(a).map(drop),
    }
}
