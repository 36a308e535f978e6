//! `g·φ - ∇·(h∇φ) = f` on a periodic-in-x grid, solved by a conjugate
//! gradient iteration.
//!
//! The iteration is the conjugate-residual member of the family: it keeps
//! CG's short recurrences and one product per iteration but minimises
//! `‖f - Aφ‖₂` over the Krylov space, so the residual never grows.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridField, VerticalBc};

/// A symmetric positive definite linear map on `R^n`.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct CgSettings {
    /// Target for `‖b - Ax‖₂ / ‖b‖₂`.
    pub tol: f64,
    pub max_iter: usize,
    pub jacobi: bool,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 2000, jacobi: false }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
    /// Relative residual before each iteration and after the last.
    pub history: Vec<f64>,
}

/// Iteration budget exhausted; `outcome` holds the last iterate.
#[derive(Debug, Clone)]
pub struct CgFailure {
    pub outcome: CgOutcome,
}

impl From<CgFailure> for Error {
    fn from(f: CgFailure) -> Self {
        Error::CgNotConverged { iterations: f.outcome.iterations, residual: f.outcome.residual }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn solve_cg(
    op: &impl SymmetricOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    s: CgSettings,
) -> std::result::Result<CgOutcome, CgFailure> {
    let n = op.dim();
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let bnorm = norm(b);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut r = vec![0.0; n];
    op.apply(&x, &mut r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let inv_diag: Option<Vec<f64>> = s.jacobi.then(|| op.diagonal().iter().map(|d| 1.0 / d).collect());
    let precond = |v: &[f64]| -> Vec<f64> {
        match &inv_diag {
            Some(m) => v.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => v.to_vec(),
        }
    };
    let mut rel = norm(&r) / scale;
    let mut history = vec![rel];
    if rel <= s.tol {
        return Ok(CgOutcome { x, iterations: 0, residual: rel, history });
    }
    let mut z = precond(&r);
    let mut az = vec![0.0; n];
    op.apply(&z, &mut az);
    let mut p = z.clone();
    let mut ap = az.clone();
    let mut zaz = dot(&z, &az);
    for it in 1..=s.max_iter {
        let map = precond(&ap);
        let denom = dot(&ap, &map);
        if !(denom > 0.0) || !(zaz > 0.0) {
            break;
        }
        let alpha = zaz / denom;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
            z[k] -= alpha * map[k];
        }
        rel = norm(&r) / scale;
        history.push(rel);
        if rel <= s.tol {
            return Ok(CgOutcome { x, iterations: it, residual: rel, history });
        }
        op.apply(&z, &mut az);
        let zaz_new = dot(&z, &az);
        let beta = zaz_new / zaz;
        zaz = zaz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
            ap[k] = az[k] + beta * ap[k];
        }
    }
    let iterations = history.len() - 1;
    Err(CgFailure { outcome: CgOutcome { x, iterations, residual: rel, history } })
}

/// Coefficients and data of one elliptic solve. All fields share a layout;
/// boundary values come from `rhs.bc`.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub g: GridField,
    pub h: GridField,
    pub rhs: GridField,
}

struct Faces {
    east: Vec<f64>,
    north: Vec<f64>,
    south: Vec<f64>,
}

impl EllipticProblem {
    pub fn new(g: GridField, h: GridField, rhs: GridField) -> Result<Self> {
        if !g.same_shape(&h) || !g.same_shape(&rhs) {
            return Err(Error::Shape("g, h and rhs must share a grid".into()));
        }
        if g.values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("g must be nonnegative".into()));
        }
        if h.values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("h must be nonnegative".into()));
        }
        Ok(Self { g, h, rhs })
    }

    fn faces(&self) -> Faces {
        let (nx, ny) = (self.h.nx, self.h.ny);
        let h = &self.h;
        let mut east = vec![0.0; nx * ny];
        let mut north = vec![0.0; nx * ny];
        let mut south = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let c = h.values[k];
                east[k] = 0.5 * (c + h.get((i + 1) % nx, j));
                let periodic = matches!(self.rhs.bc, VerticalBc::Periodic);
                north[k] = if j + 1 < ny {
                    0.5 * (c + h.get(i, j + 1))
                } else if periodic {
                    0.5 * (c + h.get(i, 0))
                } else {
                    c
                };
                south[k] = if j > 0 {
                    0.5 * (c + h.get(i, j - 1))
                } else if periodic {
                    0.5 * (c + h.get(i, ny - 1))
                } else {
                    c
                };
            }
        }
        Faces { east, north, south }
    }

    fn apply_with(&self, faces: &Faces, x: &[f64], out: &mut [f64], walls: (f64, f64)) {
        let (nx, ny) = (self.g.nx, self.g.ny);
        let (idx2, idy2) = (1.0 / (self.g.dx * self.g.dx), 1.0 / (self.g.dy * self.g.dy));
        let periodic = matches!(self.rhs.bc, VerticalBc::Periodic);
        out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            for i in 0..nx {
                let k = j * nx + i;
                let c = x[k];
                let e = x[j * nx + (i + 1) % nx];
                let w = x[j * nx + (i + nx - 1) % nx];
                let west_face = faces.east[j * nx + (i + nx - 1) % nx];
                let n = if j + 1 < ny {
                    x[k + nx]
                } else if periodic {
                    x[i]
                } else {
                    walls.1
                };
                let s = if j > 0 {
                    x[k - nx]
                } else if periodic {
                    x[(ny - 1) * nx + i]
                } else {
                    walls.0
                };
                let div = (faces.east[k] * (e - c) - west_face * (c - w)) * idx2
                    + (faces.north[k] * (n - c) - faces.south[k] * (c - s)) * idy2;
                row[i] = self.g.values[k] * c - div;
            }
        });
    }

    fn wall_values(&self) -> (f64, f64) {
        match self.rhs.bc {
            VerticalBc::Dirichlet { bottom, top } => (bottom, top),
            VerticalBc::Periodic => (0.0, 0.0),
        }
    }

    /// `Aφ` including the Dirichlet wall values, so affine in `φ`.
    pub fn apply_operator(&self, phi: &GridField) -> Result<GridField> {
        if !phi.same_shape(&self.g) {
            return Err(Error::Shape("phi does not match the problem grid".into()));
        }
        let mut out = vec![0.0; phi.len()];
        self.apply_with(&self.faces(), &phi.values, &mut out, self.wall_values());
        phi.with_values(out)
    }

    fn linear(&self) -> LinearPart<'_> {
        LinearPart { p: self, faces: self.faces() }
    }

    /// Solve for `φ`, starting from zero.
    pub fn solve(&self, s: CgSettings) -> Result<(GridField, usize, f64)> {
        self.solve_from(None, s)
    }

    pub fn solve_from(&self, guess: Option<&[f64]>, s: CgSettings) -> Result<(GridField, usize, f64)> {
        let lin = self.linear();
        // move the wall values to the right-hand side
        let mut a0 = vec![0.0; self.rhs.len()];
        self.apply_with(&lin.faces, &vec![0.0; self.rhs.len()], &mut a0, self.wall_values());
        let b: Vec<f64> = self.rhs.values.iter().zip(&a0).map(|(f, a)| f - a).collect();
        let out = solve_cg(&lin, &b, guess, s)?;
        Ok((self.rhs.with_values(out.x)?, out.iterations, out.residual))
    }
}

struct LinearPart<'a> {
    p: &'a EllipticProblem,
    faces: Faces,
}

impl SymmetricOperator for LinearPart<'_> {
    fn dim(&self) -> usize {
        self.p.g.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.p.apply_with(&self.faces, x, out, (0.0, 0.0));
    }

    fn diagonal(&self) -> Vec<f64> {
        let (idx2, idy2) = (1.0 / self.p.g.dx.powi(2), 1.0 / self.p.g.dy.powi(2));
        let nx = self.p.g.nx;
        (0..self.dim())
            .map(|k| {
                let west = self.faces.east[(k / nx) * nx + (k % nx + nx - 1) % nx];
                self.p.g.values[k]
                    + (self.faces.east[k] + west) * idx2
                    + (self.faces.north[k] + self.faces.south[k]) * idy2
            })
            .collect()
    }
}

/// Implicit diffusion stage `u - dt_coeff·∇·(κ∇u) = y*`, posed as
/// `g = 1/dt_coeff`, `h = κ`, `f = y*/dt_coeff`.
#[derive(Debug, Clone)]
pub struct DiffusionStageSolver {
    pub kappa: GridField,
    pub dt_coeff: f64,
    pub settings: CgSettings,
}

pub fn stage_solver_for_diffusion(kappa: &GridField, dt_coeff: f64, settings: CgSettings) -> Result<DiffusionStageSolver> {
    if !(dt_coeff > 0.0) {
        return Err(Error::InvalidArgument(format!("dt_coeff must be positive, got {dt_coeff}")));
    }
    Ok(DiffusionStageSolver { kappa: kappa.clone(), dt_coeff, settings })
}

impl DiffusionStageSolver {
    /// Solution and iteration count; boundary values are taken from `y_star.bc`.
    pub fn solve(&self, y_star: &GridField, guess: Option<&[f64]>) -> Result<(GridField, usize)> {
        let inv = 1.0 / self.dt_coeff;
        let g = y_star.with_values(vec![inv; y_star.len()])?;
        let f = y_star.with_values(y_star.values.iter().map(|v| v * inv).collect())?;
        let p = EllipticProblem::new(g, self.kappa.clone(), f)?;
        let (u, it, _) = p.solve_from(guess, self.settings)?;
        Ok((u, it))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dirichlet0() -> VerticalBc {
        VerticalBc::Dirichlet { bottom: 0.0, top: 0.0 }
    }

    fn constant(like: &GridField, v: f64) -> GridField {
        like.with_values(vec![v; like.len()]).unwrap()
    }

    fn random(like: &GridField, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        like.with_values((0..like.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn positive(like: &GridField, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        like.with_values((0..like.len()).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap()
    }

    #[test]
    fn identity_when_h_vanishes() {
        let grid = GridField::on_domain(6, 5, 1.0, 1.0, dirichlet0()).unwrap();
        let phi = random(&grid, 1);
        let p = EllipticProblem::new(constant(&grid, 1.0), constant(&grid, 0.0), phi.clone()).unwrap();
        assert_eq!(p.apply_operator(&phi).unwrap().values, phi.values);
        let (sol, it, _) = p.solve(CgSettings::default()).unwrap();
        assert_eq!(it, 1);
        for (a, b) in sol.values.iter().zip(&phi.values) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn constants_are_in_the_null_space() {
        let grid = GridField::on_domain(8, 6, 2.0, 1.0, VerticalBc::Periodic).unwrap();
        let p = EllipticProblem::new(constant(&grid, 0.0), positive(&grid, 3), constant(&grid, 0.0)).unwrap();
        let out = p.apply_operator(&constant(&grid, 3.7)).unwrap();
        assert!(out.max_abs() < 1e-12);
    }

    fn manufactured_error(n: usize) -> f64 {
        let exact = |x: f64, y: f64| (2.0 * PI * x).sin() * (PI * y).sin();
        let grid = GridField::on_domain(n, n, 1.0, 1.0, dirichlet0()).unwrap();
        let f = GridField::from_fn(n, n, 1.0, 1.0, dirichlet0(), |x, y| (1.0 + 5.0 * PI * PI) * exact(x, y)).unwrap();
        let p = EllipticProblem::new(constant(&grid, 1.0), constant(&grid, 1.0), f).unwrap();
        let (sol, _, _) = p.solve(CgSettings { tol: 1e-13, max_iter: 5000, jacobi: false }).unwrap();
        let want = GridField::from_fn(n, n, 1.0, 1.0, dirichlet0(), exact).unwrap();
        sol.values.iter().zip(&want.values).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let e: Vec<f64> = [16, 32, 64].iter().map(|&n| manufactured_error(n)).collect();
        for w in e.windows(2) {
            assert!((w[0] / w[1] - 4.0).abs() < 0.6, "{e:?}");
        }
    }

    #[test]
    fn operator_converges_on_manufactured_field() {
        let exact = |x: f64, y: f64| (2.0 * PI * x).sin() * (PI * y).sin();
        let err = |n: usize| {
            let phi = GridField::from_fn(n, n, 1.0, 1.0, dirichlet0(), exact).unwrap();
            let p = EllipticProblem::new(constant(&phi, 1.0), constant(&phi, 1.0), phi.clone()).unwrap();
            let a = p.apply_operator(&phi).unwrap();
            a.values
                .iter()
                .zip(&phi.values)
                .fold(0.0, |m, (a, v)| f64::max(m, (a - (1.0 + 5.0 * PI * PI) * v).abs()))
        };
        let (e1, e2) = (err(32), err(64));
        assert!((e1 / e2 - 4.0).abs() < 0.6, "{e1} {e2}");
    }

    #[test]
    fn round_trip_with_variable_coefficients_and_walls() {
        let bc = VerticalBc::Dirichlet { bottom: 1.0, top: -2.0 };
        let grid = GridField::on_domain(24, 20, 1.0, 1.0, bc).unwrap();
        let known = random(&grid, 7);
        for jacobi in [false, true] {
            let p0 = EllipticProblem::new(positive(&grid, 8), positive(&grid, 9), constant(&grid, 0.0)).unwrap();
            let f = p0.apply_operator(&known).unwrap();
            let p = EllipticProblem { rhs: f, ..p0 };
            let (sol, _, res) = p.solve(CgSettings { tol: 1e-10, max_iter: 5000, jacobi }).unwrap();
            assert!(res <= 1e-10);
            let err = sol.values.iter().zip(&known.values).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
            assert!(err < 1e-8, "jacobi={jacobi}: {err}");
        }
    }

    #[test]
    fn budget_exhaustion_keeps_the_iterate() {
        let grid = GridField::on_domain(32, 32, 1.0, 1.0, dirichlet0()).unwrap();
        let p = EllipticProblem::new(constant(&grid, 0.0), constant(&grid, 1.0), random(&grid, 2)).unwrap();
        let lin = p.linear();
        match solve_cg(&lin, &p.rhs.values, None, CgSettings { tol: 1e-14, max_iter: 3, jacobi: false }) {
            Err(f) => {
                assert_eq!(f.outcome.iterations, 3);
                assert!(f.outcome.residual < 1.0);
                let e: Error = f.into();
                assert!(e.is_numerical());
            }
            Ok(_) => panic!("three iterations cannot reach 1e-14"),
        }
    }

    #[test]
    fn one_dimensional_slice_matches_dense_solve() {
        let bc = VerticalBc::Dirichlet { bottom: 0.5, top: 2.0 };
        let kappa = GridField::from_fn(1, 16, 1.0, 1.0, bc, |_, y| 1.0 + y * y).unwrap();
        let y_star = GridField::from_fn(1, 16, 1.0, 1.0, bc, |_, y| (3.0 * y).cos()).unwrap();
        let dt_coeff = 0.01;
        let s = stage_solver_for_diffusion(&kappa, dt_coeff, CgSettings { tol: 1e-14, ..Default::default() }).unwrap();
        let (u, _) = s.solve(&y_star, None).unwrap();

        let n = 16;
        let dy2 = kappa.dy * kappa.dy;
        let face = |j: isize| -> f64 {
            // face between j and j+1; walls take the adjacent node value
            let k = |m: isize| kappa.values[m.clamp(0, n as isize - 1) as usize];
            if j < 0 || j >= n as isize - 1 { k(j.clamp(0, n as isize - 1)) } else { 0.5 * (k(j) + k(j + 1)) }
        };
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for j in 0..n {
            let (hs, hn) = (face(j as isize - 1), face(j as isize));
            m[(j, j)] = 1.0 / dt_coeff + (hs + hn) / dy2;
            if j > 0 {
                m[(j, j - 1)] = -hs / dy2;
            } else {
                rhs[j] += hs * 0.5 / dy2;
            }
            if j + 1 < n {
                m[(j, j + 1)] = -hn / dy2;
            } else {
                rhs[j] += hn * 2.0 / dy2;
            }
            rhs[j] += y_star.values[j] / dt_coeff;
        }
        let dense = m.lu().solve(&rhs).unwrap();
        for j in 0..n {
            assert!((u.values[j] - dense[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn stage_solver_limits() {
        let bc = VerticalBc::Dirichlet { bottom: 3.0, top: 3.0 };
        let grid = GridField::on_domain(8, 8, 1.0, 1.0, bc).unwrap();
        let s = stage_solver_for_diffusion(&constant(&grid, 0.7), 0.5, CgSettings::default()).unwrap();
        let (u, _) = s.solve(&constant(&grid, 3.0), None).unwrap();
        assert!(u.values.iter().all(|v| (v - 3.0).abs() < 1e-10));

        let y = random(&grid, 4);
        let s = stage_solver_for_diffusion(&constant(&grid, 0.7), 1e-9, CgSettings::default()).unwrap();
        let (u, _) = s.solve(&y, None).unwrap();
        assert!(u.values.iter().zip(&y.values).all(|(a, b)| (a - b).abs() < 1e-6));
        assert!(stage_solver_for_diffusion(&grid, 0.0, CgSettings::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn operator_is_symmetric(seed in any::<u64>(), periodic in any::<bool>()) {
            let bc = if periodic { VerticalBc::Periodic } else { dirichlet0() };
            let grid = GridField::on_domain(9, 7, 1.3, 0.8, bc).unwrap();
            let p = EllipticProblem::new(positive(&grid, seed), positive(&grid, seed ^ 1), constant(&grid, 0.0)).unwrap();
            let (phi, psi) = (random(&grid, seed ^ 2), random(&grid, seed ^ 3));
            let a_phi = p.apply_operator(&phi).unwrap();
            let a_psi = p.apply_operator(&psi).unwrap();
            let w = grid.dx * grid.dy;
            let l = w * dot(&a_phi.values, &psi.values);
            let r = w * dot(&phi.values, &a_psi.values);
            prop_assert!((l - r).abs() <= 1e-12 * l.abs().max(1.0));
        }

        #[test]
        fn stage_solve_keeps_nonnegative_data_nonnegative(seed in any::<u64>()) {
            let grid = GridField::on_domain(12, 10, 1.0, 1.0, dirichlet0()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = grid.with_values((0..grid.len()).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
            let p = EllipticProblem::new(positive(&grid, seed ^ 5), positive(&grid, seed ^ 6), f).unwrap();
            let tol = 1e-12;
            let (sol, _, _) = p.solve(CgSettings { tol, max_iter: 5000, jacobi: false }).unwrap();
            prop_assert!(sol.min() >= -tol);
        }

        #[test]
        fn residual_never_grows(seed in any::<u64>()) {
            let grid = GridField::on_domain(16, 12, 1.0, 1.0, dirichlet0()).unwrap();
            let p = EllipticProblem::new(constant(&grid, 0.0), positive(&grid, seed), random(&grid, seed ^ 9)).unwrap();
            let lin = p.linear();
            let out = solve_cg(&lin, &p.rhs.values, None, CgSettings { tol: 1e-12, max_iter: 5000, jacobi: false }).unwrap();
            for w in out.history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }
}
