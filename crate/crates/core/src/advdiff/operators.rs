//! Spatial operators: conservative upwind/ENO advection and centred
//! diffusion stencils written in flux form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridField, VerticalBc};
use crate::linear::Stencil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    Upwind1,
    /// Two-candidate ENO: the smaller of the one-sided slopes.
    Eno2,
}

impl std::str::FromStr for AdvectionScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upwind1" => Ok(Self::Upwind1),
            "eno2" => Ok(Self::Eno2),
            _ => Err(Error::InvalidArgument(format!("unknown advection scheme `{s}` (upwind1 or eno2)"))),
        }
    }
}

/// Face-normal velocities. `u[j*nx + i]` sits on the face between nodes `i`
/// and `i+1` of row `j`; `v[j*nx + i]` on the face below node `(i, j)`, with
/// `j = ny` the face above the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub nx: usize,
    pub ny: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Velocity {
    pub fn zero(grid: &GridField) -> Self {
        Self { nx: grid.nx, ny: grid.ny, u: vec![0.0; grid.len()], v: vec![0.0; grid.len() + grid.nx] }
    }

    pub fn uniform(grid: &GridField, u0: f64, v0: f64) -> Result<Self> {
        if v0 != 0.0 && matches!(grid.bc, VerticalBc::Dirichlet { .. }) {
            return Err(Error::InvalidArgument("vertical velocity must vanish at Dirichlet walls".into()));
        }
        Ok(Self { nx: grid.nx, ny: grid.ny, u: vec![u0; grid.len()], v: vec![v0; grid.len() + grid.nx] })
    }

    /// Cellular flow from a stream function sampled at cell corners, so the
    /// discrete divergence vanishes identically. With Dirichlet walls the
    /// stream function is zero on the wall faces.
    pub fn cellular(grid: &GridField, amplitude: f64) -> Self {
        let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx, grid.dy);
        let lx = nx as f64 * dx;
        let psi = |xc: f64, jf: usize| -> f64 {
            // jf indexes faces: the face below node jf
            let s = match grid.bc {
                VerticalBc::Dirichlet { .. } => std::f64::consts::PI * jf as f64 / ny as f64,
                VerticalBc::Periodic => 2.0 * std::f64::consts::PI * jf as f64 / ny as f64,
            };
            amplitude * (2.0 * std::f64::consts::PI * xc / lx).sin() * s.sin()
        };
        let mut vel = Self::zero(grid);
        for j in 0..ny {
            for i in 0..nx {
                let xe = (i as f64 + 0.5) * dx;
                vel.u[j * nx + i] = (psi(xe, j + 1) - psi(xe, j)) / dy;
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                let (xe, xw) = ((i as f64 + 0.5) * dx, (i as f64 - 0.5) * dx);
                vel.v[j * nx + i] = -(psi(xe, j) - psi(xw, j)) / dx;
            }
        }
        vel
    }

    pub fn max_speed(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0, |m, x| m.max(x.abs()))
    }

    fn check(&self, f: &GridField) -> Result<()> {
        if self.nx != f.nx || self.ny != f.ny {
            return Err(Error::Shape("velocity does not match the field grid".into()));
        }
        Ok(())
    }
}

fn face_value(scheme: AdvectionScheme, vel: f64, line: impl Fn(isize) -> f64) -> f64 {
    // face between offsets 0 and 1; slopes taken left to right
    let smaller = |a: f64, b: f64| if a.abs() <= b.abs() { a } else { b };
    match (scheme, vel >= 0.0) {
        (AdvectionScheme::Upwind1, true) => line(0),
        (AdvectionScheme::Upwind1, false) => line(1),
        (AdvectionScheme::Eno2, true) => line(0) + 0.5 * smaller(line(0) - line(-1), line(1) - line(0)),
        (AdvectionScheme::Eno2, false) => line(1) - 0.5 * smaller(line(1) - line(0), line(2) - line(1)),
    }
}

/// `-(u ∂x + v ∂y)φ` in conservative flux form.
pub fn advect(field: &GridField, vel: &Velocity, scheme: AdvectionScheme) -> Result<GridField> {
    vel.check(field)?;
    let (nx, ny) = (field.nx, field.ny);
    let mut fx = vec![0.0; nx * ny];
    let mut fy = vec![0.0; nx * (ny + 1)];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let u = vel.u[k];
            let (ii, jj) = (i as isize, j as isize);
            fx[k] = u * face_value(scheme, u, |o| field.at(ii + o, jj));
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let v = vel.v[j * nx + i];
            if v != 0.0 {
                let (ii, jj) = (i as isize, j as isize - 1);
                fy[j * nx + i] = v * face_value(scheme, v, |o| field.at(ii, jj + o));
            }
        }
    }
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let west = fx[j * nx + (i + nx - 1) % nx];
            let (south, north) = match field.bc {
                VerticalBc::Periodic => (fy[j * nx + i], fy[((j + 1) % ny) * nx + i]),
                VerticalBc::Dirichlet { .. } => (fy[j * nx + i], fy[(j + 1) * nx + i]),
            };
            out[k] = -(fx[k] - west) / field.dx - (north - south) / field.dy;
        }
    }
    field.with_values(out)
}

/// Flux through the face between offsets 0 and 1 of a line, in units of `1/h`.
fn diffusive_flux(stencil: Stencil, line: impl Fn(isize) -> f64) -> f64 {
    match stencil {
        Stencil::ThreePoint => line(1) - line(0),
        Stencil::FourthOrder => (-line(2) + 15.0 * line(1) - 15.0 * line(0) + line(-1)) / 12.0,
    }
}

fn vertical_active(f: &GridField) -> bool {
    !(f.ny == 1 && matches!(f.bc, VerticalBc::Periodic))
}

fn check_stencil_size(f: &GridField, stencil: Stencil) -> Result<()> {
    if stencil == Stencil::FourthOrder && (f.nx < 5 || (vertical_active(f) && f.ny < 5)) {
        return Err(Error::Shape(format!("fourth-order stencil needs 5 points per direction, grid is {}x{}", f.nx, f.ny)));
    }
    Ok(())
}

/// The centred second-difference Laplacian, `Σ_dir (F_{+½} - F_{-½})/h²`.
pub fn diffuse_stencil(field: &GridField, stencil: Stencil) -> Result<GridField> {
    check_stencil_size(field, stencil)?;
    let (nx, ny) = (field.nx as isize, field.ny as isize);
    let (idx2, idy2) = (1.0 / field.dx.powi(2), 1.0 / field.dy.powi(2));
    let vert = vertical_active(field);
    let mut out = Vec::with_capacity(field.len());
    for j in 0..ny {
        for i in 0..nx {
            let fe = diffusive_flux(stencil, |o| field.at(i + o, j));
            let fw = diffusive_flux(stencil, |o| field.at(i - 1 + o, j));
            let mut l = (fe - fw) * idx2;
            if vert {
                let fn_ = diffusive_flux(stencil, |o| field.at(i, j + o));
                let fs = diffusive_flux(stencil, |o| field.at(i, j - 1 + o));
                l += (fn_ - fs) * idy2;
            }
            out.push(l);
        }
    }
    field.with_values(out)
}

/// Net diffusive flux through the walls, so that the sum of
/// [`diffuse_stencil`] over the grid equals this value exactly in exact
/// arithmetic. Zero for periodic vertical boundaries.
pub fn wall_flux(field: &GridField, stencil: Stencil) -> f64 {
    if matches!(field.bc, VerticalBc::Periodic) {
        return 0.0;
    }
    let ny = field.ny as isize;
    let idy2 = 1.0 / field.dy.powi(2);
    (0..field.nx as isize)
        .map(|i| {
            let top = diffusive_flux(stencil, |o| field.at(i, ny - 1 + o));
            let bottom = diffusive_flux(stencil, |o| field.at(i, -1 + o));
            (top - bottom) * idy2
        })
        .sum()
}

/// Diagonal of the homogeneous diffusion operator.
pub fn stencil_centre(field: &GridField, stencil: Stencil) -> f64 {
    let w = -stencil.weights()[stencil.reach()];
    let mut d = w / field.dx.powi(2);
    if vertical_active(field) {
        d += w / field.dy.powi(2);
    }
    d
}
