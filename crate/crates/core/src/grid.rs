//! Node-centred 2D grid fields, periodic in x.
//!
//! With Dirichlet walls the unknowns sit at `y_j = (j + 1)·dy`, `j = 0..ny`,
//! and the walls are the nodes `j = -1` and `j = ny`, so `dy = Ly/(ny + 1)`.
//! With periodic vertical boundaries `y_j = j·dy` and `dy = Ly/ny`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalBc {
    Dirichlet { bottom: f64, top: f64 },
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub bc: VerticalBc,
    /// Row-major: `values[j * nx + i]`.
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(nx: usize, ny: usize, dx: f64, dy: f64, bc: VerticalBc) -> Result<Self> {
        if nx == 0 || ny == 0 || !(dx > 0.0) || !(dy > 0.0) {
            return Err(Error::Shape(format!("grid {nx}x{ny} with spacing {dx}, {dy}")));
        }
        Ok(Self { nx, ny, dx, dy, bc, values: vec![0.0; nx * ny] })
    }

    /// Grid covering `[0, lx) × [0, ly]` with the spacing implied by `bc`.
    pub fn on_domain(nx: usize, ny: usize, lx: f64, ly: f64, bc: VerticalBc) -> Result<Self> {
        let dy = match bc {
            VerticalBc::Dirichlet { .. } => ly / (ny + 1) as f64,
            VerticalBc::Periodic => ly / ny as f64,
        };
        Self::zeros(nx, ny, lx / nx as f64, dy, bc)
    }

    pub fn from_fn(nx: usize, ny: usize, lx: f64, ly: f64, bc: VerticalBc, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut g = Self::on_domain(nx, ny, lx, ly, bc)?;
        for j in 0..ny {
            for i in 0..nx {
                g.values[j * nx + i] = f(g.x(i), g.y(j));
            }
        }
        Ok(g)
    }

    /// A field of the same layout holding `values`.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::Shape(format!("{} values for a {}x{} grid", values.len(), self.nx, self.ny)));
        }
        Ok(Self { values, ..self.clone() })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        match self.bc {
            VerticalBc::Dirichlet { .. } => (j + 1) as f64 * self.dy,
            VerticalBc::Periodic => j as f64 * self.dy,
        }
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    pub fn same_shape(&self, other: &GridField) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.nx..(j + 1) * self.nx]
    }

    /// Value at `(i, j)` with periodic wrap in x and, vertically, either
    /// periodic wrap or the wall value at `j = -1, ny` and odd reflection
    /// about the wall beyond it.
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let i = i.rem_euclid(self.nx as isize) as usize;
        Self::vertical(&self.values[i..], self.nx, self.ny, self.bc, j)
    }

    /// Column access through [`GridField::at`] rules on a strided slice.
    fn vertical(col: &[f64], stride: usize, ny: usize, bc: VerticalBc, j: isize) -> f64 {
        let n = ny as isize;
        match bc {
            VerticalBc::Periodic => col[j.rem_euclid(n) as usize * stride],
            VerticalBc::Dirichlet { bottom, top } => {
                if (0..n).contains(&j) {
                    col[j as usize * stride]
                } else if j == -1 {
                    bottom
                } else if j == n {
                    top
                } else if j < -1 {
                    2.0 * bottom - Self::vertical(col, stride, ny, bc, -2 - j)
                } else {
                    2.0 * top - Self::vertical(col, stride, ny, bc, 2 * n - j)
                }
            }
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sum of absolute jumps along every row (periodic) and column, walls included.
    pub fn total_variation(&self) -> f64 {
        let mut tv = 0.0;
        for j in 0..self.ny {
            let r = self.row(j);
            for i in 0..self.nx {
                tv += (r[(i + 1) % self.nx] - r[i]).abs();
            }
        }
        if self.ny > 1 || matches!(self.bc, VerticalBc::Dirichlet { .. }) {
            let (lo, hi) = match self.bc {
                VerticalBc::Periodic => (0, self.ny as isize),
                VerticalBc::Dirichlet { .. } => (-1, self.ny as isize),
            };
            for i in 0..self.nx as isize {
                for j in lo..hi {
                    tv += (self.at(i, j + 1) - self.at(i, j)).abs();
                }
            }
        }
        tv
    }

    /// Write a CSV with an `nx,ny,dx,dy` preamble followed by `i,j,x,y,value` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "nx,ny,dx,dy")?;
        writeln!(out, "{},{},{:e},{:e}", self.nx, self.ny, self.dx, self.dy)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "x", "y", "value"])?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    format!("{:e}", self.x(i)),
                    format!("{:e}", self.y(j)),
                    format!("{:e}", self.get(i, j)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
