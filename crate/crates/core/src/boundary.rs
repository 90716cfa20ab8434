//! Dirichlet data for `xi` and `eta` on the physical boundary.
//!
//! `xi` is 0 on the left edge and 1 on the right edge; `eta` is 0 at the
//! bottom and 1 at the top. On the remaining edges each coordinate solves the
//! one-dimensional Winslow equation `((1/w) u_s)_s = 0` with the weight
//! restricted to that edge.

use crate::error::{Error, Result};
use crate::geometry::{Point, StructuredGrid};
use crate::monitor::MonitorField;

/// Distance within which an exit point is snapped onto the boundary.
pub const PROJECTION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Coordinate {
    Xi,
    Eta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    pub t: f64,
    pub grid: StructuredGrid,
    /// `xi` along `y = y_l`, indexed by node column.
    pub xi_bottom: Vec<f64>,
    /// `xi` along `y = y_u`.
    pub xi_top: Vec<f64>,
    /// `eta` along `x = x_l`, indexed by node row.
    pub eta_left: Vec<f64>,
    /// `eta` along `x = x_r`.
    pub eta_right: Vec<f64>,
}

/// Solve the conservative three-point discretisation of `((1/w) u_s)_s = 0`
/// with `u = 0` at the first node and `u = 1` at the last. Face coefficients
/// are the arithmetic mean of `1/w` at the neighbouring nodes.
pub fn solve_edge_1d(w_edge: &[f64]) -> Result<Vec<f64>> {
    let n = w_edge.len();
    if n < 2 {
        return Err(Error::InvalidGrid(format!("edge needs at least 2 nodes, got {n}")));
    }
    if let Some((index, &value)) = w_edge.iter().enumerate().find(|(_, w)| w.is_nan() || **w <= 0.0) {
        return Err(Error::NonPositiveWeight { index, value });
    }
    let face: Vec<f64> = w_edge
        .windows(2)
        .map(|p| 0.5 * (1.0 / p[0] + 1.0 / p[1]))
        .collect();

    let mut u = vec![0.0; n];
    u[n - 1] = 1.0;
    let m = n - 2;
    if m == 0 {
        return Ok(u);
    }
    // Thomas algorithm on the interior unknowns u_1..u_{n-2}.
    let mut c_prime = vec![0.0; m];
    let mut d_prime = vec![0.0; m];
    for k in 0..m {
        let lower = -face[k];
        let diag = face[k] + face[k + 1];
        let upper = -face[k + 1];
        let rhs = if k + 1 == m { face[k + 1] } else { 0.0 };
        let (cp, dp) = if k == 0 {
            (0.0, 0.0)
        } else {
            (c_prime[k - 1], d_prime[k - 1])
        };
        let denom = diag - lower * cp;
        c_prime[k] = upper / denom;
        d_prime[k] = (rhs - lower * dp) / denom;
    }
    u[m] = d_prime[m - 1];
    for k in (0..m - 1).rev() {
        u[k + 1] = d_prime[k] - c_prime[k] * u[k + 2];
    }
    Ok(u)
}

pub fn build_boundary_data(t: f64, w: &MonitorField) -> Result<BoundaryData> {
    let field = &w.w;
    let g = *field.grid();
    let row = |j: usize| (0..g.nx).map(|i| field.at(i, j)).collect::<Vec<_>>();
    let col = |i: usize| (0..g.ny).map(|j| field.at(i, j)).collect::<Vec<_>>();
    Ok(BoundaryData {
        t,
        grid: g,
        xi_bottom: solve_edge_1d(&row(0))?,
        xi_top: solve_edge_1d(&row(g.ny - 1))?,
        eta_left: solve_edge_1d(&col(0))?,
        eta_right: solve_edge_1d(&col(g.nx - 1))?,
    })
}

fn lerp_profile(profile: &[f64], s: f64) -> f64 {
    let n = profile.len();
    let k = (s.floor().max(0.0) as usize).min(n - 2);
    let f = (s - k as f64).clamp(0.0, 1.0);
    (1.0 - f) * profile[k] + f * profile[k + 1]
}

impl BoundaryData {
    /// Uniform-weight data: linear profiles on every edge.
    pub fn uniform(t: f64, grid: &StructuredGrid) -> Self {
        let lin = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|k| if k + 1 == n { 1.0 } else { k as f64 / (n - 1) as f64 })
                .collect()
        };
        BoundaryData {
            t,
            grid: *grid,
            xi_bottom: lin(grid.nx),
            xi_top: lin(grid.nx),
            eta_left: lin(grid.ny),
            eta_right: lin(grid.ny),
        }
    }

    /// Value of `which` at boundary node `(i, j)`.
    pub fn node_value(&self, which: Coordinate, i: usize, j: usize) -> Result<f64> {
        let g = &self.grid;
        if i >= g.nx || j >= g.ny {
            return Err(Error::IndexOutOfRange { i, j, nx: g.nx, ny: g.ny });
        }
        match which {
            Coordinate::Xi => {
                if i == 0 {
                    Ok(0.0)
                } else if i + 1 == g.nx {
                    Ok(1.0)
                } else if j == 0 {
                    Ok(self.xi_bottom[i])
                } else if j + 1 == g.ny {
                    Ok(self.xi_top[i])
                } else {
                    Err(Error::NotOnBoundary { x: g.x(i), y: g.y(j) })
                }
            }
            Coordinate::Eta => {
                if j == 0 {
                    Ok(0.0)
                } else if j + 1 == g.ny {
                    Ok(1.0)
                } else if i == 0 {
                    Ok(self.eta_left[j])
                } else if i + 1 == g.nx {
                    Ok(self.eta_right[j])
                } else {
                    Err(Error::NotOnBoundary { x: g.x(i), y: g.y(j) })
                }
            }
        }
    }

    /// Snap `p` onto the boundary if it lies within [`PROJECTION_TOL`] of it.
    pub fn project(&self, p: Point) -> Result<Point> {
        let d = self.grid.domain;
        let near = |a: f64, b: f64| (a - b).abs() <= PROJECTION_TOL;
        let in_x = p.x >= d.x_l - PROJECTION_TOL && p.x <= d.x_r + PROJECTION_TOL;
        let in_y = p.y >= d.y_l - PROJECTION_TOL && p.y <= d.y_u + PROJECTION_TOL;
        let on_vertical = (near(p.x, d.x_l) || near(p.x, d.x_r)) && in_y;
        let on_horizontal = (near(p.y, d.y_l) || near(p.y, d.y_u)) && in_x;
        if !(on_vertical || on_horizontal) {
            return Err(Error::NotOnBoundary { x: p.x, y: p.y });
        }
        let mut q = Point::new(p.x.clamp(d.x_l, d.x_r), p.y.clamp(d.y_l, d.y_u));
        if near(q.x, d.x_l) {
            q.x = d.x_l;
        } else if near(q.x, d.x_r) {
            q.x = d.x_r;
        }
        if near(q.y, d.y_l) {
            q.y = d.y_l;
        } else if near(q.y, d.y_u) {
            q.y = d.y_u;
        }
        Ok(q)
    }

    /// Dirichlet value of `which` at a boundary point (the `f(X(tau))` term).
    pub fn eval_boundary(&self, which: Coordinate, p: Point) -> Result<f64> {
        let q = self.project(p)?;
        let g = &self.grid;
        let d = g.domain;
        let sx = (q.x - d.x_l) / g.hx;
        let sy = (q.y - d.y_l) / g.hy;
        Ok(match which {
            Coordinate::Xi => {
                if q.x == d.x_l {
                    0.0
                } else if q.x == d.x_r {
                    1.0
                } else if q.y == d.y_l {
                    lerp_profile(&self.xi_bottom, sx)
                } else {
                    lerp_profile(&self.xi_top, sx)
                }
            }
            Coordinate::Eta => {
                if q.y == d.y_l {
                    0.0
                } else if q.y == d.y_u {
                    1.0
                } else if q.x == d.x_l {
                    lerp_profile(&self.eta_left, sy)
                } else {
                    lerp_profile(&self.eta_right, sy)
                }
            }
        })
    }
}
