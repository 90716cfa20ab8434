//! Mesh density (monitor) functions, the Winslow drift `b = -grad(w)/w`, and
//! bilinear interpolation of nodal fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, ScalarField, StructuredGrid};

/// A time-dependent density `rho(t, x, y)`. The mesh weight is `w = 1/rho`.
pub trait Monitor: Send + Sync {
    fn rho(&self, t: f64, p: Point) -> f64;
}

impl<F> Monitor for F
where
    F: Fn(f64, Point) -> f64 + Send + Sync,
{
    fn rho(&self, t: f64, p: Point) -> f64 {
        self(t, p)
    }
}

/// Ring of radius 1/10 whose centre circles `(1/2, 1/2)` with radius 1/4 and
/// period 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotatingRingParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RotatingRingParams {
    fn default() -> Self {
        RotatingRingParams {
            alpha: 10.0,
            beta: -50.0,
        }
    }
}

pub fn rho(t: f64, p: Point, params: &RotatingRingParams) -> f64 {
    let cx = 0.5 + 0.25 * (2.0 * PI * t).cos();
    let cy = 0.5 + 0.25 * (2.0 * PI * t).sin();
    let r2 = (p.x - cx).powi(2) + (p.y - cy).powi(2);
    1.0 + params.alpha * (params.beta * (r2 - 0.01).abs()).exp()
}

impl Monitor for RotatingRingParams {
    fn rho(&self, t: f64, p: Point) -> f64 {
        rho(t, p, self)
    }
}

/// `rho = 1` everywhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformMonitor;

impl Monitor for UniformMonitor {
    fn rho(&self, _t: f64, _p: Point) -> f64 {
        1.0
    }
}

/// Weight `w` sampled at the nodes and frozen over a time step.
#[derive(Clone, Debug)]
pub struct MonitorField {
    pub t_frozen: f64,
    pub w: ScalarField,
}

impl MonitorField {
    /// Nodal density `rho = 1/w`.
    pub fn rho(&self) -> ScalarField {
        self.w.map(|w| 1.0 / w)
    }
}

pub fn sample_monitor(t: f64, grid: &StructuredGrid, monitor: &dyn Monitor) -> MonitorField {
    MonitorField {
        t_frozen: t,
        w: ScalarField::from_fn(*grid, |p| 1.0 / monitor.rho(t, p)),
    }
}

/// Nodal drift components `b1`, `b2`.
#[derive(Clone, Debug)]
pub struct DriftField {
    pub b1: ScalarField,
    pub b2: ScalarField,
}

impl DriftField {
    pub fn zero(grid: &StructuredGrid) -> Self {
        DriftField {
            b1: ScalarField::constant(*grid, 0.0),
            b2: ScalarField::constant(*grid, 0.0),
        }
    }

    pub fn constant(grid: &StructuredGrid, b: (f64, f64)) -> Self {
        DriftField {
            b1: ScalarField::constant(*grid, b.0),
            b2: ScalarField::constant(*grid, b.1),
        }
    }

    pub fn grid(&self) -> &StructuredGrid {
        self.b1.grid()
    }

    /// Bilinearly interpolated drift at `p`. Points outside the grid rectangle
    /// are clamped onto it; path simulation never evaluates there.
    #[inline]
    pub fn at(&self, p: Point) -> (f64, f64) {
        let g = self.grid();
        let d = g.domain;
        let q = Point::new(p.x.clamp(d.x_l, d.x_r), p.y.clamp(d.y_l, d.y_u));
        let (i, j, tx, ty) = g.locate(q).expect("clamped point lies in grid");
        (
            bilinear_cell(&self.b1, i, j, tx, ty),
            bilinear_cell(&self.b2, i, j, tx, ty),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.b1
            .values()
            .iter()
            .chain(self.b2.values())
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Centred differences at interior nodes, first-order one-sided differences
/// on the boundary rows and columns.
pub fn drift_from_monitor(w: &MonitorField) -> Result<DriftField> {
    let field = &w.w;
    if let Some((index, &value)) = field.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositiveWeight { index, value });
    }
    let g = *field.grid();
    let mut b1 = ScalarField::constant(g, 0.0);
    let mut b2 = ScalarField::constant(g, 0.0);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let wx = if i == 0 {
                (field.at(1, j) - field.at(0, j)) / g.hx
            } else if i + 1 == g.nx {
                (field.at(i, j) - field.at(i - 1, j)) / g.hx
            } else {
                (field.at(i + 1, j) - field.at(i - 1, j)) / (2.0 * g.hx)
            };
            let wy = if j == 0 {
                (field.at(i, 1) - field.at(i, 0)) / g.hy
            } else if j + 1 == g.ny {
                (field.at(i, j) - field.at(i, j - 1)) / g.hy
            } else {
                (field.at(i, j + 1) - field.at(i, j - 1)) / (2.0 * g.hy)
            };
            let wv = field.at(i, j);
            b1.set(i, j, -wx / wv);
            b2.set(i, j, -wy / wv);
        }
    }
    Ok(DriftField { b1, b2 })
}

#[inline]
fn bilinear_cell(f: &ScalarField, i: usize, j: usize, tx: f64, ty: f64) -> f64 {
    let f00 = f.at(i, j);
    let f10 = f.at(i + 1, j);
    let f01 = f.at(i, j + 1);
    let f11 = f.at(i + 1, j + 1);
    (1.0 - ty) * ((1.0 - tx) * f00 + tx * f10) + ty * ((1.0 - tx) * f01 + tx * f11)
}

pub fn interp_bilinear(f: &ScalarField, p: Point) -> Result<f64> {
    let (i, j, tx, ty) = f.grid().locate(p).ok_or(Error::OutsideGrid { x: p.x, y: p.y })?;
    Ok(bilinear_cell(f, i, j, tx, ty))
}
