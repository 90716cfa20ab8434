//! Physical domain, structured node grid and the nodal fields living on it.
//!
//! Grids are node-centred and include the boundary nodes, so a `41x41` grid on
//! the unit square has spacing `1/40`. Fields are stored row-major with `j`
//! (the y index) outer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// The rectangle `[x_l, x_r] x [y_l, y_u]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalDomain {
    pub x_l: f64,
    pub x_r: f64,
    pub y_l: f64,
    pub y_u: f64,
}

impl PhysicalDomain {
    pub fn new(x_l: f64, x_r: f64, y_l: f64, y_u: f64) -> Result<Self> {
        let d = PhysicalDomain { x_l, x_r, y_l, y_u };
        d.validate()?;
        Ok(d)
    }

    pub const fn unit_square() -> Self {
        PhysicalDomain {
            x_l: 0.0,
            x_r: 1.0,
            y_l: 0.0,
            y_u: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.x_l, self.x_r, self.y_l, self.y_u]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidDomain("non-finite bound".into()));
        }
        if self.x_l >= self.x_r {
            return Err(Error::InvalidDomain(format!(
                "x_l = {} must be below x_r = {}",
                self.x_l, self.x_r
            )));
        }
        if self.y_l >= self.y_u {
            return Err(Error::InvalidDomain(format!(
                "y_l = {} must be below y_u = {}",
                self.y_l, self.y_u
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_r - self.x_l
    }

    pub fn height(&self) -> f64 {
        self.y_u - self.y_l
    }

    /// Open-rectangle membership. Points on the boundary are outside.
    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        self.x_l < p.x && p.x < self.x_r && self.y_l < p.y && p.y < self.y_u
    }

    /// Closed-rectangle membership.
    #[inline]
    pub fn contains_closed(&self, p: Point) -> bool {
        self.x_l <= p.x && p.x <= self.x_r && self.y_l <= p.y && p.y <= self.y_u
    }
}

/// Uniform node-centred grid over a [`PhysicalDomain`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructuredGrid {
    pub domain: PhysicalDomain,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl StructuredGrid {
    pub fn new(domain: PhysicalDomain, nx: usize, ny: usize) -> Result<Self> {
        domain.validate()?;
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes per axis, got {nx}x{ny}"
            )));
        }
        Ok(StructuredGrid {
            domain,
            nx,
            ny,
            hx: domain.width() / (nx - 1) as f64,
            hy: domain.height() / (ny - 1) as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// x coordinate of node column `i`; the last column is exactly `x_r`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.domain.x_r
        } else {
            self.domain.x_l + i as f64 * self.hx
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.domain.y_u
        } else {
            self.domain.y_l + j as f64 * self.hy
        }
    }

    pub fn node_coords(&self, i: usize, j: usize) -> Result<Point> {
        if i >= self.nx || j >= self.ny {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok(Point::new(self.x(i), self.y(j)))
    }

    pub fn is_boundary_node(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Locate the cell containing `p` and the local offsets in `[0, 1]`.
    /// Returns `None` if `p` is outside the closed rectangle.
    #[inline]
    pub(crate) fn locate(&self, p: Point) -> Option<(usize, usize, f64, f64)> {
        if !self.domain.contains_closed(p) {
            return None;
        }
        let sx = (p.x - self.domain.x_l) / self.hx;
        let sy = (p.y - self.domain.y_l) / self.hy;
        let i = (sx.floor() as usize).min(self.nx - 2);
        let j = (sy.floor() as usize).min(self.ny - 2);
        let tx = (sx - i as f64).clamp(0.0, 1.0);
        let ty = (sy - j as f64).clamp(0.0, 1.0);
        Some((i, j, tx, ty))
    }
}

/// Nodal values on a [`StructuredGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: StructuredGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: StructuredGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::FieldSize {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: StructuredGrid, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: StructuredGrid, mut f: impl FnMut(Point) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(Point::new(grid.x(i), grid.y(j))));
            }
        }
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Computational coordinates `xi`, `eta` on the physical grid at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshState {
    pub t: f64,
    pub xi: ScalarField,
    pub eta: ScalarField,
}

impl MeshState {
    pub fn grid(&self) -> &StructuredGrid {
        self.xi.grid()
    }
}

/// The uniform mesh: `xi`, `eta` are the affine normalisations of `x`, `y`.
pub fn initial_mesh(grid: &StructuredGrid) -> MeshState {
    let d = grid.domain;
    let mut xi = ScalarField::constant(*grid, 0.0);
    let mut eta = ScalarField::constant(*grid, 0.0);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let xv = if i == 0 {
                0.0
            } else if i + 1 == grid.nx {
                1.0
            } else {
                (grid.x(i) - d.x_l) / d.width()
            };
            let yv = if j == 0 {
                0.0
            } else if j + 1 == grid.ny {
                1.0
            } else {
                (grid.y(j) - d.y_l) / d.height()
            };
            xi.set(i, j, xv);
            eta.set(i, j, yv);
        }
    }
    MeshState { t: 0.0, xi, eta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize) -> StructuredGrid {
        StructuredGrid::new(PhysicalDomain::unit_square(), n, n).unwrap()
    }

    #[test]
    fn node_coords_examples() {
        assert_eq!(unit(3).node_coords(1, 1).unwrap(), Point::new(0.5, 0.5));
        assert_eq!(unit(41).node_coords(1, 0).unwrap(), Point::new(0.025, 0.0));
        assert_eq!(unit(2).node_coords(1, 0).unwrap(), Point::new(1.0, 0.0));
        assert!(matches!(
            unit(3).node_coords(3, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn initial_mesh_examples() {
        let g = unit(3);
        let m = initial_mesh(&g);
        assert_eq!((m.xi.at(1, 1), m.eta.at(1, 1)), (0.5, 0.5));
        assert_eq!((m.xi.at(2, 0), m.eta.at(2, 0)), (1.0, 0.0));

        let wide = StructuredGrid::new(PhysicalDomain::new(0.0, 2.0, 0.0, 1.0).unwrap(), 5, 3).unwrap();
        let m = initial_mesh(&wide);
        assert_eq!(wide.x(2), 1.0);
        assert_eq!(m.xi.at(2, 1), 0.5);
    }

    #[test]
    fn contains_is_open() {
        let d = PhysicalDomain::unit_square();
        assert!(d.contains(Point::new(0.5, 0.5)));
        assert!(!d.contains(Point::new(1.0, 0.5)));
        assert!(!d.contains(Point::new(-0.1, 0.5)));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(PhysicalDomain::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(StructuredGrid::new(PhysicalDomain::unit_square(), 1, 5).is_err());
        let g = unit(3);
        assert!(ScalarField::new(g, vec![0.0; 8]).is_err());
        let mut v = vec![0.0; 9];
        v[4] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::NonFinite(4))));
    }

    proptest! {
        #[test]
        fn corner_node_is_exact(x_l in -5.0..5.0f64, w in 0.1..10.0f64, y_l in -5.0..5.0f64,
                                h in 0.1..10.0f64, nx in 2usize..60, ny in 2usize..60) {
            let d = PhysicalDomain::new(x_l, x_l + w, y_l, y_l + h).unwrap();
            let g = StructuredGrid::new(d, nx, ny).unwrap();
            prop_assert_eq!(g.node_coords(nx - 1, ny - 1).unwrap(), Point::new(d.x_r, d.y_u));
            let m = initial_mesh(&g);
            for j in 0..ny {
                for i in 0..nx {
                    let (a, b) = (m.xi.at(i, j), m.eta.at(i, j));
                    prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
                }
                prop_assert_eq!(m.xi.at(0, j), 0.0);
                prop_assert_eq!(m.xi.at(nx - 1, j), 1.0);
            }
            for i in 0..nx {
                prop_assert_eq!(m.eta.at(i, 0), 0.0);
                prop_assert_eq!(m.eta.at(i, ny - 1), 1.0);
            }
        }
    }
}
