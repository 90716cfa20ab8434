//! Backward-Euler finite-difference solves of
//! `u_t = b . grad(u) + lap(u)` on node rectangles with Dirichlet edges.
//!
//! The discrete operator uses the five-point Laplacian and, by default,
//! centred differences for the drift term with nodal `b`. Both coordinates
//! share the matrix, so each rectangle is factored once per step.

use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandMatrix};
use crate::boundary::{BoundaryData, Coordinate};
use crate::ddlayout::SubRect;
use crate::error::{Error, Result};
use crate::geometry::{MeshState, ScalarField, StructuredGrid};
use crate::monitor::DriftField;

/// Relative residual accepted from the direct solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftScheme {
    #[default]
    Centered,
    /// First-order upwinding of the drift term.
    Upwind,
}

/// Dirichlet values on the four edges of a [`SubRect`], edge nodes included.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeValues {
    /// Along `j = j0`, indexed `i0..=i1`.
    pub bottom: Vec<f64>,
    /// Along `j = j1`.
    pub top: Vec<f64>,
    /// Along `i = i0`, indexed `j0..=j1`.
    pub left: Vec<f64>,
    /// Along `i = i1`.
    pub right: Vec<f64>,
}

impl EdgeValues {
    pub fn from_fn(rect: &SubRect, f: impl Fn(usize, usize) -> f64) -> Self {
        EdgeValues {
            bottom: (rect.i0..=rect.i1).map(|i| f(i, rect.j0)).collect(),
            top: (rect.i0..=rect.i1).map(|i| f(i, rect.j1)).collect(),
            left: (rect.j0..=rect.j1).map(|j| f(rect.i0, j)).collect(),
            right: (rect.j0..=rect.j1).map(|j| f(rect.i1, j)).collect(),
        }
    }

    pub fn from_field(field: &ScalarField, rect: &SubRect) -> Self {
        Self::from_fn(rect, |i, j| field.at(i, j))
    }

    /// Boundary data on the full grid rectangle.
    pub fn from_boundary(bd: &BoundaryData, which: Coordinate) -> Result<Self> {
        let g = &bd.grid;
        let rect = SubRect { i0: 0, i1: g.nx - 1, j0: 0, j1: g.ny - 1 };
        let err = std::cell::RefCell::new(None);
        let e = Self::from_fn(&rect, |i, j| {
            bd.node_value(which, i, j).unwrap_or_else(|e| {
                err.borrow_mut().get_or_insert(e);
                f64::NAN
            })
        });
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(e),
        }
    }

    fn check(&self, rect: &SubRect) -> Result<()> {
        let ni = rect.i1 - rect.i0 + 1;
        let nj = rect.j1 - rect.j0 + 1;
        for (edge, v, n) in [
            ("bottom", &self.bottom, ni),
            ("top", &self.top, ni),
            ("left", &self.left, nj),
            ("right", &self.right, nj),
        ] {
            if v.len() != n || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::MissingDirichlet {
                    edge,
                    expected: n,
                    got: v.iter().filter(|x| x.is_finite()).count(),
                });
            }
        }
        Ok(())
    }
}

/// `(I - dt L_h) u = rhs` over the interior unknowns of `rect`, ordered with
/// `i` fastest.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub rect: SubRect,
    pub matrix: BandMatrix,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn unknown(&self, i: usize, j: usize) -> usize {
        unknown(&self.rect, i, j)
    }
}

#[inline]
fn unknown(rect: &SubRect, i: usize, j: usize) -> usize {
    (j - rect.j0 - 1) * (rect.i1 - rect.i0 - 1) + (i - rect.i0 - 1)
}

/// Row coefficients `[centre, east, west, north, south]`.
fn stencil(grid: &StructuredGrid, drift: &DriftField, i: usize, j: usize, dt: f64, scheme: DriftScheme) -> [f64; 5] {
    let (ax, ay) = (1.0 / (grid.hx * grid.hx), 1.0 / (grid.hy * grid.hy));
    let (b1, b2) = (drift.b1.at(i, j), drift.b2.at(i, j));
    let mut c = [1.0 + dt * 2.0 * (ax + ay), -dt * ax, -dt * ax, -dt * ay, -dt * ay];
    match scheme {
        DriftScheme::Centered => {
            let (cx, cy) = (b1 / (2.0 * grid.hx), b2 / (2.0 * grid.hy));
            c[1] -= dt * cx;
            c[2] += dt * cx;
            c[3] -= dt * cy;
            c[4] += dt * cy;
        }
        DriftScheme::Upwind => {
            let (ux, uy) = (b1 / grid.hx, b2 / grid.hy);
            c[0] += dt * (ux.abs() + uy.abs());
            if ux > 0.0 { c[1] -= dt * ux } else { c[2] += dt * ux }
            if uy > 0.0 { c[3] -= dt * uy } else { c[4] += dt * uy }
        }
    }
    c
}

fn check_rect(rect: &SubRect, grid: &StructuredGrid) -> Result<()> {
    if rect.i1 >= grid.nx || rect.j1 >= grid.ny || rect.i1 < rect.i0 + 2 || rect.j1 < rect.j0 + 2 {
        return Err(Error::InvalidGrid(format!("bad subdomain rectangle {rect:?}")));
    }
    Ok(())
}

fn assemble_matrix(rect: &SubRect, drift: &DriftField, dt: f64, scheme: DriftScheme) -> BandMatrix {
    let grid = drift.grid();
    let ni = rect.i1 - rect.i0 - 1;
    let n = rect.interior_nodes();
    let mut a = BandMatrix::zeros(n, ni, ni);
    for j in rect.j0 + 1..rect.j1 {
        for i in rect.i0 + 1..rect.i1 {
            let r = unknown(rect, i, j);
            let c = stencil(grid, drift, i, j, dt, scheme);
            a.set(r, r, c[0]);
            if i + 1 < rect.i1 {
                a.set(r, unknown(rect, i + 1, j), c[1]);
            }
            if i - 1 > rect.i0 {
                a.set(r, unknown(rect, i - 1, j), c[2]);
            }
            if j + 1 < rect.j1 {
                a.set(r, unknown(rect, i, j + 1), c[3]);
            }
            if j - 1 > rect.j0 {
                a.set(r, unknown(rect, i, j - 1), c[4]);
            }
        }
    }
    a
}

fn assemble_rhs(
    rect: &SubRect,
    field_n: &ScalarField,
    drift: &DriftField,
    dt: f64,
    edges: &EdgeValues,
    scheme: DriftScheme,
) -> Vec<f64> {
    let grid = drift.grid();
    let mut rhs = vec![0.0; rect.interior_nodes()];
    for j in rect.j0 + 1..rect.j1 {
        for i in rect.i0 + 1..rect.i1 {
            let c = stencil(grid, drift, i, j, dt, scheme);
            let mut v = field_n.at(i, j);
            if i + 1 == rect.i1 {
                v -= c[1] * edges.right[j - rect.j0];
            }
            if i - 1 == rect.i0 {
                v -= c[2] * edges.left[j - rect.j0];
            }
            if j + 1 == rect.j1 {
                v -= c[3] * edges.top[i - rect.i0];
            }
            if j - 1 == rect.j0 {
                v -= c[4] * edges.bottom[i - rect.i0];
            }
            rhs[unknown(rect, i, j)] = v;
        }
    }
    rhs
}

pub fn assemble(
    rect: &SubRect,
    field_n: &ScalarField,
    drift: &DriftField,
    dt: f64,
    dirichlet: &EdgeValues,
    scheme: DriftScheme,
) -> Result<LinearSystem> {
    check_rect(rect, drift.grid())?;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::config("dt", format!("must be positive, got {dt}")));
    }
    dirichlet.check(rect)?;
    Ok(LinearSystem {
        rect: *rect,
        matrix: assemble_matrix(rect, drift, dt, scheme),
        rhs: assemble_rhs(rect, field_n, drift, dt, dirichlet, scheme),
    })
}

fn solve_factored(matrix: &BandMatrix, lu: &BandLu, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut x = rhs.to_vec();
    lu.solve_in_place(&mut x);
    let r = matrix
        .matvec(&x)
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if (r / scale).is_nan() || r / scale > RESIDUAL_TOL {
        return Err(Error::Residual(r / scale));
    }
    Ok(x)
}

/// Direct LU solve; errors on a zero pivot or an excessive residual.
pub fn solve(sys: &LinearSystem) -> Result<Vec<f64>> {
    let lu = sys.matrix.clone().factor()?;
    solve_factored(&sys.matrix, &lu, &sys.rhs)
}

/// New interior values of both coordinates on one rectangle.
#[derive(Clone, Debug)]
pub struct SubdomainSolution {
    pub rect: SubRect,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

impl SubdomainSolution {
    pub fn write_into(&self, state: &mut MeshState) {
        let r = &self.rect;
        for j in r.j0 + 1..r.j1 {
            for i in r.i0 + 1..r.i1 {
                let k = unknown(r, i, j);
                state.xi.set(i, j, self.xi[k]);
                state.eta.set(i, j, self.eta[k]);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn step_subdomain(
    rect: &SubRect,
    state: &MeshState,
    drift: &DriftField,
    dt: f64,
    xi_edges: &EdgeValues,
    eta_edges: &EdgeValues,
    scheme: DriftScheme,
) -> Result<SubdomainSolution> {
    check_rect(rect, drift.grid())?;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::config("dt", format!("must be positive, got {dt}")));
    }
    xi_edges.check(rect)?;
    eta_edges.check(rect)?;
    let matrix = assemble_matrix(rect, drift, dt, scheme);
    let lu = matrix.clone().factor()?;
    let rhs_xi = assemble_rhs(rect, &state.xi, drift, dt, xi_edges, scheme);
    let rhs_eta = assemble_rhs(rect, &state.eta, drift, dt, eta_edges, scheme);
    Ok(SubdomainSolution {
        rect: *rect,
        xi: solve_factored(&matrix, &lu, &rhs_xi)?,
        eta: solve_factored(&matrix, &lu, &rhs_eta)?,
    })
}

/// Write boundary data into the boundary rows and columns of `state`.
pub fn impose_boundary(state: &mut MeshState, bd: &BoundaryData) -> Result<()> {
    let g = bd.grid;
    for j in 0..g.ny {
        for i in 0..g.nx {
            if g.is_boundary_node(i, j) {
                state.xi.set(i, j, bd.node_value(Coordinate::Xi, i, j)?);
                state.eta.set(i, j, bd.node_value(Coordinate::Eta, i, j)?);
            }
        }
    }
    Ok(())
}

/// One backward-Euler step on the whole grid with `bd` as Dirichlet data.
pub fn step_single_domain(
    state: &MeshState,
    drift: &DriftField,
    dt: f64,
    bd: &BoundaryData,
    scheme: DriftScheme,
) -> Result<MeshState> {
    let g = state.grid();
    let rect = SubRect { i0: 0, i1: g.nx - 1, j0: 0, j1: g.ny - 1 };
    let xi_edges = EdgeValues::from_boundary(bd, Coordinate::Xi)?;
    let eta_edges = EdgeValues::from_boundary(bd, Coordinate::Eta)?;
    let sol = step_subdomain(&rect, state, drift, dt, &xi_edges, &eta_edges, scheme)?;
    let mut next = state.clone();
    next.t = state.t + dt;
    impose_boundary(&mut next, bd)?;
    sol.write_into(&mut next);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::build_boundary_data;
    use crate::ddlayout::partition_grid;
    use crate::geometry::{initial_mesh, PhysicalDomain};
    use crate::monitor::{drift_from_monitor, sample_monitor, RotatingRingParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> StructuredGrid {
        StructuredGrid::new(PhysicalDomain::unit_square(), n, n).unwrap()
    }

    fn full(g: &StructuredGrid) -> SubRect {
        SubRect { i0: 0, i1: g.nx - 1, j0: 0, j1: g.ny - 1 }
    }

    #[test]
    fn driftless_stencil() {
        let g = grid(5);
        let rect = full(&g);
        let dt = 0.01;
        let f = ScalarField::constant(g, 0.0);
        let e = EdgeValues::from_field(&f, &rect);
        let sys = assemble(&rect, &f, &DriftField::zero(&g), dt, &e, DriftScheme::Centered).unwrap();
        let h2 = g.hx * g.hx;
        let c = sys.unknown(2, 2);
        assert_relative_eq!(sys.matrix.get(c, c), 1.0 + 4.0 * dt / h2, epsilon = 1e-12);
        for nb in [sys.unknown(1, 2), sys.unknown(3, 2), sys.unknown(2, 1), sys.unknown(2, 3)] {
            assert_relative_eq!(sys.matrix.get(c, nb), -dt / h2, epsilon = 1e-12);
        }
        assert_eq!(sys.matrix.get(c, sys.unknown(1, 1)), 0.0);
    }

    #[test]
    fn row_sums_are_one() {
        let g = grid(9);
        let drift = drift_from_monitor(&sample_monitor(0.0, &g, &RotatingRingParams::default())).unwrap();
        for scheme in [DriftScheme::Centered, DriftScheme::Upwind] {
            let a = assemble_matrix(&full(&g), &drift, 0.003, scheme);
            let sums = a.matvec(&vec![1.0; a.n()]);
            // interior rows (no neighbours on the edge) sum to exactly one
            let rect = full(&g);
            let r = unknown(&rect, 4, 4);
            assert_relative_eq!(sums[r], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn tiny_dt_returns_previous_values() {
        let g = grid(9);
        let rect = full(&g);
        let f = ScalarField::from_fn(g, |p| (p.x * 5.0).sin() * p.y);
        let e = EdgeValues::from_field(&f, &rect);
        let sys = assemble(&rect, &f, &DriftField::constant(&g, (1.0, -2.0)), 1e-14, &e, DriftScheme::Centered).unwrap();
        let u = solve(&sys).unwrap();
        for j in 1..8 {
            for i in 1..8 {
                assert_relative_eq!(u[sys.unknown(i, j)], f.at(i, j), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn constants_are_exact() {
        let g = grid(11);
        let drift = drift_from_monitor(&sample_monitor(0.1, &g, &RotatingRingParams::default())).unwrap();
        let rect = full(&g);
        let f = ScalarField::constant(g, 0.37);
        let e = EdgeValues::from_field(&f, &rect);
        let u = solve(&assemble(&rect, &f, &drift, 0.01, &e, DriftScheme::Centered).unwrap()).unwrap();
        assert!(u.iter().all(|v| (v - 0.37).abs() <= 1e-12));
    }

    #[test]
    fn linear_field_is_steady_without_drift() {
        let g = grid(21);
        let rect = full(&g);
        let f = ScalarField::from_fn(g, |p| p.x);
        let e = EdgeValues::from_field(&f, &rect);
        let u = solve(&assemble(&rect, &f, &DriftField::zero(&g), 0.05, &e, DriftScheme::Centered).unwrap()).unwrap();
        for j in 1..20 {
            for i in 1..20 {
                assert!((u[unknown(&rect, i, j)] - g.x(i)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identity_like_system() {
        let g = grid(4);
        let rect = full(&g);
        let mut m = BandMatrix::zeros(4, 2, 2);
        for k in 0..4 {
            m.set(k, k, 1.0);
        }
        let sys = LinearSystem { rect, matrix: m, rhs: vec![0.5, 1.5, -2.0, 3.0] };
        assert_eq!(solve(&sys).unwrap(), vec![0.5, 1.5, -2.0, 3.0]);
    }

    #[test]
    fn missing_dirichlet_data() {
        let g = grid(6);
        let rect = full(&g);
        let f = ScalarField::constant(g, 0.0);
        let mut e = EdgeValues::from_field(&f, &rect);
        e.left.pop();
        assert!(matches!(
            assemble(&rect, &f, &DriftField::zero(&g), 0.1, &e, DriftScheme::Centered),
            Err(Error::MissingDirichlet { edge: "left", .. })
        ));
        let mut e = EdgeValues::from_field(&f, &rect);
        e.top[2] = f64::NAN;
        assert!(assemble(&rect, &f, &DriftField::zero(&g), 0.1, &e, DriftScheme::Centered).is_err());
    }

    /// Two-mode Fourier solution of the heat equation with zero boundary data.
    fn heat_exact(t: f64, x: f64, y: f64) -> f64 {
        (-2.0 * PI * PI * t).exp() * (PI * x).sin() * (PI * y).sin()
            + 0.3 * (-13.0 * PI * PI * t).exp() * (2.0 * PI * x).sin() * (3.0 * PI * y).sin()
    }

    #[test]
    fn heat_equation_converges_second_order_in_space() {
        let t_end = 0.05;
        let mut errs = Vec::new();
        for n in [11usize, 21, 41] {
            let g = grid(n);
            let h = g.hx;
            let steps = (t_end / (0.5 * h * h)).round() as usize;
            let dt = t_end / steps as f64;
            let rect = full(&g);
            let mut u = ScalarField::from_fn(g, |p| heat_exact(0.0, p.x, p.y));
            let zero_edges = EdgeValues::from_fn(&rect, |_, _| 0.0);
            let drift = DriftField::zero(&g);
            for _ in 0..steps {
                let sol = solve(&assemble(&rect, &u, &drift, dt, &zero_edges, DriftScheme::Centered).unwrap()).unwrap();
                for j in 1..n - 1 {
                    for i in 1..n - 1 {
                        u.set(i, j, sol[unknown(&rect, i, j)]);
                    }
                }
            }
            let mut e = 0.0f64;
            for j in 0..n {
                for i in 0..n {
                    e = e.max((u.at(i, j) - heat_exact(t_end, g.x(i), g.y(j))).abs());
                }
            }
            errs.push(e);
        }
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!(r1 > 3.3 && r2 > 3.6, "{errs:?}");
    }

    #[test]
    fn subdomains_with_pinned_interfaces_match_global_solve() {
        let g = grid(41);
        let mf = sample_monitor(0.0, &g, &RotatingRingParams::default());
        let drift = drift_from_monitor(&mf).unwrap();
        let bd = build_boundary_data(0.0, &mf).unwrap();
        let mut state = initial_mesh(&g);
        impose_boundary(&mut state, &bd).unwrap();
        let reference = step_single_domain(&state, &drift, 0.001, &bd, DriftScheme::Centered).unwrap();

        let part = partition_grid(&g, 2, 2).unwrap();
        let mut dd = reference.clone();
        for rect in &part.subdomains {
            let xe = EdgeValues::from_field(&reference.xi, rect);
            let ee = EdgeValues::from_field(&reference.eta, rect);
            step_subdomain(rect, &state, &drift, 0.001, &xe, &ee, DriftScheme::Centered)
                .unwrap()
                .write_into(&mut dd);
        }
        let diff = dd
            .xi
            .values()
            .iter()
            .zip(reference.xi.values())
            .chain(dd.eta.values().iter().zip(reference.eta.values()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-10, "{diff}");
    }

    #[test]
    fn uniform_monitor_keeps_uniform_mesh() {
        let g = grid(17);
        let state = initial_mesh(&g);
        let bd = BoundaryData::uniform(0.0, &g);
        let next = step_single_domain(&state, &DriftField::zero(&g), 0.01, &bd, DriftScheme::Centered).unwrap();
        for (a, b) in next.xi.values().iter().zip(state.xi.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_relative_eq!(next.t, 0.01);
    }

    #[test]
    fn backward_euler_half_steps_differ_at_second_order() {
        let g = grid(21);
        let drift = DriftField::constant(&g, (0.7, -0.4));
        let rect = full(&g);
        let u0 = ScalarField::from_fn(g, |p| (PI * p.x).sin() * (PI * p.y).sin());
        let zero = EdgeValues::from_fn(&rect, |_, _| 0.0);
        let advance = |u: &ScalarField, dt: f64| {
            let sol = solve(&assemble(&rect, u, &drift, dt, &zero, DriftScheme::Centered).unwrap()).unwrap();
            let mut out = u.clone();
            for j in 1..20 {
                for i in 1..20 {
                    out.set(i, j, sol[unknown(&rect, i, j)]);
                }
            }
            out
        };
        let gap = |dt: f64| {
            let one = advance(&u0, dt);
            let two = advance(&advance(&u0, dt / 2.0), dt / 2.0);
            one.values().iter().zip(two.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (a, b) = (gap(2e-3), gap(1e-3));
        let order = (a / b).log2();
        assert!((1.8..2.2).contains(&order), "{a} {b} {order}");
    }

    proptest! {
        #[test]
        fn driftless_maximum_principle(vals in prop::collection::vec(0.0..1.0f64, 81), dt in 1e-4..0.1f64) {
            let g = grid(9);
            let rect = full(&g);
            let f = ScalarField::new(g, vals).unwrap();
            let e = EdgeValues::from_field(&f, &rect);
            let u = solve(&assemble(&rect, &f, &DriftField::zero(&g), dt, &e, DriftScheme::Centered).unwrap()).unwrap();
            let (lo, hi) = (f.min(), f.max());
            for v in u {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
