//! Subdomain layout, stochastic point placement on interfaces and Hermite
//! fill of the remaining interface nodes.
//!
//! Subdomains are node rectangles that share their interface node lines. An
//! interface is the piece of such a line between two neighbouring subdomains.
//! Its two end nodes are physical boundary nodes or cross points, where
//! interface lines meet. Boundary ends carry boundary data and are not part of
//! the interface. Each cross point is owned by the vertical interface below
//! it; every other interface ending there sees it as a foreign anchor.

use crate::boundary::{BoundaryData, Coordinate};
use crate::error::{Error, Result};
use crate::geometry::{Point, ScalarField, StructuredGrid};
use crate::hermite::{HermiteKind, HermiteSpline};

/// Minimum separation, in nodes, between two selected anchors.
pub const MIN_SPACING: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Runs along `x` at fixed `j`.
    Horizontal,
    /// Runs along `y` at fixed `i`.
    Vertical,
}

/// Inclusive node rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl SubRect {
    pub fn interior_nodes(&self) -> usize {
        (self.i1 - self.i0 - 1) * (self.j1 - self.j0 - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointKind {
    Stochastic,
    Interpolated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterfacePoint {
    pub i: usize,
    pub j: usize,
    pub coord: Point,
    pub kind: PointKind,
    /// True where this interface crosses another one.
    pub cross: bool,
    pub xi: f64,
    pub eta: f64,
    /// Standard errors of the Monte Carlo estimates, for stochastic points.
    pub std_error: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anchor {
    /// Running index along the line.
    pub s: usize,
    pub xi: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interface {
    pub orientation: Orientation,
    /// Node column (vertical) or row (horizontal) of the line.
    pub fixed: usize,
    /// Running indices of the two end nodes.
    pub ends: (usize, usize),
    /// Running indices of the first and last entry of `points`.
    pub span: (usize, usize),
    /// Nodes on the full grid line.
    pub line_len: usize,
    pub points: Vec<InterfacePoint>,
    /// Running indices of cross points owned by another interface.
    pub foreign: Vec<usize>,
    /// Known values that are not points of this interface: boundary ends and
    /// foreign cross points. Set per step.
    pub anchors: Vec<Anchor>,
}

impl Interface {
    pub fn node(&self, s: usize) -> (usize, usize) {
        match self.orientation {
            Orientation::Vertical => (self.fixed, s),
            Orientation::Horizontal => (s, self.fixed),
        }
    }

    pub fn running(&self, p: &InterfacePoint) -> usize {
        match self.orientation {
            Orientation::Vertical => p.j,
            Orientation::Horizontal => p.i,
        }
    }

    fn along(&self, grid: &StructuredGrid, s: usize) -> f64 {
        match self.orientation {
            Orientation::Vertical => grid.y(s),
            Orientation::Horizontal => grid.x(s),
        }
    }

    fn is_boundary_end(&self, s: usize) -> bool {
        s == 0 || s == self.line_len - 1
    }

    /// Replace the anchor set with the boundary end values from `bd`.
    pub fn set_boundary_anchors(&mut self, bd: &BoundaryData) -> Result<()> {
        self.anchors.clear();
        let ends: Vec<usize> = [self.ends.0, self.ends.1]
            .into_iter()
            .filter(|&s| self.is_boundary_end(s))
            .collect();
        for s in ends {
            let (i, j) = self.node(s);
            self.anchors.push(Anchor {
                s,
                xi: bd.node_value(Coordinate::Xi, i, j)?,
                eta: bd.node_value(Coordinate::Eta, i, j)?,
            });
        }
        Ok(())
    }

    pub fn add_anchor(&mut self, anchor: Anchor) {
        self.anchors.push(anchor);
    }

    pub fn stochastic_points(&self) -> impl Iterator<Item = &InterfacePoint> {
        self.points.iter().filter(|p| p.kind == PointKind::Stochastic)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub m: usize,
    pub n: usize,
    /// Node columns bounding the subdomains, `0` and `nx - 1` included.
    pub i_splits: Vec<usize>,
    pub j_splits: Vec<usize>,
    /// Row-major over blocks (`j` block outer).
    pub subdomains: Vec<SubRect>,
    pub interfaces: Vec<Interface>,
}

fn splits(nodes: usize, parts: usize) -> Result<Vec<usize>> {
    if parts == 0 {
        return Err(Error::PartitionTooSmall { nodes, parts });
    }
    let cells = (nodes - 1) as f64;
    let s: Vec<usize> = (0..=parts)
        .map(|q| (q as f64 * cells / parts as f64).round() as usize)
        .collect();
    if s.windows(2).any(|w| w[1] < w[0] + 2) {
        return Err(Error::PartitionTooSmall { nodes, parts });
    }
    Ok(s)
}

/// Split the grid into `m x n` near-equal subdomains.
pub fn partition_grid(grid: &StructuredGrid, m: usize, n: usize) -> Result<Partition> {
    let is = splits(grid.nx, m)?;
    let js = splits(grid.ny, n)?;
    let mut subdomains = Vec::with_capacity(m * n);
    for b in 0..n {
        for a in 0..m {
            subdomains.push(SubRect {
                i0: is[a],
                i1: is[a + 1],
                j0: js[b],
                j1: js[b + 1],
            });
        }
    }
    let inner_i = &is[1..m];
    let make_point = |i: usize, j: usize, cross: bool| InterfacePoint {
        i,
        j,
        coord: Point::new(grid.x(i), grid.y(j)),
        kind: PointKind::Interpolated,
        cross,
        xi: f64::NAN,
        eta: f64::NAN,
        std_error: None,
    };

    let mut interfaces = Vec::new();
    for &i in inner_i {
        for b in 0..n {
            let (lo, hi) = (js[b], js[b + 1]);
            let owns_top = b + 1 < n;
            let last = if owns_top { hi } else { hi - 1 };
            interfaces.push(Interface {
                orientation: Orientation::Vertical,
                fixed: i,
                ends: (lo, hi),
                span: (lo + 1, last),
                line_len: grid.ny,
                points: (lo + 1..=last).map(|j| make_point(i, j, owns_top && j == hi)).collect(),
                foreign: if b > 0 { vec![lo] } else { Vec::new() },
                anchors: Vec::new(),
            });
        }
    }
    for &j in &js[1..n] {
        for a in 0..m {
            let (lo, hi) = (is[a], is[a + 1]);
            let mut foreign = Vec::new();
            if a > 0 {
                foreign.push(lo);
            }
            if a + 1 < m {
                foreign.push(hi);
            }
            interfaces.push(Interface {
                orientation: Orientation::Horizontal,
                fixed: j,
                ends: (lo, hi),
                span: (lo + 1, hi - 1),
                line_len: grid.nx,
                points: (lo + 1..hi).map(|i| make_point(i, j, false)).collect(),
                foreign,
                anchors: Vec::new(),
            });
        }
    }
    Ok(Partition {
        m,
        n,
        i_splits: is,
        j_splits: js,
        subdomains,
        interfaces,
    })
}

fn local_extrema(d: &[f64]) -> Vec<(usize, f64)> {
    let n = d.len();
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || n < 5 {
        return Vec::new();
    }
    (2..n - 2)
        .filter(|&s| (d[s] - d[s - 1]) * (d[s + 1] - d[s]) < 0.0)
        .map(|s| (s, d[s].abs() / scale))
        .collect()
}

/// Choose which interface points are estimated stochastically.
///
/// Span ends next to the physical boundary and all cross points, owned or
/// foreign, are always selected. On top of these, up to `k` nodes at strict
/// local extrema of the first and second centred differences of `rho` along
/// the line are taken by decreasing normalised magnitude, skipping any closer
/// than [`MIN_SPACING`] nodes to an already selected node. If fewer than `k`
/// nodes are selected in total, equispaced nodes are added. Returns one label
/// per entry of `iface.points`.
pub fn select_stochastic_points(iface: &Interface, rho: &ScalarField, k: usize) -> Vec<PointKind> {
    let grid = rho.grid();
    let (lo, hi) = iface.ends;
    let len = hi - lo + 1;
    let k = k.max(2);
    let h = match iface.orientation {
        Orientation::Vertical => grid.hy,
        Orientation::Horizontal => grid.hx,
    };
    let r: Vec<f64> = (lo..=hi)
        .map(|s| {
            let (i, j) = iface.node(s);
            rho.at(i, j)
        })
        .collect();
    let mut d1 = vec![0.0; len];
    let mut d2 = vec![0.0; len];
    for t in 1..len - 1 {
        d1[t] = (r[t + 1] - r[t - 1]) / (2.0 * h);
        d2[t] = (r[t + 1] - 2.0 * r[t] + r[t - 1]) / (h * h);
    }

    let mut selected: Vec<usize> = iface.foreign.clone();
    if iface.is_boundary_end(lo) {
        selected.push(iface.span.0);
    }
    if iface.is_boundary_end(hi) {
        selected.push(iface.span.1);
    }
    selected.extend(iface.points.iter().filter(|p| p.cross).map(|p| iface.running(p)));
    selected.sort_unstable();
    selected.dedup();

    let mut cands = local_extrema(&d1);
    for (s, pr) in local_extrema(&d2) {
        match cands.iter_mut().find(|c| c.0 == s) {
            Some(c) => c.1 = c.1.max(pr),
            None => cands.push((s, pr)),
        }
    }
    let mut cands: Vec<(usize, f64)> = cands.into_iter().map(|(t, pr)| (lo + t, pr)).collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let far = |sel: &[usize], s: usize| sel.iter().all(|&t| t.abs_diff(s) >= MIN_SPACING);
    let mut taken = 0;
    for (s, _) in cands {
        if taken == k {
            break;
        }
        if far(&selected, s) {
            selected.push(s);
            taken += 1;
        }
    }
    for q in 0..k {
        if selected.len() >= k {
            break;
        }
        let s = lo + (q as f64 * (len - 1) as f64 / (k - 1) as f64).round() as usize;
        if s >= iface.span.0 && s <= iface.span.1 && far(&selected, s) {
            selected.push(s);
        }
    }

    iface
        .points
        .iter()
        .map(|p| {
            if selected.contains(&iface.running(p)) {
                PointKind::Stochastic
            } else {
                PointKind::Interpolated
            }
        })
        .collect()
}

pub fn apply_labels(iface: &mut Interface, labels: &[PointKind]) {
    for (p, &kind) in iface.points.iter_mut().zip(labels) {
        p.kind = kind;
    }
}

/// Fill interpolated points from the anchors and stochastic values, separately
/// for `xi` and `eta`.
pub fn fill_interface(iface: &mut Interface, grid: &StructuredGrid, kind: HermiteKind) -> Result<()> {
    let mut known: Vec<(usize, f64, f64)> = iface.anchors.iter().map(|a| (a.s, a.xi, a.eta)).collect();
    known.extend(
        iface
            .stochastic_points()
            .map(|p| (iface.running(p), p.xi, p.eta)),
    );
    known.sort_by_key(|k| k.0);
    known.dedup_by_key(|k| k.0);
    if known.len() < 2 {
        return Err(Error::TooFewAnchors(known.len()));
    }
    let x: Vec<f64> = known.iter().map(|k| iface.along(grid, k.0)).collect();
    let xi: Vec<f64> = known.iter().map(|k| k.1).collect();
    let eta: Vec<f64> = known.iter().map(|k| k.2).collect();
    let sx = HermiteSpline::new(&x, &xi, kind)?;
    let se = HermiteSpline::new(&x, &eta, kind)?;
    let orientation = iface.orientation;
    for p in iface.points.iter_mut().filter(|p| p.kind == PointKind::Interpolated) {
        let t = match orientation {
            Orientation::Vertical => p.coord.y,
            Orientation::Horizontal => p.coord.x,
        };
        p.xi = sx.eval(t);
        p.eta = se.eval(t);
        p.std_error = None;
    }
    Ok(())
}
