//! Euler-Maruyama paths of `dX = b dt + sqrt(2) dW` over one mesh time step,
//! stopped at the first sub-step that leaves the physical domain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{PhysicalDomain, Point};
use crate::monitor::DriftField;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathConfig {
    /// Mesh time step.
    pub dt: f64,
    /// Euler-Maruyama sub-steps per mesh step.
    pub n_sub: usize,
}

impl PathConfig {
    pub fn new(dt: f64, n_sub: usize) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::config("dt", format!("must be positive, got {dt}")));
        }
        if n_sub == 0 {
            return Err(Error::config("n_sub", "must be at least 1"));
        }
        Ok(PathConfig { dt, n_sub })
    }

    pub fn dt_sub(&self) -> f64 {
        self.dt / self.n_sub as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathOutcome {
    /// Survived the whole step; `X(t^{n+1})`.
    Interior(Point),
    /// Left the domain during sub-step `substep` (1-based) at boundary point
    /// `point`.
    Exited { point: Point, substep: usize },
}

impl PathOutcome {
    pub fn endpoint(&self) -> Point {
        match *self {
            PathOutcome::Interior(p) => p,
            PathOutcome::Exited { point, .. } => point,
        }
    }

    pub fn exited(&self) -> bool {
        matches!(self, PathOutcome::Exited { .. })
    }
}

/// Identifies one independent random stream.
///
/// `step` must stay below 2^48 so the lane bits never collide with it.
///
/// The four words form the ChaCha key directly, so a stream is a pure
/// function of `(seed, step, point, lane, path)` and never depends on which
/// worker runs it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub step: u64,
    pub point: u64,
    /// Distinguishes ensembles at the same point (for example `xi` and `eta`).
    pub lane: u32,
    pub path: u64,
}

/// Source of Brownian increments for a path.
pub trait Increments {
    fn increment(&mut self, dt_sub: f64) -> [f64; 2];
}

pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(key: StreamKey) -> Self {
        let words = [
            key.seed,
            key.step ^ ((key.lane as u64) << 48),
            key.point,
            key.path,
        ];
        let mut bytes = [0u8; 32];
        for (chunk, w) in bytes.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        RngStream {
            rng: ChaCha8Rng::from_seed(bytes),
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// `sqrt(dt_sub) * N(0, 1)` per component.
pub fn brownian_increment(rng: &mut RngStream, dt_sub: f64) -> [f64; 2] {
    let s = dt_sub.sqrt();
    [s * rng.standard_normal(), s * rng.standard_normal()]
}

impl Increments for RngStream {
    #[inline]
    fn increment(&mut self, dt_sub: f64) -> [f64; 2] {
        brownian_increment(self, dt_sub)
    }
}

/// Deterministic zero noise.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroNoise;

impl Increments for ZeroNoise {
    fn increment(&mut self, _dt_sub: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// One Euler-Maruyama sub-step `x + b(x) dt_sub + sqrt(2) dW`.
#[inline]
pub fn em_substep(x: Point, drift: &DriftField, dt_sub: f64, dw: [f64; 2]) -> Point {
    let (b1, b2) = drift.at(x);
    Point::new(
        x.x + b1 * dt_sub + std::f64::consts::SQRT_2 * dw[0],
        x.y + b2 * dt_sub + std::f64::consts::SQRT_2 * dw[1],
    )
}

/// First crossing of the segment `from -> to` with the rectangle boundary.
/// `from` must be inside and `to` outside the open rectangle.
pub fn segment_exit(from: Point, to: Point, d: &PhysicalDomain) -> Point {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let mut s = 1.0f64;
    let mut side: Option<(bool, f64)> = None;
    let mut consider = |cand: f64, vertical: bool, value: f64| {
        if cand <= s {
            s = cand;
            side = Some((vertical, value));
        }
    };
    if to.x >= d.x_r && dx > 0.0 {
        consider((d.x_r - from.x) / dx, true, d.x_r);
    }
    if to.x <= d.x_l && dx < 0.0 {
        consider((d.x_l - from.x) / dx, true, d.x_l);
    }
    if to.y >= d.y_u && dy > 0.0 {
        consider((d.y_u - from.y) / dy, false, d.y_u);
    }
    if to.y <= d.y_l && dy < 0.0 {
        consider((d.y_l - from.y) / dy, false, d.y_l);
    }
    let s = s.clamp(0.0, 1.0);
    let mut p = Point::new(
        (from.x + s * dx).clamp(d.x_l, d.x_r),
        (from.y + s * dy).clamp(d.y_l, d.y_u),
    );
    match side {
        Some((true, v)) => p.x = v,
        Some((false, v)) => p.y = v,
        None => {}
    }
    p
}

/// Integrate one path over a mesh step, testing for exit after every sub-step.
pub fn simulate_path<I: Increments>(
    start: Point,
    drift: &DriftField,
    domain: &PhysicalDomain,
    cfg: &PathConfig,
    noise: &mut I,
) -> Result<PathOutcome> {
    if !domain.contains(start) {
        return Err(Error::StartNotInterior { x: start.x, y: start.y });
    }
    let dt_sub = cfg.dt_sub();
    let mut x = start;
    for substep in 1..=cfg.n_sub {
        let dw = noise.increment(dt_sub);
        let next = em_substep(x, drift, dt_sub, dw);
        if !domain.contains(next) {
            return Ok(PathOutcome::Exited {
                point: segment_exit(x, next, domain),
                substep,
            });
        }
        x = next;
    }
    Ok(PathOutcome::Interior(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StructuredGrid;
    use proptest::prelude::*;

    fn key(path: u64) -> StreamKey {
        StreamKey { seed: 7, step: 0, point: 3, lane: 0, path }
    }

    fn unit_grid() -> StructuredGrid {
        StructuredGrid::new(PhysicalDomain::unit_square(), 11, 11).unwrap()
    }

    #[test]
    fn zero_variance_increment() {
        let mut rng = RngStream::new(key(0));
        assert_eq!(brownian_increment(&mut rng, 0.0), [0.0, 0.0]);
    }

    #[test]
    fn increment_moments() {
        let dt = 5e-5;
        let n = 1_000_000usize;
        let mut rng = RngStream::new(key(1));
        let (mut s0, mut s1, mut q0, mut q1) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let [a, b] = brownian_increment(&mut rng, dt);
            s0 += a;
            s1 += b;
            q0 += a * a;
            q1 += b * b;
        }
        let nf = n as f64;
        let bound = 4.0 * (dt / nf).sqrt();
        assert!((s0 / nf).abs() < bound && (s1 / nf).abs() < bound);
        let v0 = q0 / nf - (s0 / nf).powi(2);
        let v1 = q1 / nf - (s1 / nf).powi(2);
        assert!((v0 / dt - 1.0).abs() < 0.01, "{v0}");
        assert!((v1 / dt - 1.0).abs() < 0.01, "{v1}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |k: StreamKey| {
            let mut r = RngStream::new(k);
            (0..8).map(|_| r.standard_normal()).collect::<Vec<_>>()
        };
        assert_eq!(draw(key(5)), draw(key(5)));
        assert_ne!(draw(key(5)), draw(key(6)));
        assert_ne!(draw(key(5)), draw(StreamKey { lane: 1, ..key(5) }));
        assert_ne!(draw(key(5)), draw(StreamKey { step: 1, ..key(5) }));
    }

    #[test]
    fn em_substep_examples() {
        let g = unit_grid();
        let x = Point::new(0.3, 0.6);
        assert_eq!(em_substep(x, &DriftField::zero(&g), 0.01, [0.0, 0.0]), x);
        let moved = em_substep(x, &DriftField::constant(&g, (1.0, 0.0)), 0.01, [0.0, 0.0]);
        assert_eq!(moved, Point::new(0.3 + 0.01, 0.6));
    }

    #[test]
    fn em_substep_diffusion_variance() {
        let g = unit_grid();
        let zero = DriftField::zero(&g);
        let dt = 1e-4;
        let n = 1_000_000usize;
        let mut rng = RngStream::new(key(9));
        let (mut s, mut q) = (0.0, 0.0);
        for _ in 0..n {
            let p = em_substep(Point::new(0.5, 0.5), &zero, dt, brownian_increment(&mut rng, dt));
            s += p.x - 0.5;
            q += (p.x - 0.5).powi(2);
        }
        let var = q / n as f64 - (s / n as f64).powi(2);
        assert!((var / (2.0 * dt) - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn frozen_path_stays_put() {
        let g = unit_grid();
        let cfg = PathConfig::new(0.001, 20).unwrap();
        let out = simulate_path(Point::new(0.4, 0.2), &DriftField::zero(&g), &g.domain, &cfg, &mut ZeroNoise).unwrap();
        assert_eq!(out, PathOutcome::Interior(Point::new(0.4, 0.2)));
    }

    #[test]
    fn deterministic_ray_exit() {
        let g = unit_grid();
        let cfg = PathConfig::new(0.1, 10).unwrap();
        let drift = DriftField::constant(&g, (1.0, 0.0));
        let out = simulate_path(Point::new(0.95, 0.5), &drift, &g.domain, &cfg, &mut ZeroNoise).unwrap();
        assert_eq!(out, PathOutcome::Exited { point: Point::new(1.0, 0.5), substep: 5 });
    }

    #[test]
    fn start_must_be_interior() {
        let g = unit_grid();
        let cfg = PathConfig::new(0.1, 10).unwrap();
        let r = simulate_path(Point::new(1.0, 0.5), &DriftField::zero(&g), &g.domain, &cfg, &mut ZeroNoise);
        assert!(matches!(r, Err(Error::StartNotInterior { .. })));
        assert!(PathConfig::new(0.0, 3).is_err());
        assert!(PathConfig::new(0.1, 0).is_err());
    }

    #[test]
    fn seeded_path_is_bit_identical() {
        let g = unit_grid();
        let drift = DriftField::constant(&g, (0.3, -0.7));
        let cfg = PathConfig::new(0.01, 20).unwrap();
        let run = || {
            (0..200)
                .map(|p| {
                    simulate_path(Point::new(0.9, 0.1), &drift, &g.domain, &cfg, &mut RngStream::new(key(p))).unwrap()
                })
                .collect::<Vec<_>>()
        };
        let a = run();
        assert!(a.iter().any(|o| o.exited()) && a.iter().any(|o| !o.exited()));
        let b = run();
        for (x, y) in a.iter().zip(&b) {
            let (p, q) = (x.endpoint(), y.endpoint());
            assert_eq!((p.x.to_bits(), p.y.to_bits()), (q.x.to_bits(), q.y.to_bits()));
        }
    }

    #[test]
    fn driftless_interior_mean_is_start() {
        let g = unit_grid();
        let zero = DriftField::zero(&g);
        let cfg = PathConfig::new(0.001, 20).unwrap();
        let start = Point::new(0.5, 0.5);
        let n = 20_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for p in 0..n {
            let e = simulate_path(start, &zero, &g.domain, &cfg, &mut RngStream::new(key(p))).unwrap().endpoint();
            sx += e.x;
            sy += e.y;
        }
        let se = (2.0f64 * 0.001 / n as f64).sqrt();
        assert!((sx / n as f64 - 0.5).abs() < 4.0 * se);
        assert!((sy / n as f64 - 0.5).abs() < 4.0 * se);
    }

    proptest! {
        #[test]
        fn exit_points_lie_on_boundary(seed in any::<u64>(), x in 0.01..0.99f64, y in 0.01..0.99f64,
                                       b1 in -20.0..20.0f64, b2 in -20.0..20.0f64) {
            let g = unit_grid();
            let drift = DriftField::constant(&g, (b1, b2));
            let cfg = PathConfig::new(0.05, 10).unwrap();
            let k = StreamKey { seed, step: 0, point: 0, lane: 0, path: 0 };
            let out = simulate_path(Point::new(x, y), &drift, &g.domain, &cfg, &mut RngStream::new(k)).unwrap();
            let d = g.domain;
            match out {
                PathOutcome::Exited { point, .. } => {
                    let dist = (point.x - d.x_l).abs().min((point.x - d.x_r).abs())
                        .min((point.y - d.y_l).abs()).min((point.y - d.y_u).abs());
                    prop_assert!(dist <= 1e-12);
                    prop_assert!(d.contains_closed(point));
                }
                PathOutcome::Interior(p) => prop_assert!(d.contains(p)),
            }
        }
    }
}
