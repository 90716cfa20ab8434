//! Monte Carlo evaluation of the single-step Feynman-Kac formula
//!
//! ```text
//! u^{n+1}(p) = E[ u^n(X(dt)) 1{tau > dt} ] + E[ f(X(tau)) 1{tau <= dt} ]
//! ```
//!
//! where `X` starts at `p`, `u^n` is the nodal field at the previous step
//! (bilinearly interpolated) and `f` the frozen boundary data.
//!
//! Paths are split into fixed chunks whose statistics are merged in chunk
//! order, so results do not depend on the number of worker threads.

use rayon::prelude::*;

use crate::boundary::{BoundaryData, Coordinate};
use crate::error::{Error, Result};
use crate::geometry::{Point, ScalarField};
use crate::monitor::{interp_bilinear, DriftField};
use crate::sde::{simulate_path, PathConfig, PathOutcome, RngStream, StreamKey};

const CHUNK: u64 = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_paths)`.
    pub std_error: f64,
    pub n_paths: u64,
    pub n_exited: u64,
}

/// Everything a path needs that is fixed over one mesh step.
#[derive(Clone, Copy)]
pub struct StepContext<'a> {
    pub drift: &'a DriftField,
    pub bd: &'a BoundaryData,
    pub cfg: PathConfig,
    pub seed: u64,
    pub step: u64,
}

/// One point to estimate. `id` selects the random streams and must be unique
/// among the requests of a step.
#[derive(Clone, Copy)]
pub struct EstimateRequest<'a> {
    pub point: Point,
    pub id: u64,
    pub which: Coordinate,
    pub field: &'a ScalarField,
}

fn lane(which: Coordinate) -> u32 {
    match which {
        Coordinate::Xi => 0,
        Coordinate::Eta => 1,
    }
}

const SHARED_LANE: u32 = 2;

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    exited: u64,
}

impl Moments {
    fn push(&mut self, v: f64, exited: bool) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
        self.exited += exited as u64;
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
            exited: self.exited + o.exited,
        }
    }

    fn estimate(self) -> PointEstimate {
        let std_error = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
        } else {
            0.0
        };
        PointEstimate {
            mean: self.mean,
            std_error,
            n_paths: self.n,
            n_exited: self.exited,
        }
    }
}

fn contribution(
    outcome: &PathOutcome,
    field: &ScalarField,
    which: Coordinate,
    bd: &BoundaryData,
) -> Result<f64> {
    match *outcome {
        PathOutcome::Interior(p) => interp_bilinear(field, p),
        PathOutcome::Exited { point, .. } => bd.eval_boundary(which, point),
    }
}

fn chunks(n_paths: u64) -> Vec<(u64, u64)> {
    (0..n_paths.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(n_paths)))
        .collect()
}

/// Run `n_paths` paths from `point` and accumulate, for every `(which, field)`
/// target, the per-path contribution. All targets share the same paths.
fn run_ensemble(
    ctx: &StepContext<'_>,
    point: Point,
    id: u64,
    lane: u32,
    targets: &[(Coordinate, &ScalarField)],
    n_paths: u64,
) -> Result<Vec<PointEstimate>> {
    if n_paths == 0 {
        return Err(Error::NoPaths);
    }
    let domain = ctx.bd.grid.domain;
    let partials: Vec<Vec<Moments>> = chunks(n_paths)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = vec![Moments::default(); targets.len()];
            for path in lo..hi {
                let key = StreamKey {
                    seed: ctx.seed,
                    step: ctx.step,
                    point: id,
                    lane,
                    path,
                };
                let mut rng = RngStream::new(key);
                let out = simulate_path(point, ctx.drift, &domain, &ctx.cfg, &mut rng)?;
                for (m, (which, field)) in acc.iter_mut().zip(targets) {
                    m.push(contribution(&out, field, *which, ctx.bd)?, out.exited());
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut total = vec![Moments::default(); targets.len()];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t = t.merge(p);
        }
    }
    Ok(total.into_iter().map(Moments::estimate).collect())
}

pub fn estimate_point(
    ctx: &StepContext<'_>,
    point: Point,
    id: u64,
    which: Coordinate,
    field: &ScalarField,
    n_paths: u64,
) -> Result<PointEstimate> {
    let mut r = run_ensemble(ctx, point, id, lane(which), &[(which, field)], n_paths)?;
    Ok(r.remove(0))
}

/// Estimate `xi` and `eta` at `point` from a single shared path ensemble.
pub fn estimate_pair(
    ctx: &StepContext<'_>,
    point: Point,
    id: u64,
    xi: &ScalarField,
    eta: &ScalarField,
    n_paths: u64,
) -> Result<(PointEstimate, PointEstimate)> {
    let r = run_ensemble(
        ctx,
        point,
        id,
        SHARED_LANE,
        &[(Coordinate::Xi, xi), (Coordinate::Eta, eta)],
        n_paths,
    )?;
    Ok((r[0], r[1]))
}

/// Independent estimates at every request, in request order.
pub fn estimate_many(
    ctx: &StepContext<'_>,
    requests: &[EstimateRequest<'_>],
    n_paths: u64,
) -> Result<Vec<PointEstimate>> {
    requests
        .par_iter()
        .map(|r| estimate_point(ctx, r.point, r.id, r.which, r.field, n_paths))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PhysicalDomain, StructuredGrid};
    use crate::sde::ZeroNoise;

    fn setup() -> (StructuredGrid, DriftField, BoundaryData, ScalarField) {
        let g = StructuredGrid::new(PhysicalDomain::unit_square(), 41, 41).unwrap();
        let drift = DriftField::zero(&g);
        let bd = BoundaryData::uniform(0.0, &g);
        let xi = ScalarField::from_fn(g, |p| p.x);
        (g, drift, bd, xi)
    }

    fn ctx<'a>(drift: &'a DriftField, bd: &'a BoundaryData, dt: f64) -> StepContext<'a> {
        StepContext { drift, bd, cfg: PathConfig::new(dt, 20).unwrap(), seed: 11, step: 0 }
    }

    #[test]
    fn driftless_estimate_is_unbiased() {
        let (_, drift, bd, xi) = setup();
        // large dt so a good share of paths exit, all through the bottom edge,
        // where the projected crossing leaves the x coordinate unbiased
        let c = ctx(&drift, &bd, 0.02);
        let p = Point::new(0.5, 0.12);
        let e = estimate_point(&c, p, 5, Coordinate::Xi, &xi, 20_000).unwrap();
        assert!(e.n_exited > 100, "{e:?}");
        assert!((e.mean - p.x).abs() < 3.0 * e.std_error, "{e:?}");
        assert_eq!(e.n_paths, 20_000);
    }

    #[test]
    fn frozen_single_path() {
        let (g, drift, bd, _) = setup();
        let field = ScalarField::from_fn(g, |p| (p.x * 3.0).sin() + p.y);
        let p = Point::new(0.3125, 0.61);
        let out = simulate_path(p, &drift, &g.domain, &PathConfig::new(0.001, 20).unwrap(), &mut ZeroNoise).unwrap();
        let m = Moments::default();
        let mut m = m;
        m.push(contribution(&out, &field, Coordinate::Xi, &bd).unwrap(), out.exited());
        let e = m.estimate();
        assert_eq!(e.mean, interp_bilinear(&field, p).unwrap());
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn zero_paths_is_an_error() {
        let (_, drift, bd, xi) = setup();
        let c = ctx(&drift, &bd, 0.001);
        assert!(matches!(
            estimate_point(&c, Point::new(0.5, 0.5), 0, Coordinate::Xi, &xi, 0),
            Err(Error::NoPaths)
        ));
        assert!(estimate_point(&c, Point::new(0.0, 0.5), 0, Coordinate::Xi, &xi, 10).is_err());
    }

    #[test]
    fn estimate_many_matches_point_calls() {
        let (g, drift, bd, xi) = setup();
        let eta = ScalarField::from_fn(g, |p| p.y);
        let c = ctx(&drift, &bd, 0.001);
        assert!(estimate_many(&c, &[], 100).unwrap().is_empty());
        let reqs: Vec<EstimateRequest> = (0..5)
            .map(|k| EstimateRequest {
                point: Point::new(0.1 + 0.15 * k as f64, 0.5),
                id: k,
                which: if k % 2 == 0 { Coordinate::Xi } else { Coordinate::Eta },
                field: if k % 2 == 0 { &xi } else { &eta },
            })
            .collect();
        let many = estimate_many(&c, &reqs, 700).unwrap();
        for (r, e) in reqs.iter().zip(&many) {
            let single = estimate_point(&c, r.point, r.id, r.which, r.field, 700).unwrap();
            assert_eq!(single.mean.to_bits(), e.mean.to_bits());
            assert_eq!(single.std_error.to_bits(), e.std_error.to_bits());
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let (g, _, bd, xi) = setup();
        let drift = DriftField::constant(&g, (2.0, -1.0));
        let c = ctx(&drift, &bd, 0.01);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_point(&c, Point::new(0.9, 0.2), 3, Coordinate::Xi, &xi, 3000).unwrap())
        };
        let (a, b) = (run(1), run(8));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn shared_ensemble_pairs() {
        let (g, drift, bd, xi) = setup();
        let eta = ScalarField::from_fn(g, |p| p.y);
        let c = ctx(&drift, &bd, 0.01);
        let p = Point::new(0.4, 0.7);
        let (ex, ee) = estimate_pair(&c, p, 9, &xi, &eta, 4000).unwrap();
        assert_eq!(ex.n_exited, ee.n_exited);
        assert!((ex.mean - 0.4).abs() < 4.0 * ex.std_error);
        assert!((ee.mean - 0.7).abs() < 4.0 * ee.std_error);
    }

    #[test]
    fn estimates_stay_in_data_range() {
        let (g, _, _, _) = setup();
        let drift = DriftField::constant(&g, (5.0, 5.0));
        let mf = crate::monitor::sample_monitor(0.0, &g, &crate::monitor::RotatingRingParams::default());
        let bd = crate::boundary::build_boundary_data(0.0, &mf).unwrap();
        let field = ScalarField::from_fn(g, |p| 0.2 + 0.6 * p.x * p.x);
        let c = ctx(&drift, &bd, 0.05);
        for k in 0..6u64 {
            let p = Point::new(0.05 + 0.17 * k as f64, 0.93);
            let e = estimate_point(&c, p, k, Coordinate::Xi, &field, 500).unwrap();
            assert!((0.0..=1.0).contains(&e.mean), "{e:?}");
        }
    }
}
