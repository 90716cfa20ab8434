//! Monte Carlo convergence study on a driftless problem with a known answer.

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{BoundaryData, Coordinate};
use crate::error::Result;
use crate::fk::{estimate_point, StepContext};
use crate::geometry::{PhysicalDomain, Point, ScalarField, StructuredGrid};
use crate::monitor::DriftField;
use crate::quality::mc_rate;
use crate::sde::PathConfig;

#[derive(Clone, Debug)]
pub struct McStudy {
    pub nodes: usize,
    pub point: Point,
    pub dt: f64,
    pub n_sub: usize,
    pub path_counts: Vec<u64>,
    /// Independent repetitions averaged per path count.
    pub repetitions: u64,
    pub seed: u64,
}

impl Default for McStudy {
    fn default() -> Self {
        McStudy {
            nodes: 41,
            point: Point::new(0.5, 0.5),
            dt: 0.001,
            n_sub: 20,
            path_counts: vec![100, 1000, 10_000],
            repetitions: 32,
            seed: 2024,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct McStudyRow {
    pub n_paths: u64,
    /// Mean absolute error over the repetitions.
    pub mean_abs_error: f64,
    pub mean_std_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct McStudyResult {
    pub rows: Vec<McStudyRow>,
    pub rate: f64,
}

/// With zero drift and `xi = x` on a uniform mesh the one-step value at an
/// interior point is exactly its `x` coordinate, so every deviation of the
/// estimate is sampling error.
pub fn driftless_mc_study(study: &McStudy) -> Result<McStudyResult> {
    let grid = StructuredGrid::new(PhysicalDomain::unit_square(), study.nodes, study.nodes)?;
    let drift = DriftField::zero(&grid);
    let bd = BoundaryData::uniform(0.0, &grid);
    let xi = ScalarField::from_fn(grid, |p| p.x);
    let cfg = PathConfig::new(study.dt, study.n_sub)?;
    let exact = study.point.x;

    let mut rows = Vec::new();
    for &n in &study.path_counts {
        let errors: Vec<(f64, f64)> = (0..study.repetitions)
            .into_par_iter()
            .map(|r| {
                let ctx = StepContext { drift: &drift, bd: &bd, cfg, seed: study.seed, step: r };
                let e = estimate_point(&ctx, study.point, n, Coordinate::Xi, &xi, n)?;
                Ok(((e.mean - exact).abs(), e.std_error))
            })
            .collect::<Result<_>>()?;
        let k = errors.len() as f64;
        rows.push(McStudyRow {
            n_paths: n,
            mean_abs_error: errors.iter().map(|e| e.0).sum::<f64>() / k,
            mean_std_error: errors.iter().map(|e| e.1).sum::<f64>() / k,
        });
    }
    let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.n_paths as f64, r.mean_abs_error)).collect();
    let rate = mc_rate(&samples)?;
    Ok(McStudyResult { rows, rate })
}
