//! Time stepping: monitor sampling, interface estimation, interface filling
//! and the parallel subdomain solves.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{build_boundary_data, BoundaryData, Coordinate};
use crate::config::{FreezeEpoch, Mode, RunConfig};
use crate::ddlayout::{
    apply_labels, fill_interface, partition_grid, select_stochastic_points, Anchor, Partition, PointKind,
};
use crate::error::{Error, Result};
use crate::fk::{estimate_many, estimate_pair, EstimateRequest, PointEstimate, StepContext};
use crate::geometry::{initial_mesh, MeshState, StructuredGrid};
use crate::monitor::{drift_from_monitor, sample_monitor, DriftField, Monitor};
use crate::sde::PathConfig;
use crate::subsolver::{impose_boundary, step_single_domain, step_subdomain, EdgeValues, SubdomainSolution};

/// Accumulated wall time per stage, in seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub monitor: f64,
    pub boundary: f64,
    pub selection: f64,
    pub stochastic: f64,
    pub fill: f64,
    pub subsolve: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.monitor + self.boundary + self.selection + self.stochastic + self.fill + self.subsolve
    }
}

/// Where interface values come from in a step.
#[derive(Clone, Copy, Debug)]
pub enum InterfaceSource<'a> {
    /// Monte Carlo estimates at the selected points.
    Stochastic,
    /// Values of a reference mesh at the selected points, interpolated in
    /// between like the stochastic ones.
    PinnedPoints(&'a MeshState),
    /// Values of a reference mesh at every interface node.
    PinnedLines(&'a MeshState),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StepReport {
    pub step: u64,
    /// Grid nodes estimated by Monte Carlo, `(i, j)`.
    pub stochastic_points: Vec<(usize, usize)>,
    pub max_std_error: f64,
    pub exit_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshSnapshot {
    pub t: f64,
    pub step: u64,
    #[serde(skip)]
    pub state: MeshState,
    pub stochastic_points: Vec<(usize, usize)>,
    /// Interior split columns and rows.
    pub interface_columns: Vec<usize>,
    pub interface_rows: Vec<usize>,
    pub seed: u64,
    pub config_hash: String,
}

pub struct Simulation {
    cfg: RunConfig,
    monitor: Box<dyn Monitor>,
    grid: StructuredGrid,
    partition: Partition,
    state: MeshState,
    step: u64,
    timings: StageTimings,
    last: StepReport,
    max_std_error: f64,
}

impl Simulation {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let monitor = cfg.monitor.build();
        Self::with_monitor(cfg, monitor)
    }

    /// Use `monitor` instead of the one named in the configuration.
    pub fn with_monitor(cfg: RunConfig, monitor: Box<dyn Monitor>) -> Result<Self> {
        cfg.validate()?;
        let grid = StructuredGrid::new(cfg.domain, cfg.nx, cfg.ny)?;
        let partition = match cfg.mode {
            Mode::Dd => partition_grid(&grid, cfg.m, cfg.n)?,
            Mode::SingleDomain => partition_grid(&grid, 1, 1)?,
        };
        let mut state = initial_mesh(&grid);
        let t0 = sample_monitor(0.0, &grid, monitor.as_ref());
        impose_boundary(&mut state, &build_boundary_data(0.0, &t0)?)?;
        Ok(Simulation {
            cfg,
            monitor,
            grid,
            partition,
            state,
            step: 0,
            timings: StageTimings::default(),
            last: StepReport::default(),
            max_std_error: 0.0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn state(&self) -> &MeshState {
        &self.state
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn timings(&self) -> StageTimings {
        self.timings
    }

    pub fn last_report(&self) -> &StepReport {
        &self.last
    }

    /// Largest Monte Carlo standard error seen so far.
    pub fn max_std_error(&self) -> f64 {
        self.max_std_error
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_with(InterfaceSource::Stochastic)
    }

    pub fn step_with(&mut self, source: InterfaceSource<'_>) -> Result<()> {
        let dt = self.cfg.dt;
        let t_next = (self.step + 1) as f64 * dt;
        let t_freeze = match self.cfg.freeze {
            FreezeEpoch::Current => self.step as f64 * dt,
            FreezeEpoch::Next => t_next,
        };

        let clock = Instant::now();
        let mf = sample_monitor(t_freeze, &self.grid, self.monitor.as_ref());
        let drift = drift_from_monitor(&mf).map_err(|e| e.in_stage("monitor"))?;
        self.timings.monitor += clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let bd = build_boundary_data(t_next, &mf).map_err(|e| e.in_stage("boundary"))?;
        self.timings.boundary += clock.elapsed().as_secs_f64();

        let next = if self.partition.interfaces.is_empty() {
            let clock = Instant::now();
            let next = step_single_domain(&self.state, &drift, dt, &bd, self.cfg.drift_scheme)
                .map_err(|e| e.in_stage("subsolve"))?;
            self.timings.subsolve += clock.elapsed().as_secs_f64();
            self.last = StepReport { step: self.step + 1, ..Default::default() };
            next
        } else {
            self.dd_step(&mf.rho(), &drift, &bd, source)?
        };
        self.state = next;
        self.state.t = t_next;
        self.step += 1;
        Ok(())
    }

    fn dd_step(
        &mut self,
        rho: &crate::geometry::ScalarField,
        drift: &DriftField,
        bd: &BoundaryData,
        source: InterfaceSource<'_>,
    ) -> Result<MeshState> {
        let cfg = &self.cfg;
        let g = self.grid;

        let clock = Instant::now();
        let mut interfaces = self.partition.interfaces.clone();
        for iface in &mut interfaces {
            let labels = match source {
                InterfaceSource::PinnedLines(_) => vec![PointKind::Stochastic; iface.points.len()],
                _ => select_stochastic_points(iface, rho, cfg.points_per_interface),
            };
            apply_labels(iface, &labels);
            iface.set_boundary_anchors(bd).map_err(|e| e.in_stage("selection"))?;
        }
        self.timings.selection += clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let targets: Vec<(usize, usize)> = interfaces
            .iter()
            .enumerate()
            .flat_map(|(f, iface)| {
                iface
                    .points
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.kind == PointKind::Stochastic)
                    .map(move |(q, _)| (f, q))
            })
            .collect();
        let mut report = StepReport { step: self.step + 1, ..Default::default() };
        match source {
            InterfaceSource::Stochastic => {
                let ctx = StepContext {
                    drift,
                    bd,
                    cfg: PathConfig::new(cfg.dt, cfg.n_sub)?,
                    seed: cfg.seed,
                    step: self.step,
                };
                let estimates = self
                    .estimate(&ctx, &interfaces, &targets)
                    .map_err(|e| e.in_stage("stochastic"))?;
                let mut exited = 0u64;
                let mut total = 0u64;
                for (&(f, q), (ex, ee)) in targets.iter().zip(estimates) {
                    let p = &mut interfaces[f].points[q];
                    p.xi = ex.mean;
                    p.eta = ee.mean;
                    p.std_error = Some((ex.std_error, ee.std_error));
                    report.max_std_error = report.max_std_error.max(ex.std_error).max(ee.std_error);
                    exited += ex.n_exited + ee.n_exited;
                    total += ex.n_paths + ee.n_paths;
                }
                report.exit_fraction = if total > 0 { exited as f64 / total as f64 } else { 0.0 };
            }
            InterfaceSource::PinnedPoints(reference) | InterfaceSource::PinnedLines(reference) => {
                if reference.grid().nx != g.nx || reference.grid().ny != g.ny {
                    return Err(Error::GridMismatch);
                }
                for &(f, q) in &targets {
                    let p = &mut interfaces[f].points[q];
                    p.xi = reference.xi.at(p.i, p.j);
                    p.eta = reference.eta.at(p.i, p.j);
                }
            }
        }
        report.stochastic_points = targets
            .iter()
            .map(|&(f, q)| (interfaces[f].points[q].i, interfaces[f].points[q].j))
            .collect();
        self.timings.stochastic += clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let crosses: HashMap<(usize, usize), (f64, f64)> = interfaces
            .iter()
            .flat_map(|f| f.points.iter().filter(|p| p.cross))
            .map(|p| ((p.i, p.j), (p.xi, p.eta)))
            .collect();
        for iface in &mut interfaces {
            for s in iface.foreign.clone() {
                let &(xi, eta) = &crosses[&iface.node(s)];
                iface.add_anchor(Anchor { s, xi, eta });
            }
            fill_interface(iface, &g, cfg.hermite).map_err(|e| e.in_stage("fill"))?;
        }

        let mut dirichlet = self.state.clone();
        impose_boundary(&mut dirichlet, bd).map_err(|e| e.in_stage("fill"))?;
        for iface in &interfaces {
            for p in &iface.points {
                dirichlet.xi.set(p.i, p.j, p.xi);
                dirichlet.eta.set(p.i, p.j, p.eta);
            }
        }
        self.timings.fill += clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let old = &self.state;
        let scheme = cfg.drift_scheme;
        let solutions: Vec<SubdomainSolution> = self
            .partition
            .subdomains
            .par_iter()
            .map(|rect| {
                let xe = EdgeValues::from_field(&dirichlet.xi, rect);
                let ee = EdgeValues::from_field(&dirichlet.eta, rect);
                step_subdomain(rect, old, drift, cfg.dt, &xe, &ee, scheme)
            })
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("subsolve"))?;
        for sol in &solutions {
            sol.write_into(&mut dirichlet);
        }
        self.timings.subsolve += clock.elapsed().as_secs_f64();

        self.max_std_error = self.max_std_error.max(report.max_std_error);
        self.last = report;
        Ok(dirichlet)
    }

    fn estimate(
        &self,
        ctx: &StepContext<'_>,
        interfaces: &[crate::ddlayout::Interface],
        targets: &[(usize, usize)],
    ) -> Result<Vec<(PointEstimate, PointEstimate)>> {
        let n_paths = self.cfg.n_paths;
        let points: Vec<_> = targets.iter().map(|&(f, q)| &interfaces[f].points[q]).collect();
        if self.cfg.shared_paths {
            return points
                .par_iter()
                .map(|p| {
                    let id = self.grid.index(p.i, p.j) as u64;
                    estimate_pair(ctx, p.coord, id, &self.state.xi, &self.state.eta, n_paths)
                })
                .collect();
        }
        let requests: Vec<EstimateRequest<'_>> = points
            .iter()
            .flat_map(|p| {
                let id = self.grid.index(p.i, p.j) as u64;
                [
                    EstimateRequest { point: p.coord, id, which: Coordinate::Xi, field: &self.state.xi },
                    EstimateRequest { point: p.coord, id, which: Coordinate::Eta, field: &self.state.eta },
                ]
            })
            .collect();
        let flat = estimate_many(ctx, &requests, n_paths)?;
        Ok(flat.chunks_exact(2).map(|c| (c[0], c[1])).collect())
    }

    pub fn snapshot(&self) -> MeshSnapshot {
        let inner = |s: &[usize]| s[1..s.len() - 1].to_vec();
        MeshSnapshot {
            t: self.state.t,
            step: self.step,
            state: self.state.clone(),
            stochastic_points: self.last.stochastic_points.clone(),
            interface_columns: inner(&self.partition.i_splits),
            interface_rows: inner(&self.partition.j_splits),
            seed: self.cfg.seed,
            config_hash: self.cfg.hash(),
        }
    }
}

/// Run `cfg` to `t_end`, calling `on_snapshot` at every output time. With
/// `t_end = 0` the single snapshot is the initial mesh.
pub fn run(cfg: &RunConfig, mut on_snapshot: impl FnMut(&MeshSnapshot) -> Result<()>) -> Result<Vec<MeshSnapshot>> {
    let mut sim = Simulation::new(cfg.clone())?;
    run_simulation(&mut sim, &mut on_snapshot)
}

pub fn run_simulation(
    sim: &mut Simulation,
    on_snapshot: &mut dyn FnMut(&MeshSnapshot) -> Result<()>,
) -> Result<Vec<MeshSnapshot>> {
    let cfg = sim.config().clone();
    let n_steps = cfg.n_steps();
    let mut marks: Vec<u64> = cfg.output_times.iter().map(|&t| (t / cfg.dt).round() as u64).collect();
    if marks.is_empty() || n_steps == 0 {
        marks.push(n_steps);
    }
    marks.sort_unstable();
    marks.dedup();

    let mut out = Vec::new();
    let mut emit = |sim: &Simulation, out: &mut Vec<MeshSnapshot>| -> Result<()> {
        let snap = sim.snapshot();
        on_snapshot(&snap)?;
        out.push(snap);
        Ok(())
    };
    if marks.first() == Some(&0) {
        emit(sim, &mut out)?;
    }
    while sim.steps_taken() < n_steps {
        sim.step()?;
        let k = sim.steps_taken();
        if marks.binary_search(&k).is_ok() {
            emit(sim, &mut out)?;
        }
        if k.is_multiple_of(50) {
            log::debug!("step {k}/{n_steps}, t = {:.4}", sim.time());
        }
    }
    Ok(out)
}
