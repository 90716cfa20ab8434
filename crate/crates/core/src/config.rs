//! Run configuration and its TOML file form.
//!
//! ```toml
//! [monitor]
//! type = "rotating_ring"
//! alpha = 10.0
//! beta = -50.0
//!
//! [grid]
//! nx = 41
//! ny = 41
//!
//! [subdomains]
//! m = 2
//! n = 2
//!
//! [time]
//! dt = 0.001
//! t_end = 0.75
//!
//! [stochastic]
//! n_sub = 20
//! n_paths = 10000
//! seed = 42
//!
//! [output]
//! directory = "out"
//! snapshot_times = [0.25, 0.5, 0.75]
//! formats = ["csv", "svg"]
//! ```
//!
//! Missing keys fall back to the defaults of [`RunConfig::experiment`] and are
//! reported as notices; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::PhysicalDomain;
use crate::hermite::HermiteKind;
use crate::monitor::{Monitor, RotatingRingParams, UniformMonitor};
use crate::subsolver::DriftScheme;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MonitorSpec {
    RotatingRing { alpha: f64, beta: f64 },
    Uniform,
}

impl MonitorSpec {
    pub fn build(&self) -> Box<dyn Monitor> {
        match *self {
            MonitorSpec::RotatingRing { alpha, beta } => Box::new(RotatingRingParams { alpha, beta }),
            MonitorSpec::Uniform => Box::new(UniformMonitor),
        }
    }
}

/// When the monitor is sampled for the step `t^n -> t^{n+1}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezeEpoch {
    #[default]
    Current,
    Next,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Stochastic interfaces plus subdomain solves.
    #[default]
    Dd,
    /// Deterministic reference solve on the whole grid.
    SingleDomain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: PhysicalDomain,
    pub nx: usize,
    pub ny: usize,
    /// Subdomains along `x` and `y`.
    pub m: usize,
    pub n: usize,
    pub monitor: MonitorSpec,
    pub dt: f64,
    pub t_end: f64,
    pub n_sub: usize,
    pub n_paths: u64,
    /// Anchor budget per interface line, boundary ends and cross points
    /// included.
    pub points_per_interface: usize,
    pub seed: u64,
    pub freeze: FreezeEpoch,
    pub output_times: Vec<f64>,
    pub mode: Mode,
    pub hermite: HermiteKind,
    pub drift_scheme: DriftScheme,
    /// Estimate `xi` and `eta` at a point from one shared path ensemble.
    pub shared_paths: bool,
}

impl RunConfig {
    /// The rotating-ring experiment: 41x41 nodes, 2x2 subdomains,
    /// `dt = 0.001` up to `t = 0.75`, 20 sub-steps and 10000 paths.
    pub fn experiment() -> Self {
        RunConfig {
            domain: PhysicalDomain::unit_square(),
            nx: 41,
            ny: 41,
            m: 2,
            n: 2,
            monitor: MonitorSpec::RotatingRing { alpha: 10.0, beta: -50.0 },
            dt: 0.001,
            t_end: 0.75,
            n_sub: 20,
            n_paths: 10_000,
            points_per_interface: 8,
            seed: 42,
            freeze: FreezeEpoch::Current,
            output_times: vec![0.25, 0.5, 0.75],
            mode: Mode::Dd,
            hermite: HermiteKind::Monotone,
            drift_scheme: DriftScheme::Centered,
            shared_paths: false,
        }
    }

    /// Reduced variant for quick checks: 2000 paths, 6 anchors per interface,
    /// run to `t = 0.05`.
    pub fn ci() -> Self {
        RunConfig {
            n_paths: 2000,
            t_end: 0.05,
            points_per_interface: 6,
            output_times: vec![0.05],
            ..Self::experiment()
        }
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.domain
            .validate()
            .map_err(|e| Error::config("domain", e.to_string()))?;
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::config("grid.nx", "grids need at least 3 nodes per axis"));
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::config("subdomains", "counts must be at least 1"));
        }
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::config("time.dt", format!("must be positive, got {}", self.dt)));
        }
        if !self.t_end.is_finite() || self.t_end < 0.0 {
            return Err(Error::config("time.t_end", format!("must be non-negative, got {}", self.t_end)));
        }
        if self.n_sub == 0 {
            return Err(Error::config("stochastic.n_sub", "must be at least 1"));
        }
        if self.n_paths == 0 {
            return Err(Error::config("stochastic.n_paths", "must be at least 1"));
        }
        if self.points_per_interface < 2 {
            return Err(Error::config("stochastic.points_per_interface", "must be at least 2"));
        }
        if let MonitorSpec::RotatingRing { alpha, beta } = self.monitor {
            if !alpha.is_finite() || alpha < 0.0 {
                return Err(Error::config("monitor.alpha", "must be non-negative"));
            }
            if !beta.is_finite() {
                return Err(Error::config("monitor.beta", "must be finite"));
            }
        }
        for &t in &self.output_times {
            let k = t / self.dt;
            let on_step = (k - k.round()).abs() <= 1e-6 * k.abs().max(1.0);
            if t.is_nan() || t < 0.0 || t > self.t_end + 1e-12 || !on_step {
                return Err(Error::config(
                    "output.snapshot_times",
                    format!("{t} is not a multiple of dt within [0, t_end]"),
                ));
            }
        }
        Ok(())
    }

    /// Short stable digest of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Svg,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Svg],
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    x_l: Option<f64>,
    x_r: Option<f64>,
    y_l: Option<f64>,
    y_u: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    nx: Option<usize>,
    ny: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubdomainSection {
    m: Option<usize>,
    n: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    dt: Option<f64>,
    t_end: Option<f64>,
    freeze: Option<FreezeEpoch>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StochasticSection {
    n_sub: Option<usize>,
    n_paths: Option<u64>,
    points_per_interface: Option<usize>,
    seed: Option<u64>,
    shared_paths: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    mode: Option<Mode>,
    hermite: Option<HermiteKind>,
    drift_scheme: Option<DriftScheme>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonitorSection {
    #[serde(rename = "type")]
    kind: Option<String>,
    alpha: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    directory: Option<PathBuf>,
    snapshot_times: Option<Vec<f64>>,
    formats: Option<Vec<OutputFormat>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    domain: DomainSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    subdomains: SubdomainSection,
    #[serde(default)]
    time: TimeSection,
    #[serde(default)]
    stochastic: StochasticSection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    monitor: MonitorSection,
    #[serde(default)]
    output: OutputSection,
}

/// A validated configuration plus the defaults that were filled in.
#[derive(Clone, Debug)]
pub struct ParsedConfig {
    pub run: RunConfig,
    pub output: OutputConfig,
    pub notices: Vec<String>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_paths: Option<u64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub n_sub: Option<usize>,
    pub subdomains: Option<(usize, usize)>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
}

/// Parse `MxN`.
pub fn parse_subdomains(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::config("subdomains", format!("expected MxN, got `{s}`"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn pick<T: std::fmt::Debug>(value: Option<T>, default: T, key: &str, notices: &mut Vec<String>) -> T {
    value.unwrap_or_else(|| {
        let msg = format!("`{key}` not set, using default {default:?}");
        log::info!("{msg}");
        notices.push(msg);
        default
    })
}

pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<ParsedConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let key = e
            .message()
            .split('`')
            .nth(1)
            .unwrap_or("document")
            .to_string();
        Error::config(key, e.to_string())
    })?;
    let d = RunConfig::experiment();
    let mut notices = Vec::new();
    let n = &mut notices;

    let monitor = match file.monitor.kind.as_deref() {
        None | Some("rotating_ring") => {
            if file.monitor.kind.is_none() {
                pick::<&str>(None, "rotating_ring", "monitor.type", n);
            }
            MonitorSpec::RotatingRing {
                alpha: pick(file.monitor.alpha, 10.0, "monitor.alpha", n),
                beta: pick(file.monitor.beta, -50.0, "monitor.beta", n),
            }
        }
        Some("uniform") => MonitorSpec::Uniform,
        Some(other) => return Err(Error::config("monitor.type", format!("unknown monitor `{other}`"))),
    };

    let mut run = RunConfig {
        domain: PhysicalDomain {
            x_l: pick(file.domain.x_l, d.domain.x_l, "domain.x_l", n),
            x_r: pick(file.domain.x_r, d.domain.x_r, "domain.x_r", n),
            y_l: pick(file.domain.y_l, d.domain.y_l, "domain.y_l", n),
            y_u: pick(file.domain.y_u, d.domain.y_u, "domain.y_u", n),
        },
        nx: pick(file.grid.nx, d.nx, "grid.nx", n),
        ny: pick(file.grid.ny, d.ny, "grid.ny", n),
        m: pick(file.subdomains.m, d.m, "subdomains.m", n),
        n: pick(file.subdomains.n, d.n, "subdomains.n", n),
        monitor,
        dt: pick(file.time.dt, d.dt, "time.dt", n),
        t_end: pick(file.time.t_end, d.t_end, "time.t_end", n),
        n_sub: pick(file.stochastic.n_sub, d.n_sub, "stochastic.n_sub", n),
        n_paths: pick(file.stochastic.n_paths, d.n_paths, "stochastic.n_paths", n),
        points_per_interface: pick(
            file.stochastic.points_per_interface,
            d.points_per_interface,
            "stochastic.points_per_interface",
            n,
        ),
        seed: pick(file.stochastic.seed, d.seed, "stochastic.seed", n),
        freeze: pick(file.time.freeze, d.freeze, "time.freeze", n),
        output_times: pick(file.output.snapshot_times, d.output_times.clone(), "output.snapshot_times", n),
        mode: pick(file.solver.mode, d.mode, "solver.mode", n),
        hermite: pick(file.solver.hermite, d.hermite, "solver.hermite", n),
        drift_scheme: pick(file.solver.drift_scheme, d.drift_scheme, "solver.drift_scheme", n),
        shared_paths: pick(file.stochastic.shared_paths, d.shared_paths, "stochastic.shared_paths", n),
    };
    let defaults = OutputConfig::default();
    let mut output = OutputConfig {
        directory: pick(file.output.directory, defaults.directory, "output.directory", n),
        formats: pick(file.output.formats, defaults.formats, "output.formats", n),
    };

    overrides.apply(&mut run, &mut output);
    run.validate()?;
    Ok(ParsedConfig { run, output, notices })
}

impl Overrides {
    /// Overwrite the fields that were given. A new end time drops later
    /// snapshot times and falls back to a single snapshot at the end.
    pub fn apply(&self, run: &mut RunConfig, output: &mut OutputConfig) {
        if let Some(v) = self.seed {
            run.seed = v;
        }
        if let Some(v) = self.n_paths {
            run.n_paths = v;
        }
        if let Some(v) = self.dt {
            run.dt = v;
        }
        if let Some(v) = self.t_end {
            run.t_end = v;
            run.output_times.retain(|&t| t <= v);
            if run.output_times.is_empty() {
                run.output_times.push(v);
            }
        }
        if let Some(v) = self.n_sub {
            run.n_sub = v;
        }
        if let Some((m, n)) = self.subdomains {
            run.m = m;
            run.n = n;
        }
        if let Some(v) = self.mode {
            run.mode = v;
        }
        if let Some(v) = &self.out {
            output.directory = v.clone();
        }
    }
}

/// A built-in preset with `overrides` applied.
pub fn from_preset(run: RunConfig, overrides: &Overrides) -> Result<ParsedConfig> {
    let mut run = run;
    let mut output = OutputConfig::default();
    overrides.apply(&mut run, &mut output);
    run.validate()?;
    Ok(ParsedConfig { run, output, notices: Vec::new() })
}

pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPERIMENT: &str = r#"
[monitor]
type = "rotating_ring"
alpha = 10.0
beta = -50.0

[grid]
nx = 41
ny = 41

[subdomains]
m = 2
n = 2

[time]
dt = 0.001
t_end = 0.75

[stochastic]
n_sub = 20
n_paths = 10000
"#;

    #[test]
    fn experiment_preset_file() {
        let p = parse_config_str(EXPERIMENT, &Overrides::default()).unwrap();
        let r = &p.run;
        assert_eq!(r.monitor, MonitorSpec::RotatingRing { alpha: 10.0, beta: -50.0 });
        assert_eq!((r.nx, r.ny, r.m, r.n), (41, 41, 2, 2));
        assert_eq!((r.dt, r.n_sub, r.n_paths, r.t_end), (0.001, 20, 10000, 0.75));
        assert_eq!(r.n_steps(), 750);
        assert_eq!(r, &RunConfig::experiment());
    }

    #[test]
    fn missing_n_sub_defaults_with_notice() {
        let text = EXPERIMENT.replace("n_sub = 20\n", "");
        let p = parse_config_str(&text, &Overrides::default()).unwrap();
        assert_eq!(p.run.n_sub, 20);
        assert!(p.notices.iter().any(|m| m.contains("stochastic.n_sub")));
    }

    #[test]
    fn zero_dt_names_the_key() {
        let text = EXPERIMENT.replace("dt = 0.001", "dt = 0.0");
        let err = parse_config_str(&text, &Overrides::default()).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key.contains("dt")), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_types_are_rejected() {
        let err = parse_config_str("[grid]\nnx = 41\nnz = 3\n", &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("nz"), "{err}");
        assert!(parse_config_str("[grid]\nnx = \"many\"\n", &Overrides::default()).is_err());
        assert!(parse_config_str("[monitor]\ntype = \"spiral\"\n", &Overrides::default()).is_err());
        assert!(parse_config_str("[output]\nsnapshot_times = [0.0005]\n", &Overrides::default()).is_err());
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            seed: Some(7),
            n_paths: Some(100),
            t_end: Some(0.05),
            subdomains: Some((1, 1)),
            ..Default::default()
        };
        let p = parse_config_str(EXPERIMENT, &o).unwrap();
        assert_eq!((p.run.seed, p.run.n_paths, p.run.m, p.run.n), (7, 100, 1, 1));
        assert_eq!(p.run.output_times, vec![0.05]);
        assert_eq!(parse_subdomains("3x2").unwrap(), (3, 2));
        assert!(parse_subdomains("3by2").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::experiment();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
