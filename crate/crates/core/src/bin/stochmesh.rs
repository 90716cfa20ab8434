use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use stochmesh::config::{
    from_preset, parse_config, parse_subdomains, Mode, OutputConfig, OutputFormat, Overrides, ParsedConfig, RunConfig,
};
use stochmesh::driver::{run_simulation, MeshSnapshot, Simulation};
use stochmesh::io::{load_mesh_csv, save_mesh_csv, save_summary, save_svg, RunSummary, SnapshotSummary};
use stochmesh::quality::{mesh_distance, quality_report};
use stochmesh::study::{driftless_mc_study, McStudy};

#[derive(Parser)]
#[command(name = "stochmesh", version, about = "Adaptive moving meshes by stochastic domain decomposition")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the domain-decomposed pipeline and write snapshots.
    Run(RunArgs),
    /// Run the deterministic single-domain solver on the same configuration.
    Reference(RunArgs),
    /// Print the distance between two snapshot CSV files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Exit with status 1 if `l_inf` exceeds this value.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Measure the Monte Carlo error decay of the driftless point estimator.
    McStudy {
        /// Path counts, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [100u64, 1000, 10000])]
        paths: Vec<u64>,
        #[arg(long, default_value_t = 32)]
        repetitions: u64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 0.001)]
        dt: f64,
        #[arg(long, default_value_t = 20)]
        substeps: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; the built-in experiment preset is used without it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo paths per interface point.
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tend: Option<f64>,
    /// Euler-Maruyama sub-steps per time step.
    #[arg(long)]
    substeps: Option<usize>,
    /// Subdomain layout, e.g. `2x2`.
    #[arg(long, value_name = "MxN")]
    subdomains: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self, mode: Option<Mode>) -> anyhow::Result<ParsedConfig> {
        let overrides = Overrides {
            seed: self.seed,
            n_paths: self.paths,
            dt: self.dt,
            t_end: self.tend,
            n_sub: self.substeps,
            subdomains: self.subdomains.as_deref().map(parse_subdomains).transpose()?,
            out: self.out.clone(),
            mode,
        };
        match &self.config {
            Some(path) => parse_config(path, &overrides).with_context(|| format!("reading {}", path.display())),
            None => Ok(from_preset(RunConfig::experiment(), &overrides)?),
        }
    }
}

fn snapshot_stem(prefix: &str, snap: &MeshSnapshot) -> String {
    format!("{prefix}_t{:.4}", snap.t)
}

fn run_pipeline(args: &RunArgs, mode: Option<Mode>, prefix: &str) -> anyhow::Result<()> {
    let ParsedConfig { run, output, .. } = args.load(mode)?;
    let OutputConfig { directory, formats } = output;
    std::fs::create_dir_all(&directory).with_context(|| format!("creating {}", directory.display()))?;
    log::info!(
        "{}x{} nodes, {}x{} subdomains, {} steps, {} paths, seed {}",
        run.nx,
        run.ny,
        run.m,
        run.n,
        run.n_steps(),
        run.n_paths,
        run.seed
    );
    let started = Instant::now();
    let mut sim = Simulation::new(run.clone())?;
    let mut summaries = Vec::new();
    let dir: &Path = &directory;
    let snaps = run_simulation(&mut sim, &mut |snap| {
        let stem = snapshot_stem(prefix, snap);
        let mut files = Vec::new();
        if formats.contains(&OutputFormat::Csv) {
            let path = dir.join(format!("{stem}.csv"));
            save_mesh_csv(&snap.state, &path)?;
            files.push(path.display().to_string());
        }
        if formats.contains(&OutputFormat::Svg) {
            let path = dir.join(format!("{stem}.svg"));
            save_svg(snap, &path)?;
            files.push(path.display().to_string());
        }
        let quality = quality_report(&snap.state)?;
        println!(
            "t = {:.4}  min jacobian = {:.6}  max deviation = {:.6}  fold-free = {}",
            snap.t, quality.min_jacobian, quality.max_node_displacement_from_uniform, quality.fold_free
        );
        summaries.push(SnapshotSummary {
            t: snap.t,
            step: snap.step,
            quality,
            stochastic_points: snap.stochastic_points.len(),
            files,
        });
        Ok(())
    })?;
    let summary = RunSummary {
        config_hash: run.hash(),
        seed: run.seed,
        config: run,
        threads: rayon::current_num_threads(),
        wall_seconds: started.elapsed().as_secs_f64(),
        max_std_error: sim.max_std_error(),
        timings: sim.timings(),
        snapshots: summaries,
    };
    let path = directory.join(format!("{prefix}_summary.json"));
    save_summary(&summary, &path)?;
    println!("{} snapshots, summary in {}", snaps.len(), path.display());
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => run_pipeline(&args, None, "mesh")?,
        Command::Reference(args) => run_pipeline(&args, Some(Mode::SingleDomain), "reference")?,
        Command::Compare { a, b, tol } => {
            let ma = load_mesh_csv(&a).with_context(|| format!("reading {}", a.display()))?;
            let mb = load_mesh_csv(&b).with_context(|| format!("reading {}", b.display()))?;
            let d = mesh_distance(&ma, &mb)?;
            println!("l_inf = {:e}", d.l_inf);
            println!("l_2 = {:e}", d.l_2);
            if let Some(tol) = tol {
                if d.l_inf > tol {
                    eprintln!("l_inf exceeds {tol:e}");
                    return Ok(ExitCode::from(1));
                }
            }
        }
        Command::McStudy { paths, repetitions, seed, dt, substeps } => {
            if paths.len() < 3 {
                bail!("--paths needs at least three values");
            }
            let study = McStudy { path_counts: paths, repetitions, seed, dt, n_sub: substeps, ..Default::default() };
            let r = driftless_mc_study(&study)?;
            println!("{:>10}  {:>14}  {:>14}", "paths", "mean |error|", "mean std err");
            for row in &r.rows {
                println!("{:>10}  {:>14.6e}  {:>14.6e}", row.n_paths, row.mean_abs_error, row.mean_std_error);
            }
            println!("rate = {:.4}", r.rate);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
