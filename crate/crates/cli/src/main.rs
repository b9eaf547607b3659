//! `rvk`: generate synthetic radar scenes, estimate cluster velocities, and
//! benchmark the parallel engine against the sequential baseline.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
//! runtime failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use rvk::bench::{self, BenchConfig};
use rvk::clustering::{ClusteringParams, Feature};
use rvk::frame_io;
use rvk::parallel;
use rvk::pipeline::{estimate_frame, Mode, PipelineConfig};
use rvk::ransac::RansacParams;
use rvk::synth::SceneFile;

#[derive(Parser, Debug)]
#[command(name = "rvk", version, about = "Radar cluster velocity estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate frames and ground truth from a scene config.
    Generate {
        scene: PathBuf,
        /// Output directory; receives frames.csv and truth.csv.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Estimate per-cluster velocities for every frame of a frame CSV.
    Estimate {
        frames: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// TOML file with estimator settings; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the parallel stages (0 = one per CPU).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        min_pts: Option<usize>,
        #[arg(long)]
        max_trials: Option<usize>,
        #[arg(long)]
        threshold_scale: Option<f64>,
    },
    /// Time parallel vs. sequential RANSAC and least squares.
    Bench {
        /// `default`, or a comma list of CLUSTERSxPOINTS cells such as `8x100,64x150`.
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value_t = 256)]
        max_trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Estimator settings file.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EstimateConfig {
    eps: f64,
    min_pts: usize,
    feature: Feature,
    min_cluster_size: usize,
    max_trials: usize,
    threshold_scale: f64,
    rng_seed: u64,
    mode: Mode,
    workers: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        let c = ClusteringParams::default();
        let r = RansacParams::default();
        Self {
            eps: c.eps,
            min_pts: c.min_pts,
            feature: c.feature,
            min_cluster_size: c.min_cluster_size,
            max_trials: r.max_trials,
            threshold_scale: r.threshold_scale,
            rng_seed: r.rng_seed,
            mode: Mode::Parallel,
            workers: 0,
        }
    }
}

impl EstimateConfig {
    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            clustering: ClusteringParams {
                eps: self.eps,
                min_pts: self.min_pts,
                feature: self.feature,
                min_cluster_size: self.min_cluster_size,
            },
            ransac: RansacParams {
                max_trials: self.max_trials,
                threshold_scale: self.threshold_scale,
                rng_seed: self.rng_seed,
            },
            mode: self.mode,
            ..Default::default()
        }
    }
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome = Result<(), Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn generate(scene: &Path, output: &Path) -> Outcome {
    let file = SceneFile::load(scene)
        .with_context(|| format!("reading scene {}", scene.display()))
        .map_err(config_err)?;
    let generated = file.generate().map_err(config_err)?;
    let (frames, truth): (Vec<_>, Vec<_>) = generated.into_iter().unzip();
    fs::create_dir_all(output)
        .with_context(|| format!("creating {}", output.display()))
        .map_err(runtime_err)?;
    frame_io::write_frames(&frames, output.join("frames.csv")).map_err(runtime_err)?;
    frame_io::write_truth(&truth, output.join("truth.csv")).map_err(runtime_err)?;
    let points: usize = frames.iter().map(|f| f.len()).sum();
    eprintln!("wrote {} frame(s), {points} points to {}", frames.len(), output.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    frames_path: &Path,
    output: &Path,
    config: Option<&Path>,
    mode: Option<Mode>,
    seed: Option<u64>,
    workers: Option<usize>,
    eps: Option<f64>,
    min_pts: Option<usize>,
    max_trials: Option<usize>,
    threshold_scale: Option<f64>,
) -> Outcome {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))
                .map_err(config_err)?;
            toml::from_str::<EstimateConfig>(&text)
                .with_context(|| format!("parsing config {}", p.display()))
                .map_err(config_err)?
        }
        None => EstimateConfig::default(),
    };
    cfg.mode = mode.unwrap_or(cfg.mode);
    cfg.rng_seed = seed.unwrap_or(cfg.rng_seed);
    cfg.workers = workers.unwrap_or(cfg.workers);
    cfg.eps = eps.unwrap_or(cfg.eps);
    cfg.min_pts = min_pts.unwrap_or(cfg.min_pts);
    cfg.max_trials = max_trials.unwrap_or(cfg.max_trials);
    cfg.threshold_scale = threshold_scale.unwrap_or(cfg.threshold_scale);
    let pipeline = cfg.pipeline();
    pipeline.clustering.validate().map_err(config_err)?;
    pipeline.ransac.validate().map_err(config_err)?;

    let frames = frame_io::read_frames(frames_path)
        .with_context(|| format!("reading frames {}", frames_path.display()))
        .map_err(config_err)?;

    let mut estimates = Vec::new();
    let mut failed = 0;
    parallel::with_workers(cfg.workers, || {
        for frame in &frames {
            match estimate_frame(frame, &pipeline) {
                Ok(out) => estimates.extend(out.estimates),
                Err(e) => {
                    failed += 1;
                    eprintln!("frame {}: {e}", frame.frame_id);
                }
            }
        }
    });
    frame_io::write_estimates(&estimates, output).map_err(runtime_err)?;
    eprintln!(
        "{} frame(s), {} estimate(s), {failed} frame error(s) -> {}",
        frames.len(),
        estimates.len(),
        output.display()
    );
    Ok(())
}

fn parse_grid(spec: &str) -> anyhow::Result<Vec<(usize, usize)>> {
    if spec == "default" {
        return Ok(bench::default_grid());
    }
    spec.split(',')
        .map(|cell| {
            let (c, p) = cell
                .trim()
                .split_once('x')
                .ok_or_else(|| anyhow!("grid cell `{cell}` is not CLUSTERSxPOINTS"))?;
            Ok((c.parse()?, p.parse()?))
        })
        .collect()
}

fn run_bench(grid: &str, output: &Path, reps: usize, warmup: usize, workers: usize, max_trials: usize, seed: u64) -> Outcome {
    let grid = parse_grid(grid).map_err(config_err)?;
    let cfg = BenchConfig {
        grid,
        warmup,
        reps,
        workers,
        ransac: RansacParams {
            max_trials,
            rng_seed: seed,
            ..Default::default()
        },
        ..Default::default()
    };
    cfg.ransac.validate().map_err(config_err)?;
    let rows = bench::run_bench(&cfg);
    print!("{}", bench::format_bench_table(&rows));
    for s in bench::scaling(&rows) {
        println!(
            "{} pts/cluster, {} -> {} clusters: RANSAC par x{:.2} seq x{:.2} | LSQ par x{:.2} seq x{:.2}",
            s.points_per_cluster,
            s.from_clusters,
            s.to_clusters,
            s.parallel_ransac,
            s.sequential_ransac,
            s.parallel_lsq,
            s.sequential_lsq
        );
    }
    fs::write(output, bench::format_bench_csv(&rows))
        .with_context(|| format!("writing {}", output.display()))
        .map_err(runtime_err)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate { scene, output } => generate(scene, output),
        Command::Estimate {
            frames,
            output,
            config,
            mode,
            seed,
            workers,
            eps,
            min_pts,
            max_trials,
            threshold_scale,
        } => estimate(
            frames,
            output,
            config.as_deref(),
            *mode,
            *seed,
            *workers,
            *eps,
            *min_pts,
            *max_trials,
            *threshold_scale,
        ),
        Command::Bench {
            grid,
            output,
            reps,
            warmup,
            workers,
            max_trials,
            seed,
        } => run_bench(grid, output, *reps, *warmup, *workers, *max_trials, *seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
