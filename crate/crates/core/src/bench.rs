//! Parallel vs. sequential timing over a grid of cluster counts and cluster
//! sizes.
//!
//! Every cell builds a [`grid_scene`](crate::synth::grid_scene) frame with
//! ground-truth clusters and times four arms: parallel and sequential RANSAC,
//! parallel and sequential least squares. Each arm reports the median of
//! `reps` runs after `warmup` discarded runs.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use crate::baseline::{sequential_lsq, sequential_ransac};
use crate::parallel;
use crate::ransac::{gather_samples, run_ransac, RansacParams};
use crate::solver::{estimate_all, SolverParams};
use crate::synth::{generate_frame, grid_scene};

pub const BENCH_HEADER: &str =
    "n_clusters,points_per_cluster,parallel_ransac_ms,sequential_ransac_ms,parallel_lsq_ms,sequential_lsq_ms";

pub const DEFAULT_CLUSTERS: [usize; 4] = [8, 16, 32, 64];
pub const DEFAULT_POINTS: [usize; 2] = [100, 150];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// `(n_clusters, points_per_cluster)` cells, run in order.
    pub grid: Vec<(usize, usize)>,
    pub warmup: usize,
    pub reps: usize,
    /// Worker threads for the parallel arms; 0 picks automatically.
    pub workers: usize,
    pub ransac: RansacParams,
    pub scene_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            warmup: 3,
            reps: 20,
            workers: 0,
            ransac: RansacParams::default(),
            scene_seed: 2021,
        }
    }
}

pub fn default_grid() -> Vec<(usize, usize)> {
    DEFAULT_CLUSTERS
        .iter()
        .flat_map(|&c| DEFAULT_POINTS.iter().map(move |&p| (c, p)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n_clusters: usize,
    pub points_per_cluster: usize,
    pub parallel_ransac_ms: f64,
    pub sequential_ransac_ms: f64,
    pub parallel_lsq_ms: f64,
    pub sequential_lsq_ms: f64,
    /// Set when the cell could not be measured; timings are then NaN.
    pub failure: Option<String>,
}

impl BenchRow {
    fn failed(n_clusters: usize, points_per_cluster: usize, why: String) -> Self {
        Self {
            n_clusters,
            points_per_cluster,
            parallel_ransac_ms: f64::NAN,
            sequential_ransac_ms: f64::NAN,
            parallel_lsq_ms: f64::NAN,
            sequential_lsq_ms: f64::NAN,
            failure: Some(why),
        }
    }
}

/// Median wall time in milliseconds of `reps` calls after `warmup` calls.
pub fn median_ms<R>(warmup: usize, reps: usize, mut f: impl FnMut() -> R) -> f64 {
    for _ in 0..warmup {
        black_box(f());
    }
    let mut samples: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            black_box(f());
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

fn bench_cell(cfg: &BenchConfig, pool: &rayon::ThreadPool, n_clusters: usize, points: usize) -> BenchRow {
    let spec = grid_scene(n_clusters, points, cfg.scene_seed ^ ((n_clusters as u64) << 32 | points as u64));
    let (frame, truth) = match generate_frame(&spec) {
        Ok(v) => v,
        Err(e) => return BenchRow::failed(n_clusters, points, e.to_string()),
    };
    let clusters = truth.clusters();
    let samples = gather_samples(&frame, &clusters);
    let masks = match sequential_ransac(&samples, &cfg.ransac) {
        Ok(m) => m,
        Err(e) => return BenchRow::failed(n_clusters, points, e.to_string()),
    };
    let solver = SolverParams::default();

    let parallel_ransac_ms = pool.install(|| median_ms(cfg.warmup, cfg.reps, || run_ransac(&samples, &cfg.ransac)));
    let sequential_ransac_ms = median_ms(cfg.warmup, cfg.reps, || sequential_ransac(&samples, &cfg.ransac));
    let parallel_lsq_ms =
        pool.install(|| median_ms(cfg.warmup, cfg.reps, || estimate_all(&frame, &clusters, &masks, &solver)));
    let sequential_lsq_ms = median_ms(cfg.warmup, cfg.reps, || sequential_lsq(&frame, &clusters, &masks, &solver));

    BenchRow {
        n_clusters,
        points_per_cluster: points,
        parallel_ransac_ms,
        sequential_ransac_ms,
        parallel_lsq_ms,
        sequential_lsq_ms,
        failure: None,
    }
}

pub fn run_bench(cfg: &BenchConfig) -> Vec<BenchRow> {
    let pool = parallel::pool(cfg.workers);
    cfg.grid
        .iter()
        .map(|&(c, p)| bench_cell(cfg, &pool, c, p))
        .collect()
}

fn ms(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.4}")
    }
}

pub fn format_bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n_clusters,
            r.points_per_cluster,
            ms(r.parallel_ransac_ms),
            ms(r.sequential_ransac_ms),
            ms(r.parallel_lsq_ms),
            ms(r.sequential_lsq_ms)
        );
    }
    out
}

/// Human-readable table, one line per cell.
pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>8} {:>8} | {:>12} {:>12} | {:>12} {:>12}",
        "clusters", "points", "par RANSAC", "seq RANSAC", "par LSQ", "seq LSQ"
    );
    let _ = writeln!(out, "{}", "-".repeat(73));
    for r in rows {
        let _ = write!(
            out,
            "{:>8} {:>8} | {:>10.3}ms {:>10.3}ms | {:>10.4}ms {:>10.4}ms",
            r.n_clusters,
            r.points_per_cluster,
            r.parallel_ransac_ms,
            r.sequential_ransac_ms,
            r.parallel_lsq_ms,
            r.sequential_lsq_ms
        );
        if let Some(f) = &r.failure {
            let _ = write!(out, "  FAILED: {f}");
        }
        out.push('\n');
    }
    out
}

/// Growth of each arm between the smallest and largest cluster count, per
/// points-per-cluster value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub points_per_cluster: usize,
    pub from_clusters: usize,
    pub to_clusters: usize,
    pub parallel_ransac: f64,
    pub sequential_ransac: f64,
    pub parallel_lsq: f64,
    pub sequential_lsq: f64,
}

pub fn scaling(rows: &[BenchRow]) -> Vec<Scaling> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.points_per_cluster).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .filter_map(|p| {
            let cells: Vec<&BenchRow> = rows.iter().filter(|r| r.points_per_cluster == p).collect();
            let lo = cells.iter().min_by_key(|r| r.n_clusters)?;
            let hi = cells.iter().max_by_key(|r| r.n_clusters)?;
            Some(Scaling {
                points_per_cluster: p,
                from_clusters: lo.n_clusters,
                to_clusters: hi.n_clusters,
                parallel_ransac: hi.parallel_ransac_ms / lo.parallel_ransac_ms,
                sequential_ransac: hi.sequential_ransac_ms / lo.sequential_ransac_ms,
                parallel_lsq: hi.parallel_lsq_ms / lo.parallel_lsq_ms,
                sequential_lsq: hi.sequential_lsq_ms / lo.sequential_lsq_ms,
            })
        })
        .collect()
}
