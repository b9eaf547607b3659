//! Data-parallel RANSAC inlier detection over every cluster of a frame.
//!
//! Each cluster is mapped into the unit square of (azimuth, Doppler) by
//! per-axis min-max normalisation. A line hypothesis is drawn from two seed
//! points, and every cluster point whose perpendicular distance to the line is
//! within the cluster's corridor counts as an inlier. The corridor is the mean
//! absolute deviation of the normalised Dopplers about their median, times
//! `threshold_scale`.
//!
//! A frame with `n` clusters schedules `max_trials * n` independent trials.
//! Trial `t` of cluster `c` draws its seed pair from a ChaCha stream keyed by
//! `(rng_seed, c, t)`, so the outcome does not depend on which worker runs it
//! or when. Per cluster the winner is the trial with the most inliers; ties go
//! to the lowest trial index. The parallel result is therefore bit-identical to
//! the plain sequential loop in [`crate::baseline::sequential_ransac`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Cluster, Frame, InlierMask, MIN_CLUSTER_SIZE};

/// Seed pairs whose normalised azimuths differ by less than this are rejected.
pub const SEED_EPSILON: f64 = 1e-12;

/// Absolute slack on the corridor test, so points on the line survive a zero
/// threshold despite rounding.
pub const DISTANCE_TOLERANCE: f64 = 1e-12;

/// ChaCha word offset between consecutive trials of one cluster stream.
const WORDS_PER_TRIAL: u128 = 1 << 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RansacError {
    #[error("seed points share an azimuth; slope undefined")]
    DegenerateSeeds,
    #[error("cluster {cluster_id} has {len} points, need at least {MIN_CLUSTER_SIZE}")]
    ClusterTooSmall { cluster_id: usize, len: usize },
    #[error("cluster {cluster_id}: {azimuths} azimuths but {dopplers} dopplers")]
    LengthMismatch {
        cluster_id: usize,
        azimuths: usize,
        dopplers: usize,
    },
    #[error("max_trials must be at least 1")]
    NoTrials,
    #[error("threshold_scale must be positive and finite, got {0}")]
    BadThresholdScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    /// Trials evaluated per cluster.
    pub max_trials: usize,
    /// Multiplier on the MAD corridor.
    pub threshold_scale: f64,
    pub rng_seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            max_trials: 256,
            threshold_scale: 1.0,
            rng_seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<(), RansacError> {
        if self.max_trials == 0 {
            return Err(RansacError::NoTrials);
        }
        if !(self.threshold_scale.is_finite() && self.threshold_scale > 0.0) {
            return Err(RansacError::BadThresholdScale(self.threshold_scale));
        }
        Ok(())
    }

    /// Total trial tasks for a frame with `n_clusters` clusters.
    pub fn thread_count(&self, n_clusters: usize) -> usize {
        self.max_trials * n_clusters
    }
}

/// Azimuth/Doppler samples of one cluster, in cluster order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSamples {
    pub cluster_id: usize,
    pub azimuth: Vec<f64>,
    pub doppler: Vec<f64>,
}

impl ClusterSamples {
    pub fn from_frame(frame: &Frame, cluster: &Cluster) -> Self {
        let (azimuth, doppler) = cluster
            .point_indices
            .iter()
            .map(|&i| (frame.points[i].azimuth, frame.points[i].doppler))
            .unzip();
        Self {
            cluster_id: cluster.cluster_id,
            azimuth,
            doppler,
        }
    }

    pub fn len(&self) -> usize {
        self.azimuth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.azimuth.is_empty()
    }
}

pub fn gather_samples(frame: &Frame, clusters: &[Cluster]) -> Vec<ClusterSamples> {
    clusters.iter().map(|c| ClusterSamples::from_frame(frame, c)).collect()
}

/// `value -> (value - min) / span`, or `0.5` when the axis has no spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisMap {
    pub min: f64,
    pub span: f64,
}

impl AxisMap {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self { min: lo, span: hi - lo }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        if self.span > 0.0 {
            ((v - self.min) / self.span).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

/// A cluster in the normalised (azimuth, Doppler) unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCluster {
    pub pts: Vec<[f64; 2]>,
    pub azimuth_map: AxisMap,
    pub doppler_map: AxisMap,
}

impl NormalizedCluster {
    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn dopplers(&self) -> impl Iterator<Item = f64> + '_ {
        self.pts.iter().map(|p| p[1])
    }
}

/// Min-max normalises `(azimuth, doppler)` pairs per axis.
pub fn normalize_cluster(points: &[(f64, f64)]) -> NormalizedCluster {
    normalize_axes(
        &points.iter().map(|p| p.0).collect::<Vec<_>>(),
        &points.iter().map(|p| p.1).collect::<Vec<_>>(),
    )
}

fn normalize_axes(azimuth: &[f64], doppler: &[f64]) -> NormalizedCluster {
    let azimuth_map = AxisMap::fit(azimuth.iter().copied());
    let doppler_map = AxisMap::fit(doppler.iter().copied());
    let pts = azimuth
        .iter()
        .zip(doppler)
        .map(|(&a, &d)| [azimuth_map.apply(a), doppler_map.apply(d)])
        .collect();
    NormalizedCluster {
        pts,
        azimuth_map,
        doppler_map,
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean absolute deviation about the median. Zero for an empty slice.
pub fn mad(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let med = median(values);
    values.iter().map(|v| (v - med).abs()).sum::<f64>() / values.len() as f64
}

/// Inlier corridor half-width for a cluster's normalised Dopplers.
pub fn mad_threshold(normalized_dopplers: &[f64], threshold_scale: f64) -> f64 {
    threshold_scale * mad(normalized_dopplers)
}

/// `y = m x + c` in the normalised plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineModel {
    pub m: f64,
    pub c: f64,
}

pub fn line_from_seeds(p1: [f64; 2], p2: [f64; 2]) -> Result<LineModel, RansacError> {
    let dx = p2[0] - p1[0];
    if dx.abs() < SEED_EPSILON {
        return Err(RansacError::DegenerateSeeds);
    }
    let m = (p2[1] - p1[1]) / dx;
    Ok(LineModel { m, c: p1[1] - m * p1[0] })
}

/// Perpendicular distance from `p` to the line `-m x + y - c = 0`.
#[inline]
pub fn point_line_distance(line: &LineModel, p: [f64; 2]) -> f64 {
    let (aa, bb, cc) = (-line.m, 1.0, -line.c);
    let num = aa * p[0] + bb * p[1] + cc;
    let den = (aa * aa + bb * bb).sqrt();
    (num / den).abs()
}

/// Mask and count of one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub mask: Vec<bool>,
    pub inlier_count: usize,
}

#[inline]
fn is_inlier(line: &LineModel, p: [f64; 2], threshold: f64) -> bool {
    point_line_distance(line, p) <= threshold + DISTANCE_TOLERANCE
}

/// Scores one seed pair against every point of the cluster, seeds included.
/// A degenerate pair yields an empty mask.
pub fn evaluate_trial(nc: &NormalizedCluster, seeds: (usize, usize), threshold: f64) -> TrialOutcome {
    let Ok(line) = line_from_seeds(nc.pts[seeds.0], nc.pts[seeds.1]) else {
        return TrialOutcome {
            mask: vec![false; nc.len()],
            inlier_count: 0,
        };
    };
    let mask: Vec<bool> = nc
        .pts
        .iter()
        .map(|&p| is_inlier(&line, p, threshold))
        .collect();
    let inlier_count = mask.iter().filter(|&&b| b).count();
    TrialOutcome { mask, inlier_count }
}

/// Same decision as [`evaluate_trial`] without materialising the mask.
pub fn count_inliers(nc: &NormalizedCluster, seeds: (usize, usize), threshold: f64) -> usize {
    let Ok(line) = line_from_seeds(nc.pts[seeds.0], nc.pts[seeds.1]) else {
        return 0;
    };
    nc.pts
        .iter()
        .filter(|&&p| is_inlier(&line, p, threshold))
        .count()
}

/// Seed pair for trial `trial` of cluster `cluster_id`: two distinct indices
/// in `0..n`, uniform over ordered pairs. Needs `n >= 2`.
pub fn trial_seeds(rng_seed: u64, cluster_id: usize, trial: usize, n: usize) -> (usize, usize) {
    debug_assert!(n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(cluster_id as u64);
    rng.set_word_pos(trial as u128 * WORDS_PER_TRIAL);
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Per-cluster state shared by all of its trials.
#[derive(Debug, Clone)]
pub struct PreparedCluster {
    pub cluster_id: usize,
    pub normalized: NormalizedCluster,
    pub threshold: f64,
}

impl PreparedCluster {
    pub fn new(samples: &ClusterSamples, params: &RansacParams) -> Result<Self, RansacError> {
        if samples.azimuth.len() != samples.doppler.len() {
            return Err(RansacError::LengthMismatch {
                cluster_id: samples.cluster_id,
                azimuths: samples.azimuth.len(),
                dopplers: samples.doppler.len(),
            });
        }
        if samples.len() < MIN_CLUSTER_SIZE {
            return Err(RansacError::ClusterTooSmall {
                cluster_id: samples.cluster_id,
                len: samples.len(),
            });
        }
        let normalized = normalize_axes(&samples.azimuth, &samples.doppler);
        let dopplers: Vec<f64> = normalized.dopplers().collect();
        let threshold = mad_threshold(&dopplers, params.threshold_scale);
        Ok(Self {
            cluster_id: samples.cluster_id,
            normalized,
            threshold,
        })
    }

    pub fn seeds(&self, rng_seed: u64, trial: usize) -> (usize, usize) {
        trial_seeds(rng_seed, self.cluster_id, trial, self.normalized.len())
    }

    pub fn count(&self, rng_seed: u64, trial: usize) -> usize {
        count_inliers(&self.normalized, self.seeds(rng_seed, trial), self.threshold)
    }

    /// Materialises the mask of `trial` as the cluster's result.
    pub fn mask_for(&self, rng_seed: u64, trial: usize) -> InlierMask {
        let out = evaluate_trial(&self.normalized, self.seeds(rng_seed, trial), self.threshold);
        InlierMask {
            cluster_id: self.cluster_id,
            mask: out.mask,
            inlier_count: out.inlier_count,
            winning_trial: trial,
        }
    }
}

/// Validates params and prepares every cluster.
pub fn prepare_clusters(
    clusters: &[ClusterSamples],
    params: &RansacParams,
) -> Result<Vec<PreparedCluster>, RansacError> {
    params.validate()?;
    clusters.iter().map(|c| PreparedCluster::new(c, params)).collect()
}

/// Index and value of the first maximum.
pub fn first_argmax(counts: &[usize]) -> (usize, usize) {
    counts
        .iter()
        .enumerate()
        .fold((0, 0), |best, (t, &c)| if c > best.1 { (t, c) } else { best })
}

/// Runs `max_trials` trials for every cluster as one flat parallel batch and
/// returns the winning mask of each cluster, in input order.
///
/// Parallelism comes from the ambient rayon pool; wrap the call in
/// [`crate::parallel::with_workers`] to pin the worker count.
pub fn run_ransac(clusters: &[ClusterSamples], params: &RansacParams) -> Result<Vec<InlierMask>, RansacError> {
    let prepared = prepare_clusters(clusters, params)?;
    let trials = params.max_trials;
    let seed = params.rng_seed;

    // task t -> (cluster t / max_trials, trial t % max_trials)
    let counts: Vec<usize> = (0..params.thread_count(prepared.len()))
        .into_par_iter()
        .map(|t| prepared[t / trials].count(seed, t % trials))
        .collect();

    Ok(prepared
        .par_iter()
        .zip(counts.par_chunks(trials))
        .map(|(pc, cluster_counts)| {
            let (winner, _) = first_argmax(cluster_counts);
            pc.mask_for(seed, winner)
        })
        .collect())
}

/// Frame-level inlier subset: `true` where a point belongs to a cluster and is
/// an inlier of that cluster's mask. Masks are matched to clusters by id;
/// noise points and clusters without a mask stay `false`.
pub fn combine_masks(frame: &Frame, clusters: &[Cluster], masks: &[InlierMask]) -> Vec<bool> {
    let mut out = vec![false; frame.len()];
    for m in masks {
        let Some(cluster) = clusters.iter().find(|c| c.cluster_id == m.cluster_id) else {
            continue;
        };
        for (&idx, &keep) in cluster.point_indices.iter().zip(&m.mask) {
            out[idx] |= keep;
        }
    }
    out
}
