//! Frame-level orchestration: clustering, inlier filtering, velocity solve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{sequential_lsq, sequential_ransac};
use crate::clustering::{dbscan, extract_clusters, ClusteringError, ClusteringParams};
use crate::ransac::{combine_masks, gather_samples, run_ransac, RansacError, RansacParams};
use crate::solver::{estimate_all, SolverParams};
use crate::types::{Cluster, Frame, InlierMask, VelocityEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Data-parallel RANSAC followed by parallel per-cluster solves.
    #[default]
    Parallel,
    /// Single-threaded reference path; identical output to `Parallel`.
    Sequential,
    /// Least squares on every cluster point, no inlier filtering.
    LsqOnly,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parallel" => Ok(Mode::Parallel),
            "sequential" => Ok(Mode::Sequential),
            "lsq-only" => Ok(Mode::LsqOnly),
            other => Err(format!("unknown mode `{other}` (parallel, sequential, lsq-only)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    pub clustering: ClusteringParams,
    pub ransac: RansacParams,
    pub solver: SolverParams,
    pub mode: Mode,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Ransac(#[from] RansacError),
}

/// Everything produced for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEstimate {
    /// The input frame with labels filled.
    pub frame: Frame,
    pub clusters: Vec<Cluster>,
    pub masks: Vec<InlierMask>,
    /// Frame-level inlier subset.
    pub inliers: Vec<bool>,
    pub estimates: Vec<VelocityEstimate>,
}

/// Inlier masks and velocities for already-formed clusters.
pub fn estimate_clusters(
    frame: &Frame,
    clusters: &[Cluster],
    cfg: &PipelineConfig,
) -> Result<(Vec<InlierMask>, Vec<VelocityEstimate>), RansacError> {
    let masks = match cfg.mode {
        Mode::LsqOnly => clusters.iter().map(|c| InlierMask::all(c.cluster_id, c.len())).collect(),
        Mode::Parallel => run_ransac(&gather_samples(frame, clusters), &cfg.ransac)?,
        Mode::Sequential => sequential_ransac(&gather_samples(frame, clusters), &cfg.ransac)?,
    };
    let estimates = match cfg.mode {
        Mode::Sequential => sequential_lsq(frame, clusters, &masks, &cfg.solver),
        _ => estimate_all(frame, clusters, &masks, &cfg.solver),
    };
    Ok((masks, estimates))
}

/// Clusters `frame` and estimates the velocity of every cluster.
pub fn estimate_frame(frame: &Frame, cfg: &PipelineConfig) -> Result<FrameEstimate, PipelineError> {
    cfg.clustering.validate()?;
    cfg.ransac.validate()?;
    let mut labelled = if frame.is_empty() {
        Frame {
            labels: Some(Vec::new()),
            ..frame.clone()
        }
    } else {
        dbscan(frame.clone(), &cfg.clustering)?
    };
    let clusters = extract_clusters(&mut labelled, cfg.clustering.min_cluster_size);
    let (masks, estimates) = estimate_clusters(&labelled, &clusters, cfg)?;
    let inliers = combine_masks(&labelled, &clusters, &masks);
    Ok(FrameEstimate {
        frame: labelled,
        clusters,
        masks,
        inliers,
        estimates,
    })
}
