//! Density-based clustering of frame points.
//!
//! Plain DBSCAN with a brute-force neighbourhood search. A point is a core
//! point when at least `min_pts` points (itself included) lie within `eps`.
//! Clusters are numbered in the order their first core point appears in the
//! frame. A border point reachable from several clusters joins the one with
//! the lowest id.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Cluster, Frame, Label, RadarPoint, MIN_CLUSTER_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    /// Cartesian ground-plane position.
    #[default]
    Xy,
    Xyz,
}

impl Feature {
    #[inline]
    pub fn dist2(self, a: &RadarPoint, b: &RadarPoint) -> f64 {
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        match self {
            Feature::Xy => dx * dx + dy * dy,
            Feature::Xyz => {
                let dz = a.z - b.z;
                dx * dx + dy * dy + dz * dz
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringParams {
    /// Neighbourhood radius in meters.
    pub eps: f64,
    pub min_pts: usize,
    pub feature: Feature,
    /// Clusters smaller than this are dissolved into noise.
    pub min_cluster_size: usize,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            eps: 1.5,
            min_pts: 3,
            feature: Feature::Xy,
            min_cluster_size: MIN_CLUSTER_SIZE,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusteringError {
    #[error("eps must be positive and finite, got {0}")]
    BadEps(f64),
    #[error("min_pts must be at least 1")]
    BadMinPts,
    #[error("min_cluster_size must be at least {MIN_CLUSTER_SIZE}, got {0}")]
    BadMinClusterSize(usize),
}

impl ClusteringParams {
    pub fn validate(&self) -> Result<(), ClusteringError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(ClusteringError::BadEps(self.eps));
        }
        if self.min_pts < 1 {
            return Err(ClusteringError::BadMinPts);
        }
        if self.min_cluster_size < MIN_CLUSTER_SIZE {
            return Err(ClusteringError::BadMinClusterSize(self.min_cluster_size));
        }
        Ok(())
    }
}

fn neighbourhoods(points: &[RadarPoint], eps: f64, feature: Feature) -> Vec<Vec<usize>> {
    let eps2 = eps * eps;
    points
        .par_iter()
        .map(|p| {
            points
                .iter()
                .enumerate()
                .filter(|(_, q)| feature.dist2(p, q) <= eps2)
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

/// Labels every point of `points` with a cluster id or `None` (noise).
pub fn dbscan_labels(points: &[RadarPoint], params: &ClusteringParams) -> Result<Vec<Label>, ClusteringError> {
    params.validate()?;
    let neighbours = neighbourhoods(points, params.eps, params.feature);
    let is_core: Vec<bool> = neighbours.iter().map(|n| n.len() >= params.min_pts).collect();

    let mut labels: Vec<Label> = vec![None; points.len()];
    let mut next_id = 0;
    let mut queue = Vec::new();
    for seed in 0..points.len() {
        if !is_core[seed] || labels[seed].is_some() {
            continue;
        }
        let id = next_id;
        next_id += 1;
        labels[seed] = Some(id);
        queue.push(seed);
        while let Some(p) = queue.pop() {
            for &q in &neighbours[p] {
                if labels[q].is_none() {
                    labels[q] = Some(id);
                    if is_core[q] {
                        queue.push(q);
                    }
                }
            }
        }
    }
    Ok(labels)
}

/// Runs DBSCAN on `frame`, filling its labels.
pub fn dbscan(mut frame: Frame, params: &ClusteringParams) -> Result<Frame, ClusteringError> {
    frame.labels = Some(dbscan_labels(&frame.points, params)?);
    Ok(frame)
}

/// Collects the labelled clusters of `frame`. Clusters with fewer than
/// `min_cluster_size` points are relabelled as noise and the survivors are
/// renumbered so ids stay contiguous. A frame without labels has no clusters.
pub fn extract_clusters(frame: &mut Frame, min_cluster_size: usize) -> Vec<Cluster> {
    let Some(labels) = frame.labels.as_mut() else {
        return Vec::new();
    };
    let n_ids = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_ids];
    for (i, l) in labels.iter().enumerate() {
        if let Some(id) = l {
            members[*id].push(i);
        }
    }
    let mut remap: Vec<Option<usize>> = vec![None; n_ids];
    let mut clusters = Vec::new();
    for (old, idx) in members.into_iter().enumerate() {
        if idx.len() >= min_cluster_size.max(1) {
            remap[old] = Some(clusters.len());
            clusters.push(Cluster {
                cluster_id: clusters.len(),
                point_indices: idx,
            });
        }
    }
    for l in labels.iter_mut() {
        *l = l.and_then(|id| remap[id]);
    }
    clusters
}
