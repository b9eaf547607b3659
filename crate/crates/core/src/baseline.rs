//! Single-threaded reference implementations.
//!
//! These handle one cluster at a time and one trial at a time. They share the
//! keyed seed streams and the per-trial arithmetic with the parallel engine,
//! so their output must match [`crate::ransac::run_ransac`] and
//! [`crate::solver::estimate_all`] exactly. They double as the comparison arm
//! of the benchmark.

use crate::ransac::{prepare_clusters, ClusterSamples, RansacError, RansacParams};
use crate::solver::{estimate_cluster, SolverParams};
use crate::types::{Cluster, Frame, InlierMask, VelocityEstimate};

pub fn sequential_ransac(
    clusters: &[ClusterSamples],
    params: &RansacParams,
) -> Result<Vec<InlierMask>, RansacError> {
    let prepared = prepare_clusters(clusters, params)?;
    let mut out = Vec::with_capacity(prepared.len());
    for pc in &prepared {
        let mut best_trial = 0;
        let mut best_count = 0;
        for trial in 0..params.max_trials {
            let count = pc.count(params.rng_seed, trial);
            if count > best_count {
                best_trial = trial;
                best_count = count;
            }
        }
        out.push(pc.mask_for(params.rng_seed, best_trial));
    }
    Ok(out)
}

pub fn sequential_lsq(
    frame: &Frame,
    clusters: &[Cluster],
    masks: &[InlierMask],
    params: &SolverParams,
) -> Vec<VelocityEstimate> {
    let mut out = Vec::with_capacity(clusters.len());
    for (k, c) in clusters.iter().enumerate() {
        out.push(estimate_cluster(frame, c, masks.get(k), params));
    }
    out
}
