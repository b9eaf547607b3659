//! Least-squares vector velocity and heading per cluster.
//!
//! Under the rigid-body assumption every point `k` of a cluster satisfies
//! `v_r[k] = v_x cos θ[k] + v_y sin θ[k]`. Stacking the rows `(cos θ, sin θ)`
//! gives an `N x 2` design matrix `A`, and the velocity is the least-squares
//! solution `A⁺ v_r`. With two unknowns the pseudoinverse reduces to the 2x2
//! normal equations `(AᵀA) v = Aᵀ v_r`, solved here in closed form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{wrap_angle, Cluster, EstimateIssue, Frame, InlierMask, VelocityEstimate};

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SolveError {
    #[error("need at least 2 rows, got {0}")]
    TooFewPoints(usize),
    #[error("{rows} design rows but {dopplers} dopplers")]
    LengthMismatch { rows: usize, dopplers: usize },
    #[error("design matrix is rank deficient (bearings too close together)")]
    RankDeficient,
    #[error("velocity is zero; heading undefined")]
    ZeroVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Relative tolerance on `det(AᵀA)` against `(trace(AᵀA) / 2)²`.
    pub rank_tolerance: f64,
    /// Both components below this (m/s) means no heading.
    pub zero_velocity: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            rank_tolerance: 1e-8,
            zero_velocity: 1e-9,
        }
    }
}

/// Rows `(cos θ, sin θ)`, one per point.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: Vec<[f64; 2]>,
}

impl DesignMatrix {
    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `AᵀA` as `[s_cc, s_cs, s_ss]`.
    pub fn gram(&self) -> [f64; 3] {
        self.rows.iter().fold([0.0; 3], |[cc, cs, ss], [c, s]| {
            [cc + c * c, cs + c * s, ss + s * s]
        })
    }

    /// `Aᵀ v_r`.
    pub fn project(&self, dopplers: &[f64]) -> [f64; 2] {
        self.rows
            .iter()
            .zip(dopplers)
            .fold([0.0; 2], |[bc, bs], ([c, s], d)| [bc + c * d, bs + s * d])
    }
}

pub fn build_design_matrix(azimuths: &[f64]) -> Result<DesignMatrix, SolveError> {
    if azimuths.len() < 2 {
        return Err(SolveError::TooFewPoints(azimuths.len()));
    }
    Ok(design_rows(azimuths))
}

fn design_rows(azimuths: &[f64]) -> DesignMatrix {
    DesignMatrix {
        rows: azimuths
            .iter()
            .map(|t| {
                let (s, c) = t.sin_cos();
                [c, s]
            })
            .collect(),
    }
}

/// Least-squares `(v_x, v_y)` with the default rank tolerance.
pub fn solve_velocity(a: &DesignMatrix, dopplers: &[f64]) -> Result<(f64, f64), SolveError> {
    solve_velocity_with(a, dopplers, SolverParams::default().rank_tolerance)
}

pub fn solve_velocity_with(a: &DesignMatrix, dopplers: &[f64], rank_tolerance: f64) -> Result<(f64, f64), SolveError> {
    if a.len() != dopplers.len() {
        return Err(SolveError::LengthMismatch {
            rows: a.len(),
            dopplers: dopplers.len(),
        });
    }
    if a.len() < 2 {
        return Err(SolveError::TooFewPoints(a.len()));
    }
    let [cc, cs, ss] = a.gram();
    let det = cc * ss - cs * cs;
    let half_trace = 0.5 * (cc + ss);
    if det.is_nan() || det < rank_tolerance * half_trace * half_trace {
        return Err(SolveError::RankDeficient);
    }
    let [bc, bs] = a.project(dopplers);
    Ok(((ss * bc - cs * bs) / det, (cc * bs - cs * bc) / det))
}

/// Minimum-norm least-squares solution restricted to the dominant bearing of
/// `a`. For rows that all share one bearing this is that bearing scaled by
/// the mean Doppler. Returns zero for an empty matrix.
pub fn min_norm_fallback(a: &DesignMatrix, dopplers: &[f64]) -> (f64, f64) {
    let [cc, cs, ss] = a.gram();
    if cc + ss == 0.0 {
        return (0.0, 0.0);
    }
    // principal eigenvector of the symmetric 2x2 Gram matrix
    let angle = 0.5 * (2.0 * cs).atan2(cc - ss);
    let (uy, ux) = angle.sin_cos();
    let [bc, bs] = a.project(dopplers);
    let g_uu = ux * ux * cc + 2.0 * ux * uy * cs + uy * uy * ss;
    let scale = (ux * bc + uy * bs) / g_uu;
    (scale * ux, scale * uy)
}

/// Quadrant-aware heading of `(v_x, v_y)` in `(-π, π]`.
pub fn heading_angle(v_x: f64, v_y: f64) -> Result<f64, SolveError> {
    heading_angle_with(v_x, v_y, SolverParams::default().zero_velocity)
}

pub fn heading_angle_with(v_x: f64, v_y: f64, zero_velocity: f64) -> Result<f64, SolveError> {
    if v_x.abs() < zero_velocity && v_y.abs() < zero_velocity {
        return Err(SolveError::ZeroVelocity);
    }
    Ok(wrap_angle(v_y.atan2(v_x)))
}

/// Solves one cluster from the points its mask keeps.
pub fn estimate_cluster(
    frame: &Frame,
    cluster: &Cluster,
    mask: Option<&InlierMask>,
    params: &SolverParams,
) -> VelocityEstimate {
    let mut est = VelocityEstimate {
        frame_id: frame.frame_id,
        cluster_id: cluster.cluster_id,
        v_x: 0.0,
        v_y: 0.0,
        heading: None,
        inlier_count: 0,
        condition_ok: false,
        issue: None,
    };
    let Some(mask) = mask.filter(|m| m.cluster_id == cluster.cluster_id && m.mask.len() == cluster.len()) else {
        est.issue = Some(EstimateIssue::InconsistentInput);
        return est;
    };

    let (azimuths, dopplers): (Vec<f64>, Vec<f64>) = cluster
        .point_indices
        .iter()
        .zip(&mask.mask)
        .filter(|(_, &keep)| keep)
        .map(|(&i, _)| (frame.points[i].azimuth, frame.points[i].doppler))
        .unzip();
    est.inlier_count = azimuths.len();

    let a = design_rows(&azimuths);
    let (v_x, v_y) = match solve_velocity_with(&a, &dopplers, params.rank_tolerance) {
        Ok(v) => {
            est.condition_ok = true;
            v
        }
        Err(e) => {
            est.issue = Some(match e {
                SolveError::TooFewPoints(_) => EstimateIssue::TooFewPoints,
                _ => EstimateIssue::RankDeficient,
            });
            min_norm_fallback(&a, &dopplers)
        }
    };
    est.v_x = v_x;
    est.v_y = v_y;
    est.heading = heading_angle_with(v_x, v_y, params.zero_velocity).ok();
    est
}

/// Solves every cluster in parallel. `masks[k]` belongs to `clusters[k]`;
/// output order follows `clusters`.
pub fn estimate_all(
    frame: &Frame,
    clusters: &[Cluster],
    masks: &[InlierMask],
    params: &SolverParams,
) -> Vec<VelocityEstimate> {
    clusters
        .par_iter()
        .enumerate()
        .map(|(k, c)| estimate_cluster(frame, c, masks.get(k), params))
        .collect()
}
