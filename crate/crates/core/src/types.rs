//! Domain types shared across the pipeline.
//!
//! Conventions used everywhere in this crate:
//!
//! * `x` is longitudinal (forward), `y` is lateral, in meters.
//! * Azimuth is measured from the +x axis toward +y, in radians, and always
//!   lies in `(-π, π]`.
//! * Doppler is the signed radial speed in m/s, positive when the target
//!   recedes from the radar.

use std::f64::consts::PI;

use thiserror::Error;

/// Smallest cluster that both RANSAC (two seeds plus one test point) and the
/// least-squares solve (two rows) can work with.
pub const MIN_CLUSTER_SIZE: usize = 3;

/// A single radar detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarPoint {
    pub x: f64,
    pub y: f64,
    /// Carried through I/O but unused by velocity estimation.
    pub z: f64,
    pub doppler: f64,
    pub azimuth: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvalidPoint {
    #[error("field `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("azimuth {0} outside (-pi, pi]")]
    AzimuthOutOfRange(f64),
}

impl RadarPoint {
    /// Builds a point, rejecting non-finite fields and azimuths outside `(-π, π]`.
    pub fn new(x: f64, y: f64, z: f64, doppler: f64, azimuth: f64) -> Result<Self, InvalidPoint> {
        let p = Self {
            x,
            y,
            z,
            doppler,
            azimuth,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), InvalidPoint> {
        for (name, v) in [
            ("x", self.x),
            ("y", self.y),
            ("z", self.z),
            ("doppler", self.doppler),
            ("azimuth", self.azimuth),
        ] {
            if !v.is_finite() {
                return Err(InvalidPoint::NonFinite(name));
            }
        }
        if !azimuth_in_range(self.azimuth) {
            return Err(InvalidPoint::AzimuthOutOfRange(self.azimuth));
        }
        Ok(())
    }
}

/// `true` when `theta` lies in `(-π, π]`.
pub fn azimuth_in_range(theta: f64) -> bool {
    theta > -PI && theta <= PI
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    if azimuth_in_range(theta) {
        return theta;
    }
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Per-point cluster assignment. `None` marks noise.
pub type Label = Option<usize>;

/// One radar frame: detections plus, once clustering has run, their labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    pub frame_id: u64,
    pub timestamp: Option<f64>,
    pub points: Vec<RadarPoint>,
    /// Same length as `points` when set. Cluster ids are contiguous from 0.
    pub labels: Option<Vec<Label>>,
}

impl Frame {
    pub fn new(frame_id: u64, points: Vec<RadarPoint>) -> Self {
        Self {
            frame_id,
            timestamp: None,
            points,
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of distinct cluster ids present in `labels`.
    pub fn cluster_count(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().flatten().max().map(|m| m + 1))
            .unwrap_or(0)
    }
}

/// Indices of the frame points that make up one object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub cluster_id: usize,
    /// Strictly increasing, non-empty.
    pub point_indices: Vec<usize>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }
}

/// Inlier membership for the points of one cluster, in cluster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InlierMask {
    pub cluster_id: usize,
    pub mask: Vec<bool>,
    pub inlier_count: usize,
    /// Trial index that produced this mask.
    pub winning_trial: usize,
}

impl InlierMask {
    /// A mask accepting every point; used when inlier filtering is skipped.
    pub fn all(cluster_id: usize, len: usize) -> Self {
        Self {
            cluster_id,
            mask: vec![true; len],
            inlier_count: len,
            winning_trial: 0,
        }
    }
}

/// Why an estimate is degraded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateIssue {
    /// Fewer than two inliers were available.
    TooFewPoints,
    /// Inlier bearings are too close together to observe both components.
    RankDeficient,
    /// The inputs did not line up (mask length or cluster id mismatch).
    InconsistentInput,
}

/// Velocity of one cluster relative to the radar.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityEstimate {
    pub frame_id: u64,
    pub cluster_id: usize,
    /// Longitudinal component, m/s.
    pub v_x: f64,
    /// Lateral component, m/s.
    pub v_y: f64,
    /// Heading in `(-π, π]`; `None` when the velocity is effectively zero.
    pub heading: Option<f64>,
    pub inlier_count: usize,
    /// `false` when the design matrix failed the rank check.
    pub condition_ok: bool,
    pub issue: Option<EstimateIssue>,
}

impl VelocityEstimate {
    pub fn speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }
}

/// Radial (line-of-sight) component of the velocity `(v_x, v_y)` seen at `azimuth`.
#[inline]
pub fn radial_projection(v_x: f64, v_y: f64, azimuth: f64) -> f64 {
    let (s, c) = azimuth.sin_cos();
    v_x * c + v_y * s
}
