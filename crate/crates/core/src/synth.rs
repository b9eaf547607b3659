//! Synthetic radar scenes with known per-object velocities.
//!
//! Each object is a box of uniformly placed reflectors sharing one velocity.
//! Point Dopplers follow the radial projection of that velocity plus Gaussian
//! noise. A fixed fraction of each object's points additionally receives a
//! uniform Doppler offset, standing in for micro-Doppler returns from wheels
//! and other moving sub-parts. Stray clutter points can be scattered over the
//! field of view. The ego vehicle is stationary, so every velocity is
//! relative to the radar.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{radial_projection, wrap_angle, Cluster, Frame, RadarPoint, MIN_CLUSTER_SIZE};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("scene config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported scene schema version {0} (expected {SCENE_SCHEMA_VERSION})")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(msg: impl Into<String>) -> SpecError {
    SpecError::InvalidSpec(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierSign {
    /// Offset sign drawn uniformly.
    #[default]
    Symmetric,
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    /// Box centre `(x, y)`, meters.
    pub center: [f64; 2],
    /// Box size `(dx, dy)`, meters.
    pub extent: [f64; 2],
    /// Ground-truth `(v_x, v_y)`, m/s.
    pub velocity: [f64; 2],
    pub n_points: usize,
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default)]
    pub doppler_noise_sigma: f64,
    /// Offset magnitude range `(min, max)`, m/s.
    #[serde(default = "default_offset_range")]
    pub outlier_offset_range: [f64; 2],
    #[serde(default)]
    pub outlier_sign: OutlierSign,
}

fn default_offset_range() -> [f64; 2] {
    [2.0, 5.0]
}

impl ObjectSpec {
    fn bounds(&self) -> [f64; 4] {
        let [cx, cy] = self.center;
        let [dx, dy] = self.extent;
        [cx - 0.5 * dx, cx + 0.5 * dx, cy - 0.5 * dy, cy + 0.5 * dy]
    }

    /// Gap between the two boxes along the axis that separates them most.
    pub fn gap_to(&self, other: &ObjectSpec) -> f64 {
        let [ax0, ax1, ay0, ay1] = self.bounds();
        let [bx0, bx1, by0, by1] = other.bounds();
        let gx = (bx0 - ax1).max(ax0 - bx1);
        let gy = (by0 - ay1).max(ay0 - by1);
        gx.max(gy)
    }

    pub fn outlier_count(&self) -> usize {
        (self.outlier_fraction * self.n_points as f64).floor() as usize
    }

    fn validate(&self, k: usize) -> Result<(), SpecError> {
        let finite = self.center.iter().chain(&self.extent).chain(&self.velocity).all(|v| v.is_finite());
        if !finite {
            return Err(invalid(format!("object {k}: non-finite geometry or velocity")));
        }
        if self.extent.iter().any(|&e| e < 0.0) {
            return Err(invalid(format!("object {k}: negative extent")));
        }
        if self.n_points < MIN_CLUSTER_SIZE {
            return Err(invalid(format!("object {k}: n_points must be at least {MIN_CLUSTER_SIZE}")));
        }
        if !(0.0..0.5).contains(&self.outlier_fraction) {
            return Err(invalid(format!(
                "object {k}: outlier_fraction {} must lie in [0, 0.5)",
                self.outlier_fraction
            )));
        }
        if !(self.doppler_noise_sigma.is_finite() && self.doppler_noise_sigma >= 0.0) {
            return Err(invalid(format!("object {k}: doppler_noise_sigma must be >= 0")));
        }
        let [lo, hi] = self.outlier_offset_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(invalid(format!("object {k}: outlier_offset_range needs 0 <= min <= max")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub objects: Vec<ObjectSpec>,
    pub n_noise_points: usize,
    /// Azimuth interval for clutter, radians.
    pub field_of_view: [f64; 2],
    /// Range interval for clutter, meters.
    pub noise_range: [f64; 2],
    /// Doppler interval for clutter, m/s.
    pub noise_doppler: [f64; 2],
    /// Objects must be further apart than this (meters).
    pub min_gap: f64,
    pub rng_seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            objects: Vec::new(),
            n_noise_points: 0,
            field_of_view: [-PI / 3.0, PI / 3.0],
            noise_range: [2.0, 60.0],
            noise_doppler: [-15.0, 15.0],
            min_gap: 0.0,
            rng_seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        for (k, o) in self.objects.iter().enumerate() {
            o.validate(k)?;
        }
        let [a0, a1] = self.field_of_view;
        if !(a0 > -PI && a0 <= a1 && a1 <= PI) {
            return Err(invalid("field_of_view must satisfy -pi < min <= max <= pi"));
        }
        let [r0, r1] = self.noise_range;
        if !(r0.is_finite() && r1.is_finite() && 0.0 <= r0 && r0 <= r1) {
            return Err(invalid("noise_range needs 0 <= min <= max"));
        }
        let [d0, d1] = self.noise_doppler;
        if !(d0.is_finite() && d1.is_finite() && d0 <= d1) {
            return Err(invalid("noise_doppler needs min <= max"));
        }
        if !(self.min_gap.is_finite() && self.min_gap >= 0.0) {
            return Err(invalid("min_gap must be >= 0"));
        }
        for i in 0..self.objects.len() {
            for j in i + 1..self.objects.len() {
                let gap = self.objects[i].gap_to(&self.objects[j]);
                if gap <= self.min_gap {
                    return Err(invalid(format!(
                        "objects {i} and {j} are {gap:.3} m apart, need more than {}",
                        self.min_gap
                    )));
                }
            }
        }
        Ok(())
    }
}

/// What the generator put into one object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTruth {
    pub object_id: usize,
    pub v_x: f64,
    pub v_y: f64,
    pub heading: f64,
    /// The object's points occupy `first_point..first_point + n_points`.
    pub first_point: usize,
    pub n_points: usize,
    /// Frame indices of points carrying a Doppler offset, ascending.
    pub outlier_indices: Vec<usize>,
}

impl ObjectTruth {
    pub fn contains(&self, index: usize) -> bool {
        (self.first_point..self.first_point + self.n_points).contains(&index)
    }

    pub fn speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }

    /// The object's points as a cluster with the given id.
    pub fn as_cluster(&self, cluster_id: usize) -> Cluster {
        Cluster {
            cluster_id,
            point_indices: (self.first_point..self.first_point + self.n_points).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub frame_id: u64,
    pub objects: Vec<ObjectTruth>,
}

impl GroundTruth {
    /// Object owning the majority of `cluster`'s points, if any.
    pub fn match_cluster(&self, cluster: &Cluster) -> Option<&ObjectTruth> {
        self.objects
            .iter()
            .map(|o| (o, cluster.point_indices.iter().filter(|&&i| o.contains(i)).count()))
            .filter(|&(_, n)| 2 * n > cluster.len())
            .map(|(o, _)| o)
            .next()
    }

    /// One cluster per object, ids in object order.
    pub fn clusters(&self) -> Vec<Cluster> {
        self.objects.iter().enumerate().map(|(k, o)| o.as_cluster(k)).collect()
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn make_point(x: f64, y: f64, doppler: f64) -> RadarPoint {
    RadarPoint {
        x,
        y,
        z: 0.0,
        doppler,
        azimuth: wrap_angle(y.atan2(x)),
    }
}

/// Generates frame 0 of `spec`.
pub fn generate_frame(spec: &SceneSpec) -> Result<(Frame, GroundTruth), SpecError> {
    generate_frame_with_id(spec, 0)
}

/// Generates frame `frame_id` of `spec`. Each frame id gets its own random
/// stream, so frames of one scene are independent draws.
pub fn generate_frame_with_id(spec: &SceneSpec, frame_id: u64) -> Result<(Frame, GroundTruth), SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    rng.set_stream(frame_id);

    let mut points = Vec::with_capacity(spec.objects.iter().map(|o| o.n_points).sum::<usize>() + spec.n_noise_points);
    let mut truth = GroundTruth {
        frame_id,
        objects: Vec::with_capacity(spec.objects.len()),
    };
    for (object_id, o) in spec.objects.iter().enumerate() {
        let first = points.len();
        let [vx, vy] = o.velocity;
        let [x0, x1, y0, y1] = o.bounds();
        let noise = Normal::new(0.0, o.doppler_noise_sigma).expect("sigma validated");
        for _ in 0..o.n_points {
            let x = uniform(&mut rng, [x0, x1]);
            let y = uniform(&mut rng, [y0, y1]);
            let mut p = make_point(x, y, 0.0);
            p.doppler = radial_projection(vx, vy, p.azimuth);
            if o.doppler_noise_sigma > 0.0 {
                p.doppler += noise.sample(&mut rng);
            }
            points.push(p);
        }
        let mut outliers: Vec<usize> = sample(&mut rng, o.n_points, o.outlier_count())
            .into_iter()
            .map(|k| first + k)
            .collect();
        outliers.sort_unstable();
        for &k in &outliers {
            let magnitude = uniform(&mut rng, o.outlier_offset_range);
            let sign = match o.outlier_sign {
                OutlierSign::Positive => 1.0,
                OutlierSign::Negative => -1.0,
                OutlierSign::Symmetric => {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            points[k].doppler += sign * magnitude;
        }
        truth.objects.push(ObjectTruth {
            object_id,
            v_x: vx,
            v_y: vy,
            heading: wrap_angle(vy.atan2(vx)),
            first_point: first,
            n_points: o.n_points,
            outlier_indices: outliers,
        });
    }
    for _ in 0..spec.n_noise_points {
        let az = uniform(&mut rng, spec.field_of_view);
        let r = uniform(&mut rng, spec.noise_range);
        let d = uniform(&mut rng, spec.noise_doppler);
        points.push(make_point(r * az.cos(), r * az.sin(), d));
    }
    Ok((Frame::new(frame_id, points), truth))
}

/// Shape of randomly drawn scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSceneConfig {
    pub objects: (usize, usize),
    pub points: (usize, usize),
    pub speed: (f64, f64),
    pub extent: (f64, f64),
    /// Region for object centres: `[x_min, x_max, y_min, y_max]`.
    pub region: [f64; 4],
    pub min_gap: f64,
    pub outlier_fraction: f64,
    pub doppler_noise_sigma: f64,
    pub outlier_offset_range: [f64; 2],
    pub n_noise_points: usize,
}

impl Default for RandomSceneConfig {
    fn default() -> Self {
        Self {
            objects: (1, 8),
            points: (20, 200),
            speed: (2.0, 25.0),
            extent: (1.5, 4.0),
            region: [6.0, 45.0, -20.0, 20.0],
            min_gap: 4.0,
            outlier_fraction: 0.0,
            doppler_noise_sigma: 0.0,
            outlier_offset_range: [2.0, 5.0],
            n_noise_points: 0,
        }
    }
}

/// Draws a valid scene from `cfg`. Object placement retries until every pair
/// of boxes is separated by more than `cfg.min_gap`.
pub fn random_scene(cfg: &RandomSceneConfig, seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_objects = rng.random_range(cfg.objects.0..=cfg.objects.1);
    let mut objects: Vec<ObjectSpec> = Vec::with_capacity(n_objects);
    let mut attempts = 0;
    while objects.len() < n_objects {
        attempts += 1;
        assert!(attempts < 100_000, "region too small for {n_objects} objects");
        let speed = rng.random_range(cfg.speed.0..=cfg.speed.1);
        let heading = rng.random_range(-PI..PI);
        let candidate = ObjectSpec {
            center: [
                rng.random_range(cfg.region[0]..cfg.region[1]),
                rng.random_range(cfg.region[2]..cfg.region[3]),
            ],
            extent: [
                rng.random_range(cfg.extent.0..=cfg.extent.1),
                rng.random_range(cfg.extent.0..=cfg.extent.1),
            ],
            velocity: [speed * heading.cos(), speed * heading.sin()],
            n_points: rng.random_range(cfg.points.0..=cfg.points.1),
            outlier_fraction: cfg.outlier_fraction,
            doppler_noise_sigma: cfg.doppler_noise_sigma,
            outlier_offset_range: cfg.outlier_offset_range,
            outlier_sign: OutlierSign::Symmetric,
        };
        if objects.iter().all(|o| o.gap_to(&candidate) > cfg.min_gap) {
            objects.push(candidate);
        }
    }
    SceneSpec {
        objects,
        n_noise_points: cfg.n_noise_points,
        min_gap: cfg.min_gap,
        rng_seed: rng.random(),
        ..SceneSpec::default()
    }
}

/// Regular benchmark layout: `n_clusters` 2 m boxes on an 8-wide grid with
/// 8 m pitch, `points_per_cluster` points each, 20% outliers.
pub fn grid_scene(n_clusters: usize, points_per_cluster: usize, seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects = (0..n_clusters)
        .map(|k| {
            let (row, col) = (k / 8, k % 8);
            let heading = rng.random_range(-PI..PI);
            let speed = rng.random_range(2.0..20.0);
            ObjectSpec {
                center: [10.0 + 8.0 * row as f64, -28.0 + 8.0 * col as f64],
                extent: [2.0, 2.0],
                velocity: [speed * f64::cos(heading), speed * f64::sin(heading)],
                n_points: points_per_cluster,
                outlier_fraction: 0.2,
                doppler_noise_sigma: 0.05,
                outlier_offset_range: [2.0, 5.0],
                outlier_sign: OutlierSign::Symmetric,
            }
        })
        .collect();
    SceneSpec {
        objects,
        rng_seed: seed,
        ..SceneSpec::default()
    }
}

/// On-disk scene description (TOML, schema v1). Angles are in degrees.
///
/// ```toml
/// version = 1
/// rng_seed = 7
/// frames = 2
/// n_noise_points = 10
/// field_of_view_deg = [-60.0, 60.0]
///
/// [[object]]
/// center = [20.0, -3.0]
/// extent = [4.5, 1.8]
/// velocity = [8.0, 1.0]
/// n_points = 80
/// outlier_fraction = 0.3
/// doppler_noise_sigma = 0.05
/// outlier_offset_range = [2.0, 5.0]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub version: u32,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "one")]
    pub frames: u64,
    #[serde(default)]
    pub n_noise_points: usize,
    #[serde(default = "default_fov_deg")]
    pub field_of_view_deg: [f64; 2],
    #[serde(default = "default_noise_range")]
    pub noise_range: [f64; 2],
    #[serde(default = "default_noise_doppler")]
    pub noise_doppler: [f64; 2],
    #[serde(default)]
    pub min_gap: f64,
    #[serde(default, rename = "object")]
    pub objects: Vec<ObjectSpec>,
}

fn one() -> u64 {
    1
}

fn default_fov_deg() -> [f64; 2] {
    [-60.0, 60.0]
}

fn default_noise_range() -> [f64; 2] {
    SceneSpec::default().noise_range
}

fn default_noise_doppler() -> [f64; 2] {
    SceneSpec::default().noise_doppler
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let file: SceneFile = toml::from_str(text)?;
        if file.version != SCENE_SCHEMA_VERSION {
            return Err(SpecError::Version(file.version));
        }
        file.spec().validate()?;
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpecError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn spec(&self) -> SceneSpec {
        SceneSpec {
            objects: self.objects.clone(),
            n_noise_points: self.n_noise_points,
            field_of_view: self.field_of_view_deg.map(f64::to_radians),
            noise_range: self.noise_range,
            noise_doppler: self.noise_doppler,
            min_gap: self.min_gap,
            rng_seed: self.rng_seed,
        }
    }

    /// Every frame of the scene with its ground truth.
    pub fn generate(&self) -> Result<Vec<(Frame, GroundTruth)>, SpecError> {
        let spec = self.spec();
        (0..self.frames).map(|id| generate_frame_with_id(&spec, id)).collect()
    }
}
