//! Instantaneous vector velocity and heading of radar point-cloud clusters.
//!
//! The pipeline for one frame:
//!
//! 1. [`clustering`] groups detections into objects with DBSCAN.
//! 2. [`ransac`] runs `max_trials` line hypotheses per cluster in the
//!    normalised (azimuth, Doppler) plane, all clusters at once, and keeps the
//!    best inlier mask of each cluster.
//! 3. [`solver`] fits `(v_x, v_y)` to the inliers of every cluster by least
//!    squares and derives the heading.
//!
//! [`baseline`] holds single-threaded versions of steps 2 and 3 that produce
//! identical results, [`synth`] generates scenes with known ground truth and
//! [`bench`] times the two paths against each other.
//!
//! ```
//! use rvk::pipeline::{estimate_frame, PipelineConfig};
//! use rvk::synth::{generate_frame, ObjectSpec, OutlierSign, SceneSpec};
//!
//! let car = ObjectSpec {
//!     center: [18.0, -2.0],
//!     extent: [4.0, 2.0],
//!     velocity: [7.5, 1.0],
//!     n_points: 60,
//!     outlier_fraction: 0.25,
//!     doppler_noise_sigma: 0.0,
//!     outlier_offset_range: [2.0, 5.0],
//!     outlier_sign: OutlierSign::Symmetric,
//! };
//! let spec = SceneSpec { objects: vec![car], rng_seed: 1, ..Default::default() };
//! let (frame, _truth) = generate_frame(&spec).unwrap();
//!
//! let out = estimate_frame(&frame, &PipelineConfig::default()).unwrap();
//! let est = &out.estimates[0];
//! assert!((est.v_x - 7.5).abs() < 1e-6);
//! assert!((est.v_y - 1.0).abs() < 1e-6);
//! ```

pub mod baseline;
pub mod bench;
pub mod clustering;
pub mod frame_io;
pub mod parallel;
pub mod pipeline;
pub mod ransac;
pub mod solver;
pub mod synth;
pub mod types;

pub use types::{
    radial_projection, Cluster, EstimateIssue, Frame, InlierMask, Label, RadarPoint, VelocityEstimate,
    MIN_CLUSTER_SIZE,
};

// The guide under `book/` is compiled as doctests so its snippets stay in
// sync with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/radial-model.md")]
    mod radial_model {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/ransac.md")]
    mod ransac {}
    #[doc = include_str!("../../../book/src/least-squares.md")]
    mod least_squares {}
    #[doc = include_str!("../../../book/src/determinism.md")]
    mod determinism {}
    #[doc = include_str!("../../../book/src/synthetic-scenes.md")]
    mod synthetic_scenes {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
