//! CSV persistence for frames, estimates and synthetic ground truth.
//!
//! Frame format v1 is plain UTF-8 with `\n` line endings, `.` as the decimal
//! separator and no quoting:
//!
//! ```text
//! frame_id,x,y,z,doppler,azimuth
//! 0,12.5,-1.25,0.0,-3.2,-0.0996
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::synth::{GroundTruth, ObjectTruth};
use crate::types::{Frame, RadarPoint, VelocityEstimate};

pub const FRAME_FORMAT_VERSION: u32 = 1;
pub const FRAME_HEADER: &str = "frame_id,x,y,z,doppler,azimuth";
pub const ESTIMATE_HEADER: &str = "frame_id,cluster_id,v_x,v_y,heading_deg,inlier_count";
pub const TRUTH_HEADER: &str =
    "frame_id,object_id,v_x,v_y,heading_deg,first_point,n_points,outlier_indices";

#[derive(Debug, Error)]
pub enum FrameIoError {
    #[error("file is empty")]
    EmptyFile,
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    MalformedHeader { expected: &'static str, found: String },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn row_err(line: usize, reason: impl Into<String>) -> FrameIoError {
    FrameIoError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

/// Splits `text` into data lines after checking the header. Yields
/// `(1-based line number, line)`.
fn data_lines<'a>(
    text: &'a str,
    header: &'static str,
) -> Result<impl Iterator<Item = (usize, &'a str)>, FrameIoError> {
    if text.is_empty() {
        return Err(FrameIoError::EmptyFile);
    }
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(FrameIoError::EmptyFile)?;
    if first != header {
        return Err(FrameIoError::MalformedHeader {
            expected: header,
            found: first.to_string(),
        });
    }
    Ok(lines.map(|(i, l)| (i + 1, l)))
}

fn parse_f64(field: &str, name: &str, line: usize) -> Result<f64, FrameIoError> {
    let v: f64 = field
        .parse()
        .map_err(|_| row_err(line, format!("{name}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(row_err(line, format!("{name}: `{field}` is not finite")));
    }
    Ok(v)
}

fn parse_int<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T, FrameIoError> {
    field
        .parse()
        .map_err(|_| row_err(line, format!("{name}: `{field}` is not a non-negative integer")))
}

/// Parses frame CSV text. Frames are returned in ascending `frame_id`, points
/// in file order within each frame.
pub fn parse_frames(text: &str) -> Result<Vec<Frame>, FrameIoError> {
    let mut frames: BTreeMap<u64, Vec<RadarPoint>> = BTreeMap::new();
    for (line, row) in data_lines(text, FRAME_HEADER)? {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 6 {
            return Err(row_err(line, format!("expected 6 fields, found {}", fields.len())));
        }
        let frame_id: u64 = parse_int(fields[0], "frame_id", line)?;
        let x = parse_f64(fields[1], "x", line)?;
        let y = parse_f64(fields[2], "y", line)?;
        let z = parse_f64(fields[3], "z", line)?;
        let doppler = parse_f64(fields[4], "doppler", line)?;
        let azimuth = parse_f64(fields[5], "azimuth", line)?;
        let p = RadarPoint::new(x, y, z, doppler, azimuth).map_err(|e| row_err(line, e.to_string()))?;
        frames.entry(frame_id).or_default().push(p);
    }
    Ok(frames
        .into_iter()
        .map(|(id, points)| Frame::new(id, points))
        .collect())
}

pub fn read_frames(path: impl AsRef<Path>) -> Result<Vec<Frame>, FrameIoError> {
    parse_frames(&fs::read_to_string(path)?)
}

pub fn format_frames(frames: &[Frame]) -> String {
    let mut out = String::with_capacity(64 * (1 + frames.iter().map(Frame::len).sum::<usize>()));
    out.push_str(FRAME_HEADER);
    out.push('\n');
    for f in frames {
        for p in &f.points {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?}",
                f.frame_id, p.x, p.y, p.z, p.doppler, p.azimuth
            );
        }
    }
    out
}

pub fn write_frames(frames: &[Frame], path: impl AsRef<Path>) -> Result<(), FrameIoError> {
    fs::write(path, format_frames(frames))?;
    Ok(())
}

pub fn format_estimates(estimates: &[VelocityEstimate]) -> String {
    let mut out = String::new();
    out.push_str(ESTIMATE_HEADER);
    out.push('\n');
    for e in estimates {
        let heading = e
            .heading
            .map(|h| format!("{:?}", h.to_degrees()))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{:?},{:?},{},{}",
            e.frame_id, e.cluster_id, e.v_x, e.v_y, heading, e.inlier_count
        );
    }
    out
}

pub fn write_estimates(estimates: &[VelocityEstimate], path: impl AsRef<Path>) -> Result<(), FrameIoError> {
    fs::write(path, format_estimates(estimates))?;
    Ok(())
}

/// One row of an estimates file.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub frame_id: u64,
    pub cluster_id: usize,
    pub v_x: f64,
    pub v_y: f64,
    pub heading_deg: Option<f64>,
    pub inlier_count: usize,
}

impl From<&VelocityEstimate> for EstimateRecord {
    fn from(e: &VelocityEstimate) -> Self {
        Self {
            frame_id: e.frame_id,
            cluster_id: e.cluster_id,
            v_x: e.v_x,
            v_y: e.v_y,
            heading_deg: e.heading.map(f64::to_degrees),
            inlier_count: e.inlier_count,
        }
    }
}

pub fn parse_estimates(text: &str) -> Result<Vec<EstimateRecord>, FrameIoError> {
    let mut out = Vec::new();
    for (line, row) in data_lines(text, ESTIMATE_HEADER)? {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 6 {
            return Err(row_err(line, format!("expected 6 fields, found {}", f.len())));
        }
        out.push(EstimateRecord {
            frame_id: parse_int(f[0], "frame_id", line)?,
            cluster_id: parse_int(f[1], "cluster_id", line)?,
            v_x: parse_f64(f[2], "v_x", line)?,
            v_y: parse_f64(f[3], "v_y", line)?,
            heading_deg: if f[4].is_empty() {
                None
            } else {
                Some(parse_f64(f[4], "heading_deg", line)?)
            },
            inlier_count: parse_int(f[5], "inlier_count", line)?,
        });
    }
    Ok(out)
}

pub fn read_estimates(path: impl AsRef<Path>) -> Result<Vec<EstimateRecord>, FrameIoError> {
    parse_estimates(&fs::read_to_string(path)?)
}

/// Ground truth CSV. Outlier indices are frame point indices separated by
/// spaces (empty when the object has none).
pub fn format_truth(truths: &[GroundTruth]) -> String {
    let mut out = String::new();
    out.push_str(TRUTH_HEADER);
    out.push('\n');
    for t in truths {
        for o in &t.objects {
            let outliers: Vec<String> = o.outlier_indices.iter().map(usize::to_string).collect();
            let _ = writeln!(
                out,
                "{},{},{:?},{:?},{:?},{},{},{}",
                t.frame_id,
                o.object_id,
                o.v_x,
                o.v_y,
                o.heading.to_degrees(),
                o.first_point,
                o.n_points,
                outliers.join(" ")
            );
        }
    }
    out
}

pub fn write_truth(truths: &[GroundTruth], path: impl AsRef<Path>) -> Result<(), FrameIoError> {
    fs::write(path, format_truth(truths))?;
    Ok(())
}

pub fn parse_truth(text: &str) -> Result<Vec<GroundTruth>, FrameIoError> {
    let mut frames: BTreeMap<u64, Vec<ObjectTruth>> = BTreeMap::new();
    for (line, row) in data_lines(text, TRUTH_HEADER)? {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 8 {
            return Err(row_err(line, format!("expected 8 fields, found {}", f.len())));
        }
        let outlier_indices = f[7]
            .split_whitespace()
            .map(|s| parse_int(s, "outlier_indices", line))
            .collect::<Result<Vec<usize>, _>>()?;
        let frame_id: u64 = parse_int(f[0], "frame_id", line)?;
        frames.entry(frame_id).or_default().push(ObjectTruth {
            object_id: parse_int(f[1], "object_id", line)?,
            v_x: parse_f64(f[2], "v_x", line)?,
            v_y: parse_f64(f[3], "v_y", line)?,
            heading: parse_f64(f[4], "heading_deg", line)?.to_radians(),
            first_point: parse_int(f[5], "first_point", line)?,
            n_points: parse_int(f[6], "n_points", line)?,
            outlier_indices,
        });
    }
    Ok(frames
        .into_iter()
        .map(|(frame_id, objects)| GroundTruth { frame_id, objects })
        .collect())
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruth>, FrameIoError> {
    parse_truth(&fs::read_to_string(path)?)
}
