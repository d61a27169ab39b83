//! Trajectory text formats.
//!
//! TUM format: one pose per line, `timestamp tx ty tz qx qy qz qw`,
//! whitespace separated, `#` comments. Written floats use the shortest
//! representation that parses back to the identical f64, so write/read
//! round trips are exact.
//!
//! EuRoC ground-truth CSV: comma separated with a `#` header line,
//! `timestamp_ns, px, py, pz, qw, qx, qy, qz, ...` (note the leading
//! scalar in the quaternion); extra state columns are ignored.
//! Nanosecond timestamps are converted to seconds at parse time.

use std::path::Path;

use nalgebra::Vector3;

use super::{path_str, IoError};
use crate::geometry::{PoseSE3, Trajectory};

fn bad_line(origin: &str, line: usize, message: impl Into<String>) -> IoError {
    IoError::MalformedLine {
        path: origin.to_string(),
        line,
        message: message.into(),
    }
}

fn build_trajectory(
    stamped: Vec<(usize, PoseSE3)>,
    origin: &str,
) -> Result<Trajectory, IoError> {
    let mut trajectory = Trajectory::empty();
    for (lineno, pose) in stamped {
        trajectory
            .push(pose)
            .map_err(|_| bad_line(origin, lineno, "timestamps must be strictly increasing"))?;
    }
    Ok(trajectory)
}

fn parse_pose_fields(
    origin: &str,
    lineno: usize,
    fields: &[&str],
    quaternion_scalar_first: bool,
) -> Result<PoseSE3, IoError> {
    let mut values = [0.0f64; 8];
    for (v, field) in values.iter_mut().zip(fields.iter()) {
        *v = field
            .parse()
            .map_err(|e| bad_line(origin, lineno, format!("bad number {field:?}: {e}")))?;
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad_line(origin, lineno, "non-finite value"));
    }
    let (t, px, py, pz) = (values[0], values[1], values[2], values[3]);
    let (qw, qx, qy, qz) = if quaternion_scalar_first {
        (values[4], values[5], values[6], values[7])
    } else {
        (values[7], values[4], values[5], values[6])
    };
    // All fields were already checked finite, so a plain compare is safe.
    let norm = (qw * qw + qx * qx + qy * qy + qz * qz).sqrt();
    if norm <= 1e-6 {
        return Err(bad_line(origin, lineno, "quaternion norm too small"));
    }
    Ok(PoseSE3::from_parts(t, qw, qx, qy, qz, Vector3::new(px, py, pz)))
}

/// Parse TUM-format text.
pub fn parse_trajectory_tum(text: &str, origin: &str) -> Result<Trajectory, IoError> {
    let mut stamped = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(bad_line(
                origin,
                i + 1,
                format!("expected 8 fields `timestamp tx ty tz qx qy qz qw`, got {}", fields.len()),
            ));
        }
        stamped.push((i + 1, parse_pose_fields(origin, i + 1, &fields, false)?));
    }
    build_trajectory(stamped, origin)
}

/// Parse EuRoC ground-truth CSV text.
pub fn parse_trajectory_euroc_csv(text: &str, origin: &str) -> Result<Trajectory, IoError> {
    let mut stamped = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 8 {
            return Err(bad_line(
                origin,
                i + 1,
                format!("expected at least 8 comma-separated fields, got {}", fields.len()),
            ));
        }
        let ns: u64 = fields[0]
            .parse()
            .map_err(|e| bad_line(origin, i + 1, format!("bad nanosecond timestamp: {e}")))?;
        let seconds = ns as f64 / 1e9;
        // Reuse the field parser with the timestamp already converted.
        let sec_string = format!("{seconds}");
        let reordered = [
            sec_string.as_str(),
            fields[1],
            fields[2],
            fields[3],
            fields[4],
            fields[5],
            fields[6],
            fields[7],
        ];
        stamped.push((i + 1, parse_pose_fields(origin, i + 1, &reordered, true)?));
    }
    build_trajectory(stamped, origin)
}

pub fn read_trajectory_tum(path: &Path) -> Result<Trajectory, IoError> {
    let text = std::fs::read_to_string(path)?;
    parse_trajectory_tum(&text, &path_str(path))
}

pub fn read_trajectory_euroc_csv(path: &Path) -> Result<Trajectory, IoError> {
    let text = std::fs::read_to_string(path)?;
    parse_trajectory_euroc_csv(&text, &path_str(path))
}

/// Read either format, deciding by content: the first data line with
/// commas is EuRoC CSV, otherwise TUM.
pub fn read_trajectory_auto(path: &Path) -> Result<Trajectory, IoError> {
    let text = std::fs::read_to_string(path)?;
    let origin = path_str(path);
    let is_csv = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.contains(','));
    if is_csv {
        parse_trajectory_euroc_csv(&text, &origin)
    } else {
        parse_trajectory_tum(&text, &origin)
    }
}

pub fn write_trajectory_tum(path: &Path, trajectory: &Trajectory) -> Result<(), IoError> {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for p in trajectory.iter() {
        let q = p.rotation;
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            p.timestamp, p.translation.x, p.translation.y, p.translation.z, q.i, q.j, q.k, q.w
        ));
    }
    Ok(std::fs::write(path, out)?)
}
