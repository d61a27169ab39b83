//! Per-frame feature container (`.svft`):
//!
//! ```text
//! magic "SVFT" | version u32 = 1 | timestamp f64 (s) | dim u32 = 256 |
//! count u64 | count x { u f32, v f32, score f32, descriptor 256 x f32 }
//! ```
//!
//! A sequence of frames is a directory of `<timestamp-ns>.svft` files
//! plus an `index.csv` of `timestamp_ns,path` lines.

use std::path::Path;

use super::{path_str, ByteReader, IoError};
use crate::geometry::Point2;
use crate::matching::{Descriptor, Feature, FeatureSet, DESCRIPTOR_DIM};

pub const FEATURE_MAGIC: &[u8; 4] = b"SVFT";
const FEATURE_VERSION: u32 = 1;
const RECORD_BYTES: usize = 4 + 4 + 4 + 4 * DESCRIPTOR_DIM;

/// Serialize a feature set to the `SVFT` byte layout.
pub fn encode_features(set: &FeatureSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 + 8 + 4 + 8 + set.len() * RECORD_BYTES);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&set.timestamp.to_le_bytes());
    out.extend_from_slice(&(DESCRIPTOR_DIM as u32).to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for f in &set.features {
        out.extend_from_slice(&(f.location.u as f32).to_le_bytes());
        out.extend_from_slice(&(f.location.v as f32).to_le_bytes());
        out.extend_from_slice(&(f.score as f32).to_le_bytes());
        for v in f.descriptor.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parse an `SVFT` payload. `origin` labels errors (usually the path).
pub fn decode_features(bytes: &[u8], origin: &str) -> Result<FeatureSet, IoError> {
    let mut r = ByteReader::new(bytes, origin);
    r.magic(FEATURE_MAGIC)?;
    let version = r.u32("version")?;
    if version != FEATURE_VERSION {
        return Err(IoError::UnsupportedVersion {
            path: origin.to_string(),
            found: version,
            supported: FEATURE_VERSION,
        });
    }
    let timestamp = r.f64("timestamp")?;
    if !timestamp.is_finite() {
        return Err(r.error(8, "timestamp is not finite"));
    }
    let dim = r.u32("descriptor dimension")?;
    if dim as usize != DESCRIPTOR_DIM {
        return Err(r.error(16, format!("descriptor dimension {dim}, expected {DESCRIPTOR_DIM}")));
    }
    let count = r.u64("feature count")?;
    let count = r.check_count(count, RECORD_BYTES, "feature")?;

    let mut features = Vec::with_capacity(count);
    for i in 0..count {
        let record_offset = r.position();
        let u = r.f32("u")? as f64;
        let v = r.f32("v")? as f64;
        let score = r.f32("score")? as f64;
        let descriptor = r.f32_slice(DESCRIPTOR_DIM, "descriptor")?;
        if !u.is_finite() || !v.is_finite() {
            return Err(r.error(record_offset, format!("feature {i}: non-finite location")));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(r.error(record_offset, format!("feature {i}: score {score} outside [0, 1]")));
        }
        let descriptor = Descriptor::from_slice(&descriptor)
            .map_err(|e| r.error(record_offset, format!("feature {i}: {e}")))?;
        features.push(Feature::new(Point2::pixel(u, v), score, descriptor));
    }
    r.expect_end()?;
    Ok(FeatureSet::new(0, timestamp, features))
}

pub fn write_features(path: &Path, set: &FeatureSet) -> Result<(), IoError> {
    Ok(std::fs::write(path, encode_features(set))?)
}

pub fn read_features(path: &Path) -> Result<FeatureSet, IoError> {
    let bytes = std::fs::read(path)?;
    decode_features(&bytes, &path_str(path))
}

fn timestamp_to_ns(seconds: f64) -> u64 {
    (seconds * 1e9).round().max(0.0) as u64
}

/// Write one `.svft` per frame named by its nanosecond timestamp, plus an
/// `index.csv`. Frames must already be in timestamp order.
pub fn save_feature_dir(dir: &Path, sets: &[FeatureSet]) -> Result<(), IoError> {
    std::fs::create_dir_all(dir)?;
    let mut index = String::from("timestamp_ns,path\n");
    for set in sets {
        let ns = timestamp_to_ns(set.timestamp);
        let name = format!("{ns}.svft");
        write_features(&dir.join(&name), set)?;
        index.push_str(&format!("{ns},{name}\n"));
    }
    std::fs::write(dir.join("index.csv"), index)?;
    Ok(())
}

/// Load a frame sequence from a directory: via `index.csv` when present,
/// otherwise every `*.svft` file named `<timestamp-ns>.svft`, sorted by
/// timestamp. Frame ids are assigned by sequence position.
pub fn load_feature_dir(dir: &Path) -> Result<Vec<FeatureSet>, IoError> {
    let index_path = dir.join("index.csv");
    let mut entries: Vec<(u64, std::path::PathBuf)> = Vec::new();
    if index_path.is_file() {
        let text = std::fs::read_to_string(&index_path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("timestamp_ns") {
                continue;
            }
            let (ns, rel) = line.split_once(',').ok_or_else(|| IoError::MalformedLine {
                path: path_str(&index_path),
                line: lineno + 1,
                message: "expected `timestamp_ns,path`".into(),
            })?;
            let ns: u64 = ns.trim().parse().map_err(|e| IoError::MalformedLine {
                path: path_str(&index_path),
                line: lineno + 1,
                message: format!("bad timestamp: {e}"),
            })?;
            entries.push((ns, dir.join(rel.trim())));
        }
    } else {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("svft") {
                continue;
            }
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default();
            let ns: u64 = stem.parse().map_err(|_| IoError::MalformedLine {
                path: path_str(&path),
                line: 0,
                message: "feature file name must be `<timestamp-ns>.svft`".into(),
            })?;
            entries.push((ns, path));
        }
    }
    entries.sort();
    let mut sets = Vec::with_capacity(entries.len());
    for (i, (_, path)) in entries.iter().enumerate() {
        let mut set = read_features(path)?;
        set.frame_id = i as u64;
        sets.push(set);
    }
    Ok(sets)
}
