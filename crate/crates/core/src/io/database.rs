//! Full dump/reload of a keyframe database (`.svdb`):
//!
//! ```text
//! magic "SVDB" | version u32 = 1 | record count u64 | count x {
//!   id u64 | timestamp f64 | pose tx ty tz qx qy qz qw (7 x f64) |
//!   bow entry count u64 | entries x { word u32, weight f64 } |
//!   feature block length u64 | embedded SVFT payload }
//! ```
//!
//! The inverted index is rebuilt on load rather than serialized.

use std::path::Path;

use nalgebra::Vector3;

use super::features::{decode_features, encode_features};
use super::{path_str, ByteReader, IoError};
use crate::geometry::PoseSE3;
use crate::placedb::{Keyframe, KeyframeDatabase};
use crate::vocab::BowVector;

const DB_MAGIC: &[u8; 4] = b"SVDB";
const DB_VERSION: u32 = 1;

pub fn save_database(path: &Path, db: &KeyframeDatabase) -> Result<(), IoError> {
    let mut out = Vec::new();
    out.extend_from_slice(DB_MAGIC);
    out.extend_from_slice(&DB_VERSION.to_le_bytes());
    out.extend_from_slice(&(db.len() as u64).to_le_bytes());
    for r in db.records() {
        out.extend_from_slice(&r.id.to_le_bytes());
        out.extend_from_slice(&r.timestamp.to_le_bytes());
        for v in [
            r.pose.translation.x,
            r.pose.translation.y,
            r.pose.translation.z,
            r.pose.rotation.i,
            r.pose.rotation.j,
            r.pose.rotation.k,
            r.pose.rotation.w,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(r.bow.entries().len() as u64).to_le_bytes());
        for &(word, weight) in r.bow.entries() {
            out.extend_from_slice(&word.to_le_bytes());
            out.extend_from_slice(&weight.to_le_bytes());
        }
        let block = encode_features(&r.features);
        out.extend_from_slice(&(block.len() as u64).to_le_bytes());
        out.extend_from_slice(&block);
    }
    Ok(std::fs::write(path, out)?)
}

pub fn load_database(path: &Path) -> Result<KeyframeDatabase, IoError> {
    let bytes = std::fs::read(path)?;
    let origin = path_str(path);
    let mut r = ByteReader::new(&bytes, &origin);
    r.magic(DB_MAGIC)?;
    let version = r.u32("version")?;
    if version != DB_VERSION {
        return Err(IoError::UnsupportedVersion {
            path: origin.clone(),
            found: version,
            supported: DB_VERSION,
        });
    }
    let count = r.u64("record count")?;
    let count = r.check_count(count, 8 + 8 + 56 + 8 + 8, "record")?;

    let mut db = KeyframeDatabase::new();
    for i in 0..count {
        let record_offset = r.position();
        let id = r.u64("record id")?;
        if id != i as u64 {
            return Err(r.error(record_offset, format!("record {i} carries id {id}; ids must be dense")));
        }
        let timestamp = r.f64("timestamp")?;
        let mut pose = [0.0f64; 7];
        for (v, what) in pose.iter_mut().zip(["tx", "ty", "tz", "qx", "qy", "qz", "qw"]) {
            *v = r.f64(what)?;
        }
        if pose.iter().any(|v| !v.is_finite()) || !timestamp.is_finite() {
            return Err(r.error(record_offset, format!("record {i}: non-finite pose")));
        }
        let qnorm = (pose[3] * pose[3] + pose[4] * pose[4] + pose[5] * pose[5] + pose[6] * pose[6]).sqrt();
        if qnorm <= 1e-6 {
            return Err(r.error(record_offset, format!("record {i}: quaternion norm too small")));
        }
        let bow_len = r.u64("bow entry count")?;
        let bow_len = r.check_count(bow_len, 12, "bow entry")?;
        let mut raw = Vec::with_capacity(bow_len);
        for _ in 0..bow_len {
            let word = r.u32("word id")?;
            let weight = r.f64("word weight")?;
            raw.push((word, weight));
        }
        let bow = BowVector::from_normalized_entries(raw)
            .map_err(|e| r.error(record_offset, format!("record {i}: {e}")))?;
        let block_len = r.u64("feature block length")?;
        let block_len = r.check_count(block_len, 1, "feature block byte")?;
        let block = r.subslice(block_len, "feature block")?;
        let features = decode_features(block, &format!("{origin}#record{i}"))?;

        db.add_keyframe(Keyframe {
            timestamp,
            bow,
            features,
            pose: PoseSE3::from_parts(
                timestamp,
                pose[6],
                pose[3],
                pose[4],
                pose[5],
                Vector3::new(pose[0], pose[1], pose[2]),
            ),
        });
    }
    r.expect_end()?;
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_feature_set;
    use crate::vocab::train_vocabulary;

    #[test]
    fn database_round_trip_preserves_queries() {
        let sets: Vec<_> = (0..20)
            .map(|i| gen_feature_set(i, i as f64 * 0.5, 25, 752.0, 480.0, 0.0, 300 + i))
            .collect();
        let tree = train_vocabulary(&sets, 3, 2, 8).unwrap();
        let mut db = KeyframeDatabase::new();
        for s in &sets {
            db.add_keyframe(Keyframe {
                timestamp: s.timestamp,
                bow: tree.transform(s),
                features: s.clone(),
                pose: PoseSE3::identity(s.timestamp),
            });
        }
        let path = std::env::temp_dir().join(format!("db_{}.svdb", std::process::id()));
        save_database(&path, &db).unwrap();
        let back = load_database(&path).unwrap();
        assert_eq!(back.len(), db.len());
        for (a, b) in db.records().iter().zip(back.records()) {
            assert_eq!(a.bow, b.bow);
            assert_eq!(encode_features(&a.features), encode_features(&b.features));
            assert_eq!(a.timestamp, b.timestamp);
        }
        // Queries identical after reload.
        let params = crate::placedb::QueryParams {
            top_n: 5,
            min_gap_keyframes: 3,
            min_score_ratio: None,
        };
        for s in &sets {
            let bow = tree.transform(s);
            assert_eq!(db.query(&bow, &params), back.query(&bow, &params));
        }
        std::fs::remove_file(&path).unwrap();
    }
}
