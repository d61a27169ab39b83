//! File formats and parsers.
//!
//! Owned binary formats (features `SVFT`, vocabularies `SVVB`, keyframe
//! databases `SVDB`) are little-endian throughout and round-trip
//! bit-exactly. Text formats cover TUM trajectories, EuRoC ground-truth
//! CSV, g2o-style pose-graph dumps, and `key=value` configuration files.
//! Every parser returns a structured error on malformed input; none
//! panic on arbitrary bytes.

mod config;
mod database;
mod features;
mod g2o;
mod trajectory;
mod vocab_file;

pub use config::read_config;
pub use database::{load_database, save_database};
pub use features::{
    decode_features, encode_features, load_feature_dir, read_features, save_feature_dir,
    write_features, FEATURE_MAGIC,
};
pub use g2o::{read_pose_graph_g2o, write_pose_graph_g2o};
pub use trajectory::{
    parse_trajectory_euroc_csv, parse_trajectory_tum, read_trajectory_auto,
    read_trajectory_euroc_csv, read_trajectory_tum, write_trajectory_tum,
};
pub use vocab_file::{decode_vocabulary, encode_vocabulary, read_vocabulary, write_vocabulary, VOCAB_MAGIC};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: malformed at byte {offset}: {message}")]
    MalformedFile {
        path: String,
        offset: u64,
        message: String,
    },
    #[error("{path}: malformed at line {line}: {message}")]
    MalformedLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: unsupported version {found} (this build reads version {supported})")]
    UnsupportedVersion {
        path: String,
        found: u32,
        supported: u32,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Little-endian cursor over an in-memory buffer that reports the byte
/// offset of whatever turned out to be malformed.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    origin: &'a str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8], origin: &'a str) -> Self {
        Self {
            buf,
            pos: 0,
            origin,
        }
    }

    pub(crate) fn error(&self, offset: usize, message: impl Into<String>) -> IoError {
        IoError::MalformedFile {
            path: self.origin.to_string(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IoError> {
        if self.buf.len() - self.pos < n {
            return Err(self.error(
                self.pos,
                format!(
                    "truncated: needed {n} bytes for {what}, {} left",
                    self.buf.len() - self.pos
                ),
            ));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<(), IoError> {
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(self.error(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8, IoError> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32, IoError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32_slice(&mut self, n: usize, what: &str) -> Result<Vec<f32>, IoError> {
        let bytes = self.take(4 * n, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn subslice(&mut self, n: usize, what: &str) -> Result<&'a [u8], IoError> {
        self.take(n, what)
    }

    pub(crate) fn expect_end(&self) -> Result<(), IoError> {
        if self.pos != self.buf.len() {
            return Err(self.error(
                self.pos,
                format!("{} trailing bytes after the payload", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }

    /// Guard counts read from the wire against the bytes actually
    /// present, so a hostile header cannot trigger huge allocations.
    pub(crate) fn check_count(&self, count: u64, min_record_size: usize, what: &str) -> Result<usize, IoError> {
        let remaining = (self.buf.len() - self.pos) as u64;
        if count > remaining / min_record_size as u64 {
            return Err(self.error(
                self.pos,
                format!("{what} count {count} exceeds what the file can hold"),
            ));
        }
        Ok(count as usize)
    }
}

pub(crate) fn path_str(path: &std::path::Path) -> String {
    path.display().to_string()
}
