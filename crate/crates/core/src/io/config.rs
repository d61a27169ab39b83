//! Plain-text `key=value` configuration files. Blank lines and `#`
//! comments are ignored; CLI flags override file values.

use std::collections::HashMap;
use std::path::Path;

use super::{path_str, IoError};

pub fn read_config(path: &Path) -> Result<HashMap<String, String>, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| IoError::MalformedLine {
            path: path_str(path),
            line: i + 1,
            message: "expected `key=value`".into(),
        })?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}
