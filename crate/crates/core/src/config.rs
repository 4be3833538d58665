//! `key = value` settings files.
//!
//! One setting per line; blank lines and lines starting with `#` are
//! ignored. Keys may not repeat.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    /// 1-based line number.
    pub line: usize,
}

pub fn parse_kv(text: &str) -> Result<Vec<Setting>> {
    let mut out: Vec<Setting> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::format_at(i + 1, format!("expected `key = value`, got {line:?}")));
        };
        let (key, value) = (k.trim(), v.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::format_at(i + 1, format!("bad key {key:?}")));
        }
        if out.iter().any(|s| s.key == key) {
            return Err(Error::format_at(i + 1, format!("duplicate key {key:?}")));
        }
        out.push(Setting {
            key: key.to_string(),
            value: value.to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

pub fn load_kv(path: impl AsRef<Path>) -> Result<Vec<Setting>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kv(&text).map_err(|e| e.with_path(path))
}

impl Setting {
    /// Parse the value, reporting the key and line on failure.
    pub fn parse<T: std::str::FromStr>(&self) -> Result<T> {
        self.value
            .parse()
            .map_err(|_| Error::format_at(self.line, format!("bad value {:?} for {}", self.value, self.key)))
    }
}
