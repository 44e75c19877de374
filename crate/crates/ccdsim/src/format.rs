//! Shared text formatting for every file the tool writes.
//!
//! Floats are written with 17 significant digits so that parsing them back
//! yields the same `f64`. Lines end in `\n`. Each file starts with
//! `# schema_version` and `# config` comment lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

/// Version of every output format written by this tool.
pub const SCHEMA_VERSION: u32 = 1;

/// `x` with 17 significant digits; `inf`, `-inf` and `NaN` for the rest.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Builds a CSV document in memory.
#[derive(Debug)]
pub struct CsvDoc {
    text: String,
}

impl CsvDoc {
    /// Starts a document with the schema-version and config comment lines.
    pub fn new<C: Serialize>(config: &C, header: &[&str]) -> Self {
        let mut text = String::new();
        writeln!(text, "# schema_version: {SCHEMA_VERSION}").unwrap();
        writeln!(text, "# config: {}", config_json(config)).unwrap();
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(f.as_ref());
            first = false;
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.text.as_bytes())
    }
}

/// Compact single-line JSON of a configuration.
pub fn config_json<C: Serialize>(config: &C) -> String {
    serde_json::to_string(config).expect("configs serialize")
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    write_file(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.2585e-6, -2.5e300, 5e-324, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn doc_layout() {
        let mut d = CsvDoc::new(&serde_json::json!({"a": 1}), &["x", "y"]);
        d.row(["1", "2"]);
        assert_eq!(d.as_str(), "# schema_version: 1\n# config: {\"a\":1}\nx,y\n1,2\n");
    }
}
