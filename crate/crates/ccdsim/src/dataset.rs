//! Dataset CSV files and the categorical code table.
//!
//! A dataset file has a header of the schema's feature names followed by
//! `label`, then one row per sample. Lines starting with `#` are comments.
//! Labels are class names (case-insensitive). Categorical columns may hold
//! numbers, which are used as-is, or strings, which are replaced by integer
//! codes; the mapping is kept in a [`CodeTable`] and written next to the data
//! as `column,raw_value,code` triples.

use std::collections::HashMap;

use ccdsim_core::data::{Dataset, FeatureSchema, Sample, Split, CATEGORICAL_FEATURES};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::format::{fmt_f64, CsvDoc};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeEntry {
    pub column: String,
    pub raw_value: String,
    pub code: u64,
}

/// Ordinal codes for categorical values, assigned per column in order of
/// first appearance starting at 0.
#[derive(Debug, Clone, Default)]
pub struct CodeTable {
    entries: Vec<CodeEntry>,
    lookup: HashMap<(String, String), u64>,
    next: HashMap<String, u64>,
}

impl CodeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[CodeEntry] {
        &self.entries
    }

    pub fn code(&mut self, column: &str, raw: &str) -> u64 {
        let key = (column.to_string(), raw.to_string());
        if let Some(&c) = self.lookup.get(&key) {
            return c;
        }
        let next = self.next.entry(column.to_string()).or_insert(0);
        let code = *next;
        *next += 1;
        self.lookup.insert(key, code);
        self.entries.push(CodeEntry {
            column: column.to_string(),
            raw_value: raw.to_string(),
            code,
        });
        code
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["column", "raw_value", "code"]).unwrap();
        for e in &self.entries {
            w.write_record([e.column.as_str(), e.raw_value.as_str(), &e.code.to_string()])
                .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn from_csv(text: &str, source_name: &str) -> Result<Self> {
        let mut table = Self::new();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(source_name, e))?;
            let line = line_of(&rec);
            let bad = |m: &str| CliError::Parse {
                source_name: source_name.to_string(),
                line,
                message: m.to_string(),
            };
            if rec.len() != 3 {
                return Err(bad("expected column,raw_value,code"));
            }
            let code: u64 = rec[2].parse().map_err(|_| bad("code is not an integer"))?;
            let (column, raw) = (rec[0].to_string(), rec[1].to_string());
            if table.lookup.contains_key(&(column.clone(), raw.clone())) {
                return Err(bad("duplicate entry"));
            }
            let next = table.next.entry(column.clone()).or_insert(0);
            *next = (*next).max(code + 1);
            table.lookup.insert((column.clone(), raw.clone()), code);
            table.entries.push(CodeEntry {
                column,
                raw_value: raw,
                code,
            });
        }
        Ok(table)
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn csv_error(source_name: &str, e: csv::Error) -> CliError {
    CliError::Parse {
        source_name: source_name.to_string(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Parses a dataset file. Categorical values are coded through `codes`, so a
/// test file parsed after its training file reuses the training codes.
pub fn parse_dataset(
    text: &str,
    schema: &FeatureSchema,
    codes: &mut CodeTable,
    split: Split,
    source_name: &str,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let width = schema.feature_count();
    let categorical: Vec<bool> = schema
        .feature_names()
        .iter()
        .map(|n| CATEGORICAL_FEATURES.contains(&n.as_str()))
        .collect();

    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(source_name, e))?,
        None => {
            return Err(CliError::Parse {
                source_name: source_name.to_string(),
                line: 1,
                message: "missing header row".into(),
            })
        }
    };
    let expected: Vec<&str> = schema
        .feature_names()
        .iter()
        .map(String::as_str)
        .chain(["label"])
        .collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::Parse {
            source_name: source_name.to_string(),
            line: line_of(&header),
            message: format!("header must be `{}`", expected.join(",")),
        });
    }

    let mut samples = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(source_name, e))?;
        let line = line_of(&rec);
        let bad = |message: String| CliError::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        if rec.len() != width + 1 {
            return Err(bad(format!("expected {} fields, found {}", width + 1, rec.len())));
        }
        let mut features = Vec::with_capacity(width);
        for (j, raw) in rec.iter().take(width).enumerate() {
            let name = &schema.feature_names()[j];
            let v = match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                Ok(_) => return Err(bad(format!("`{name}`: non-finite value"))),
                Err(_) if categorical[j] => codes.code(name, raw) as f64,
                Err(_) => return Err(bad(format!("`{name}`: `{raw}` is not a number"))),
            };
            features.push(v);
        }
        let label_raw = &rec[width];
        let label = schema
            .class_names()
            .iter()
            .position(|c| c.eq_ignore_ascii_case(label_raw))
            .ok_or_else(|| CliError::Label {
                source_name: source_name.to_string(),
                line,
                label: label_raw.to_string(),
            })?;
        samples.push(Sample { features, label });
    }
    if samples.is_empty() {
        return Err(CliError::Parse {
            source_name: source_name.to_string(),
            line: line_of(&header),
            message: "no data rows".into(),
        });
    }
    Ok(Dataset::new(schema.clone(), samples, split)?)
}

/// Renders a dataset with 17-digit floats and class-name labels.
pub fn dataset_csv<C: Serialize>(ds: &Dataset, config: &C) -> CsvDoc {
    let schema = ds.schema();
    let header: Vec<&str> = schema
        .feature_names()
        .iter()
        .map(String::as_str)
        .chain(["label"])
        .collect();
    let mut doc = CsvDoc::new(config, &header);
    for s in ds.samples() {
        doc.row(
            s.features
                .iter()
                .map(|&v| fmt_f64(v))
                .chain([schema.class_names()[s.label].clone()]),
        );
    }
    doc
}
