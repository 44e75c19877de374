//! Grid sweeps and their aggregation.
//!
//! `sweep.csv` has one row per cell and seed, sorted by (mechanism, epsilon,
//! clusters, seed), and depends only on the sweep file and seeds.
//! Wall-clock times go to `sweep_timing.csv`. Every cell also gets its own
//! run directory under `cells/`.

use std::collections::BTreeMap;
use std::path::Path;

use ccdsim_core::dp::Mechanism;
use serde::Serialize;

use crate::config::{mechanism_rank, Cell, Epsilon, SweepConfig};
use crate::error::{CliError, Result};
use crate::exec::RayonExecutor;
use crate::format::{create_dir, fmt_f64, read_file, CsvDoc};
use crate::runner::{execute, load_data, write_outputs};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_TIMING_FILE: &str = "sweep_timing.csv";
pub const CELLS_DIR: &str = "cells";

pub const SWEEP_HEADER: [&str; 8] = [
    "mechanism",
    "epsilon",
    "clusters",
    "seed",
    "status",
    "tail_accuracy",
    "tail_precision",
    "tail_recall",
];

/// Outcome of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    /// `Ok((accuracy, precision, recall))` or the error message.
    pub outcome: std::result::Result<(f64, f64, f64), String>,
    pub wallclock_ms: f64,
}

pub fn cell_dir_name(cell: &Cell) -> String {
    format!("{}_eps{}_n{}_seed{}", cell.mechanism.name(), cell.epsilon, cell.clusters, cell.seed)
}

fn status_text(e: &CliError) -> String {
    format!("error: {e}").replace([',', '\n', '\r'], ";")
}

/// Runs every cell. A failing cell is recorded and the sweep continues.
pub fn sweep(cfg: &SweepConfig, out: &Path, threads: Option<usize>) -> Result<Vec<CellResult>> {
    let cells = cfg.cells()?;
    let base = cfg.base().resolved()?;
    let data = load_data(&base)?;
    let exec = RayonExecutor::new(threads)?;
    create_dir(&out.join(CELLS_DIR))?;

    let mut results = Vec::with_capacity(cells.len());
    for cell in cells {
        let run_cfg = cfg.cell_config(&cell).resolved()?;
        let outcome = execute(&run_cfg, &data, &exec).and_then(|r| {
            write_outputs(&out.join(CELLS_DIR).join(cell_dir_name(&cell)), &run_cfg, &data, &r)?;
            Ok(r)
        });
        results.push(match outcome {
            Ok(r) => CellResult {
                cell,
                outcome: Ok((r.tail.accuracy, r.tail.precision, r.tail.recall)),
                wallclock_ms: r.total_elapsed_ms,
            },
            Err(e @ CliError::Io { .. }) => return Err(e),
            Err(e) => CellResult {
                cell,
                outcome: Err(status_text(&e)),
                wallclock_ms: f64::NAN,
            },
        });
    }

    let cfg_json = SweepJson::from(cfg);
    let mut doc = CsvDoc::new(&cfg_json, &SWEEP_HEADER);
    let mut timing = CsvDoc::new(&cfg_json, &["mechanism", "epsilon", "clusters", "seed", "wallclock_ms"]);
    for r in &results {
        let key = [
            r.cell.mechanism.name().to_string(),
            r.cell.epsilon.to_string(),
            r.cell.clusters.to_string(),
            r.cell.seed.to_string(),
        ];
        let (status, metrics) = match &r.outcome {
            Ok((a, p, q)) => ("ok".to_string(), [fmt_f64(*a), fmt_f64(*p), fmt_f64(*q)]),
            Err(msg) => (msg.clone(), [fmt_f64(f64::NAN), fmt_f64(f64::NAN), fmt_f64(f64::NAN)]),
        };
        doc.row(key.iter().cloned().chain([status]).chain(metrics));
        timing.row(key.iter().cloned().chain([fmt_f64(r.wallclock_ms)]));
    }
    doc.write(&out.join(SWEEP_FILE))?;
    timing.write(&out.join(SWEEP_TIMING_FILE))?;
    Ok(results)
}

/// The resolved sweep file as embedded in sweep outputs.
#[derive(Debug, Serialize)]
struct SweepJson<'a> {
    model: &'a crate::config::ModelSection,
    dp: &'a crate::config::DpSection,
    federation: &'a crate::config::FederationSection,
    data: &'a crate::config::DataSection,
    sweep: &'a crate::config::SweepSection,
}

impl<'a> From<&'a SweepConfig> for SweepJson<'a> {
    fn from(c: &'a SweepConfig) -> Self {
        Self {
            model: &c.model,
            dp: &c.dp,
            federation: &c.federation,
            data: &c.data,
            sweep: &c.sweep,
        }
    }
}

/// One `sweep.csv` row as read back.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mechanism: Mechanism,
    pub epsilon: Epsilon,
    pub clusters: usize,
    pub seed: u64,
    pub ok: bool,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

pub fn parse_sweep(text: &str, source_name: &str) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| CliError::Parse {
        source_name: source_name.into(),
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != SWEEP_HEADER {
        return Err(CliError::Parse {
            source_name: source_name.into(),
            line: header.position().map_or(1, |p| p.line()),
            message: format!("header must be `{}`", SWEEP_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Parse {
            source_name: source_name.into(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |field: &str| CliError::Parse {
            source_name: source_name.into(),
            line,
            message: format!("bad `{field}` value"),
        };
        let num = |i: usize, name: &str| rec[i].parse::<f64>().map_err(|_| bad(name));
        rows.push(SweepRow {
            mechanism: Mechanism::from_name(&rec[0]).ok_or_else(|| bad("mechanism"))?,
            epsilon: Epsilon::parse(&rec[1]).ok_or_else(|| bad("epsilon"))?,
            clusters: rec[2].parse().map_err(|_| bad("clusters"))?,
            seed: rec[3].parse().map_err(|_| bad("seed"))?,
            ok: &rec[4] == "ok",
            accuracy: num(5, "tail_accuracy")?,
            precision: num(6, "tail_precision")?,
            recall: num(7, "tail_recall")?,
        });
    }
    Ok(rows)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `report`: mean and sample standard deviation over seeds of each
/// (mechanism, epsilon, clusters) cell, counting only successful runs.
pub fn report(input: &Path, out: &Path) -> Result<()> {
    let rows = parse_sweep(&read_file(input)?, &input.display().to_string())?;
    type Key = (usize, u64, usize);
    let mut groups: BTreeMap<Key, (Mechanism, Epsilon, Vec<&SweepRow>)> = BTreeMap::new();
    for r in &rows {
        // epsilon > 0, so its bit pattern orders like the value (inf last)
        let key = (mechanism_rank(r.mechanism), r.epsilon.0.to_bits(), r.clusters);
        groups.entry(key).or_insert((r.mechanism, r.epsilon, Vec::new())).2.push(r);
    }
    let header = [
        "mechanism",
        "epsilon",
        "clusters",
        "runs",
        "failed",
        "accuracy_mean",
        "accuracy_std",
        "precision_mean",
        "precision_std",
        "recall_mean",
        "recall_std",
    ];
    let mut doc = CsvDoc::new(&serde_json::json!({ "input": input.display().to_string() }), &header);
    for (_, (m, e, rs)) in groups {
        let ok: Vec<&&SweepRow> = rs.iter().filter(|r| r.ok).collect();
        let col = |f: fn(&SweepRow) -> f64| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        let (am, asd) = col(|r| r.accuracy);
        let (pm, psd) = col(|r| r.precision);
        let (rm, rsd) = col(|r| r.recall);
        let mut row = vec![
            m.name().to_string(),
            e.to_string(),
            rs[0].clusters.to_string(),
            ok.len().to_string(),
            (rs.len() - ok.len()).to_string(),
        ];
        row.extend([am, asd, pm, psd, rm, rsd].map(fmt_f64));
        doc.row(row);
    }
    doc.write(out)
}
