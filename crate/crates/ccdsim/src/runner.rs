//! Loading data for a run, running it, and writing its output files.

use std::path::Path;

use ccdsim_core::accountant::{BudgetReport, PrivacyBudget};
use ccdsim_core::data::{Dataset, FeatureSchema, Split, SyntheticConfig};
use ccdsim_core::federation::{run_experiment, ExperimentResult};
use serde::Serialize;

use crate::checkpoint;
use crate::config::{DataSource, RunConfig};
use crate::dataset::{parse_dataset, CodeTable};
use crate::error::Result;
use crate::exec::{RayonExecutor, WallClock};
use crate::format::{config_json, create_dir, fmt_f64, read_file, write_file, write_json, CsvDoc, SCHEMA_VERSION};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MODEL_FILE: &str = "model.ckpt";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const CODES_FILE: &str = "codes.csv";

/// Train and test splits plus the code table when read from CSV.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub train: Dataset,
    pub test: Dataset,
    pub codes: Option<CodeTable>,
}

pub fn load_data(cfg: &RunConfig) -> Result<LoadedData> {
    match cfg.data_source()? {
        DataSource::Synthetic {
            train_size,
            test_size,
            class_separation,
            seed,
        } => {
            let (train, test) = SyntheticConfig {
                n_train: train_size,
                n_test: test_size,
                class_separation,
                seed,
            }
            .generate()?;
            Ok(LoadedData { train, test, codes: None })
        }
        DataSource::Csv { train, test } => {
            let schema = FeatureSchema::bnat();
            let mut codes = CodeTable::new();
            let tr = parse_dataset(&read_file(&train)?, &schema, &mut codes, Split::Train, &train.display().to_string())?;
            let te = parse_dataset(&read_file(&test)?, &schema, &mut codes, Split::Test, &test.display().to_string())?;
            Ok(LoadedData {
                train: tr,
                test: te,
                codes: Some(codes),
            })
        }
    }
}

/// Validates `cfg` against the data and trains. Wall-clock time covers the
/// training loop only.
pub fn execute(cfg: &RunConfig, data: &LoadedData, exec: &RayonExecutor) -> Result<ExperimentResult> {
    let schema = data.train.schema();
    let exp = cfg.experiment(schema.feature_count(), schema.class_count())?;
    Ok(run_experiment(&exp, &data.train, &data.test, exec, &WallClock::new())?)
}

#[derive(Debug, Serialize)]
struct BudgetJson {
    epsilon_bar: f64,
    delta_bar: f64,
    delta_clamped: bool,
}

impl From<&PrivacyBudget> for BudgetJson {
    fn from(b: &PrivacyBudget) -> Self {
        Self {
            epsilon_bar: b.epsilon_bar,
            delta_bar: b.delta_bar,
            delta_clamped: b.delta_clamped,
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum AdvancedJson {
    Ok(BudgetJson),
    Err { error: String },
}

#[derive(Debug, Serialize)]
pub struct BudgetsJson {
    parallel: BudgetJson,
    naive_sequential: BudgetJson,
    advanced: AdvancedJson,
}

impl From<&BudgetReport> for BudgetsJson {
    fn from(r: &BudgetReport) -> Self {
        Self {
            parallel: (&r.parallel).into(),
            naive_sequential: (&r.naive).into(),
            advanced: match &r.advanced {
                Ok(b) => AdvancedJson::Ok(b.into()),
                Err(e) => AdvancedJson::Err { error: e.to_string() },
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct MetricsJson {
    accuracy: f64,
    precision: f64,
    recall: f64,
}

#[derive(Debug, Serialize)]
struct NoiseJson {
    mechanism: &'static str,
    sensitivity: f64,
    scale: f64,
}

#[derive(Debug, Serialize)]
struct SummaryJson<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    rounds: usize,
    tail_records: usize,
    tail: MetricsJson,
    last: MetricsJson,
    noise: NoiseJson,
    /// `null` when no noise is added.
    budgets: Option<BudgetsJson>,
    total_elapsed_ms: f64,
}

/// The deterministic per-round metrics table.
pub fn metrics_csv(cfg: &RunConfig, r: &ExperimentResult) -> CsvDoc {
    let mut header = vec!["iteration", "accuracy", "precision", "recall", "mean_loss"];
    let names: Vec<String> = (0..r.config.n_clusters).map(|c| format!("cluster{c}_accuracy")).collect();
    if r.config.per_cluster_eval {
        header.extend(names.iter().map(String::as_str));
    }
    let mut doc = CsvDoc::new(cfg, &header);
    for rec in &r.records {
        let mut row = vec![
            rec.iteration.to_string(),
            fmt_f64(rec.accuracy),
            fmt_f64(rec.precision),
            fmt_f64(rec.recall),
            fmt_f64(rec.mean_loss),
        ];
        row.extend(rec.cluster_accuracy.iter().map(|&a| fmt_f64(a)));
        doc.row(row);
    }
    doc
}

pub fn timing_csv(cfg: &RunConfig, r: &ExperimentResult) -> CsvDoc {
    let mut doc = CsvDoc::new(cfg, &["iteration", "elapsed_ms"]);
    for rec in &r.records {
        doc.row([rec.iteration.to_string(), fmt_f64(rec.elapsed_ms)]);
    }
    doc
}

pub fn confusion_csv(cfg: &RunConfig, r: &ExperimentResult, schema: &FeatureSchema) -> CsvDoc {
    let mut header = vec!["true\\predicted"];
    header.extend(schema.class_names().iter().map(String::as_str));
    let mut doc = CsvDoc::new(cfg, &header);
    for (t, name) in schema.class_names().iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend(r.final_confusion.row(t).iter().map(u64::to_string));
        doc.row(row);
    }
    doc
}

/// Writes metrics, timing, confusion matrix, summary, checkpoint and (for
/// CSV input) the code table into `out`.
pub fn write_outputs(out: &Path, cfg: &RunConfig, data: &LoadedData, r: &ExperimentResult) -> Result<()> {
    create_dir(out)?;
    metrics_csv(cfg, r).write(&out.join(METRICS_FILE))?;
    timing_csv(cfg, r).write(&out.join(TIMING_FILE))?;
    confusion_csv(cfg, r, data.train.schema()).write(&out.join(CONFUSION_FILE))?;
    let last = r.records.last().expect("at least one record");
    let summary = SummaryJson {
        schema_version: SCHEMA_VERSION,
        config: cfg,
        rounds: r.config.max_rounds,
        tail_records: r.tail.records,
        tail: MetricsJson {
            accuracy: r.tail.accuracy,
            precision: r.tail.precision,
            recall: r.tail.recall,
        },
        last: MetricsJson {
            accuracy: last.accuracy,
            precision: last.precision,
            recall: last.recall,
        },
        noise: NoiseJson {
            mechanism: r.noise_scale.mechanism.name(),
            sensitivity: r.sensitivity,
            scale: r.noise_scale.value,
        },
        budgets: r.budgets.as_ref().map(Into::into),
        total_elapsed_ms: r.total_elapsed_ms,
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    let meta = format!(
        "{{\"schema_version\":{SCHEMA_VERSION},\"config\":{}}}",
        config_json(cfg)
    );
    write_file(&out.join(MODEL_FILE), &checkpoint::encode(&r.final_params, &meta))?;
    if let Some(codes) = &data.codes {
        let mut text = format!("# schema_version: {SCHEMA_VERSION}\n# config: {}\n", config_json(cfg));
        text.push_str(&codes.to_csv());
        write_file(&out.join(CODES_FILE), text.as_bytes())?;
    }
    Ok(())
}

/// `run`: load, train, write. Returns the result for callers that want it.
pub fn run(cfg: &RunConfig, out: &Path, threads: Option<usize>) -> Result<ExperimentResult> {
    let cfg = cfg.resolved()?;
    let data = load_data(&cfg)?;
    let exec = RayonExecutor::new(threads)?;
    let result = execute(&cfg, &data, &exec)?;
    write_outputs(out, &cfg, &data, &result)?;
    Ok(result)
}
