//! Run and sweep configuration files (TOML).
//!
//! ```toml
//! [model]
//! hidden = [128, 128]        # hidden layer widths
//! activation = "relu"        # relu | tanh
//!
//! [dp]
//! mechanism = "gaussian"     # none | gaussian | laplace | moments_accountant
//! epsilon = 0.5              # positive number, or inf / "inf" (= no noise)
//! delta = 1e-5
//! clip_norm = 1.0
//! learning_rate = 0.0046
//!
//! [federation]
//! clusters = 3
//! per_cluster = 1470
//! rounds = 1000
//! batch_size = 1024
//! seed = 0
//! eval_every = 1
//! tail_window = 100
//! delta_slack = 1e-5
//! per_cluster_eval = false
//!
//! [data]
//! source = "synthetic"       # synthetic | csv
//! train_size = 147000        # synthetic only
//! test_size = 63000
//! class_separation = 3.0
//! seed = 0
//! train = "train.csv"        # csv only; relative to the config file
//! test = "test.csv"
//! normalization = "minmax"   # none | minmax | zscore
//! norm_scope = "global"      # global | per_cluster
//! ```
//!
//! Every key is optional and defaults to the value shown (with mechanism
//! `none` and epsilon `inf`). Unknown keys are rejected. A sweep file adds a
//! `[sweep]` section, see [`SweepSection`].

use std::fmt;
use std::path::{Path, PathBuf};

use ccdsim_core::data::NormKind;
use ccdsim_core::dp::Mechanism;
use ccdsim_core::federation::{ExperimentConfig, NormScope, Normalization};
use ccdsim_core::model::{Activation, LayerShape};
use ccdsim_core::Error as CoreError;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, Result};

/// A privacy budget that may be infinite. Written as a number, or as the
/// string `"inf"` when infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon(pub f64);

impl Epsilon {
    pub const INF: Epsilon = Epsilon(f64::INFINITY);

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" => Some(Self::INF),
            other => other.parse().ok().filter(|v: &f64| !v.is_nan()).map(Epsilon),
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Epsilon;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Epsilon, E> {
                Ok(Epsilon(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Epsilon, E> {
                Ok(Epsilon(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Epsilon, E> {
                Ok(Epsilon(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Epsilon, E> {
                Epsilon::parse(v).ok_or_else(|| E::custom(format!("`{v}` is not a number or \"inf\"")))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub activation: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            activation: "relu".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpSection {
    pub mechanism: String,
    pub epsilon: Epsilon,
    pub delta: f64,
    pub clip_norm: f64,
    pub learning_rate: f64,
}

impl Default for DpSection {
    fn default() -> Self {
        Self {
            mechanism: "none".into(),
            epsilon: Epsilon::INF,
            delta: 1e-5,
            clip_norm: 1.0,
            learning_rate: 0.0046,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationSection {
    pub clusters: usize,
    pub per_cluster: usize,
    pub rounds: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub tail_window: usize,
    pub delta_slack: f64,
    pub per_cluster_eval: bool,
}

impl Default for FederationSection {
    fn default() -> Self {
        Self {
            clusters: 3,
            per_cluster: 1470,
            rounds: 1000,
            batch_size: 1024,
            seed: 0,
            eval_every: 1,
            tail_window: 100,
            delta_slack: 1e-5,
            per_cluster_eval: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: String,
    pub train_size: usize,
    pub test_size: usize,
    pub class_separation: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<String>,
    pub normalization: String,
    pub norm_scope: String,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            source: "synthetic".into(),
            train_size: 147_000,
            test_size: 63_000,
            class_separation: 3.0,
            seed: 0,
            train: None,
            test: None,
            normalization: "minmax".into(),
            norm_scope: "global".into(),
        }
    }
}

/// Where a run's data comes from, after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic {
        train_size: usize,
        test_size: usize,
        class_separation: f64,
        seed: u64,
    },
    Csv {
        train: PathBuf,
        test: PathBuf,
    },
}

/// A complete run configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub dp: DpSection,
    pub federation: FederationSection,
    pub data: DataSection,
    /// Directory that relative data paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn syntax(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::ConfigSyntax {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn parse_mechanism(s: &str) -> Result<Mechanism> {
    Mechanism::from_name(s).ok_or_else(|| {
        CliError::config(
            "dp.mechanism",
            format!("unknown mechanism `{s}` (none, gaussian, laplace, moments_accountant)"),
        )
    })
}

/// Maps a core parameter name to the config key that sets it.
fn config_field(name: &str) -> String {
    let key = match name {
        "epsilon" | "delta" | "clip_norm" | "learning_rate" => return format!("dp.{name}"),
        "dataset_size" | "dp.dataset_size" | "per_cluster" => "per_cluster",
        "max_rounds" | "dp.max_rounds" => "rounds",
        "n_clusters" => "clusters",
        "batch_fraction" => "batch_size",
        other => other,
    };
    format!("federation.{key}")
}

fn core_to_config(e: CoreError) -> CliError {
    match e {
        CoreError::InvalidParameter { name, reason } => CliError::config(config_field(name), reason),
        CoreError::Domain(reason) => CliError::config("dp", reason),
        other => CliError::Core(other),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| syntax(path, e))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&crate::format::read_file(path)?, path)
    }

    /// Canonical form: mechanism spelled by its full name, and `inf` epsilon
    /// paired with mechanism `none` in both directions.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        let mech = parse_mechanism(&self.dp.mechanism)?;
        let mech = if self.dp.epsilon == Epsilon::INF { Mechanism::None } else { mech };
        out.dp.mechanism = mech.name().to_string();
        if mech == Mechanism::None {
            out.dp.epsilon = Epsilon::INF;
        }
        Ok(out)
    }

    pub fn mechanism(&self) -> Result<Mechanism> {
        Ok(parse_mechanism(&self.resolved()?.dp.mechanism)?)
    }

    pub fn activation(&self) -> Result<Activation> {
        match self.model.activation.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(CliError::config("model.activation", format!("unknown activation `{other}`"))),
        }
    }

    pub fn normalization(&self) -> Result<Normalization> {
        let kind = match self.data.normalization.as_str() {
            "none" => return Ok(Normalization::Off),
            "minmax" => NormKind::MinMax,
            "zscore" => NormKind::ZScore,
            other => {
                return Err(CliError::config(
                    "data.normalization",
                    format!("unknown normalization `{other}` (none, minmax, zscore)"),
                ))
            }
        };
        let scope = match self.data.norm_scope.as_str() {
            "global" => NormScope::Global,
            "per_cluster" => NormScope::PerCluster,
            other => {
                return Err(CliError::config(
                    "data.norm_scope",
                    format!("unknown scope `{other}` (global, per_cluster)"),
                ))
            }
        };
        Ok(Normalization::On { kind, scope })
    }

    pub fn data_source(&self) -> Result<DataSource> {
        let d = &self.data;
        match d.source.as_str() {
            "synthetic" => {
                if d.train_size == 0 {
                    return Err(CliError::config("data.train_size", "must be at least 1"));
                }
                if d.test_size == 0 {
                    return Err(CliError::config("data.test_size", "must be at least 1"));
                }
                if !(d.class_separation >= 0.0 && d.class_separation.is_finite()) {
                    return Err(CliError::config("data.class_separation", "must be finite and nonnegative"));
                }
                Ok(DataSource::Synthetic {
                    train_size: d.train_size,
                    test_size: d.test_size,
                    class_separation: d.class_separation,
                    seed: d.seed,
                })
            }
            "csv" => {
                let path = |p: &Option<String>, field: &str| {
                    p.as_ref()
                        .map(|p| self.base_dir.join(p))
                        .ok_or_else(|| CliError::config(field, "required when data.source = \"csv\""))
                };
                Ok(DataSource::Csv {
                    train: path(&d.train, "data.train")?,
                    test: path(&d.test, "data.test")?,
                })
            }
            other => Err(CliError::config(
                "data.source",
                format!("unknown source `{other}` (synthetic, csv)"),
            )),
        }
    }

    /// Validates everything and builds the simulator configuration for a
    /// dataset with `features` inputs and `classes` outputs.
    pub fn experiment(&self, features: usize, classes: usize) -> Result<ExperimentConfig> {
        let dp = &self.dp;
        if dp.epsilon.0.is_nan() || dp.epsilon.0 <= 0.0 {
            return Err(CliError::config("dp.epsilon", "must be positive or inf"));
        }
        let mechanism = self.mechanism()?;
        let f = &self.federation;
        if self.model.hidden.iter().any(|&w| w == 0) {
            return Err(CliError::config("model.hidden", "layer widths must be at least 1"));
        }
        let mut sizes = vec![features];
        sizes.extend(&self.model.hidden);
        sizes.push(classes);
        let shape = LayerShape::new(sizes).map_err(core_to_config)?;

        let mut cfg = ExperimentConfig::reference(f.clusters);
        cfg.shape = shape;
        cfg.activation = self.activation()?;
        cfg.batch_size = f.batch_size;
        cfg = cfg
            .with_per_cluster(f.per_cluster)
            .with_rounds(f.rounds)
            .with_noise(mechanism, self.resolved()?.dp.epsilon.0);
        cfg.dp.delta = dp.delta;
        cfg.dp.clip_norm = dp.clip_norm;
        cfg.dp.learning_rate = dp.learning_rate;
        cfg.master_seed = f.seed;
        cfg.eval_every = f.eval_every;
        cfg.tail_window = f.tail_window;
        cfg.delta_slack = f.delta_slack;
        cfg.per_cluster_eval = f.per_cluster_eval;
        cfg.normalization = self.normalization()?;
        cfg.validate().map_err(core_to_config)?;
        cfg.dp.noise_scale().map_err(core_to_config)?;
        Ok(cfg)
    }
}

/// The grid of a sweep. Each cell is run `repetitions` times with seeds
/// `federation.seed + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mechanisms: Vec<String>,
    pub epsilons: Vec<Epsilon>,
    pub clusters: Vec<usize>,
    pub repetitions: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            mechanisms: vec!["gaussian".into()],
            epsilons: vec![Epsilon(0.5)],
            clusters: vec![3],
            repetitions: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelSection,
    pub dp: DpSection,
    pub federation: FederationSection,
    pub data: DataSection,
    pub sweep: SweepSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// One sweep cell: a mechanism, budget, cluster count and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mechanism: Mechanism,
    pub epsilon: Epsilon,
    pub clusters: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::format::read_file(path)?;
        let mut cfg: SweepConfig = toml::from_str(&text).map_err(|e| syntax(path, e))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn base(&self) -> RunConfig {
        RunConfig {
            model: self.model.clone(),
            dp: self.dp.clone(),
            federation: self.federation.clone(),
            data: self.data.clone(),
            base_dir: self.base_dir.clone(),
        }
    }

    /// All distinct cells, sorted by (mechanism, epsilon, clusters, seed).
    /// An `inf` budget, or mechanism `none`, is a single noise-free cell.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let s = &self.sweep;
        if s.mechanisms.is_empty() {
            return Err(CliError::config("sweep.mechanisms", "must not be empty"));
        }
        if s.epsilons.is_empty() {
            return Err(CliError::config("sweep.epsilons", "must not be empty"));
        }
        if s.clusters.is_empty() {
            return Err(CliError::config("sweep.clusters", "must not be empty"));
        }
        if s.repetitions == 0 {
            return Err(CliError::config("sweep.repetitions", "must be at least 1"));
        }
        if let Some(e) = s.epsilons.iter().find(|e| !(e.0 > 0.0)) {
            return Err(CliError::config("sweep.epsilons", format!("{e} is not positive")));
        }
        if s.clusters.contains(&0) {
            return Err(CliError::config("sweep.clusters", "must be at least 1"));
        }
        let mut cells = Vec::new();
        for m in &s.mechanisms {
            let m = parse_mechanism(m).map_err(|_| CliError::config("sweep.mechanisms", format!("unknown mechanism `{m}`")))?;
            for &e in &s.epsilons {
                let (m, e) = if m == Mechanism::None || e == Epsilon::INF {
                    (Mechanism::None, Epsilon::INF)
                } else {
                    (m, e)
                };
                for &n in &s.clusters {
                    for r in 0..s.repetitions {
                        cells.push(Cell {
                            mechanism: m,
                            epsilon: e,
                            clusters: n,
                            seed: self.federation.seed.wrapping_add(r as u64),
                        });
                    }
                }
            }
        }
        cells.sort_by(|a, b| {
            mechanism_rank(a.mechanism)
                .cmp(&mechanism_rank(b.mechanism))
                .then(a.epsilon.0.total_cmp(&b.epsilon.0))
                .then(a.clusters.cmp(&b.clusters))
                .then(a.seed.cmp(&b.seed))
        });
        cells.dedup();
        Ok(cells)
    }

    /// The run configuration of one cell.
    pub fn cell_config(&self, cell: &Cell) -> RunConfig {
        let mut cfg = self.base();
        cfg.dp.mechanism = cell.mechanism.name().to_string();
        cfg.dp.epsilon = cell.epsilon;
        cfg.federation.clusters = cell.clusters;
        cfg.federation.seed = cell.seed;
        cfg
    }
}

pub fn mechanism_rank(m: Mechanism) -> usize {
    Mechanism::ALL.iter().position(|&x| x == m).unwrap()
}
