//! Datasets: schema, normalization, partitioning across clusters, and a
//! synthetic Gaussian-mixture stand-in for the blockchain traffic corpus.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, invalid, Error, Result};
use crate::rng::{stream, Purpose};

/// Traffic features, in column order.
pub const BNAT_FEATURES: [&str; 21] = [
    "duration",
    "protocol_type",
    "service",
    "src_bytes",
    "dst_bytes",
    "flag",
    "count",
    "srv_count",
    "serror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_serror_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_serror_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_srv_serror_rate",
];

/// Features whose raw values are symbolic and get integer codes.
pub const CATEGORICAL_FEATURES: [&str; 3] = ["protocol_type", "service", "flag"];

/// Traffic classes: normal behaviour and four attack families.
pub const BNAT_CLASSES: [&str; 5] = ["normal", "DoS", "FoT", "BP", "MitM"];

/// Ordered feature and class names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl FeatureSchema {
    /// The 21-feature, 5-class traffic schema.
    pub fn bnat() -> Self {
        Self {
            feature_names: BNAT_FEATURES.iter().map(|s| s.to_string()).collect(),
            class_names: BNAT_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// A custom schema. Names must be nonempty and unique; at least one
    /// feature and two classes are required.
    pub fn new(feature_names: Vec<String>, class_names: Vec<String>) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(invalid("feature_names", "at least one feature required"));
        }
        if class_names.len() < 2 {
            return Err(invalid("class_names", "at least two classes required"));
        }
        for names in [&feature_names, &class_names] {
            for (i, a) in names.iter().enumerate() {
                if a.is_empty() {
                    return Err(invalid("schema", "empty name"));
                }
                if names[..i].contains(a) {
                    return Err(invalid("schema", alloc::format!("duplicate name `{a}`")));
                }
            }
        }
        Ok(Self {
            feature_names,
            class_names,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|c| c == name)
    }
}

/// One labeled record.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// A nonempty set of samples conforming to a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    samples: Vec<Sample>,
    split: Split,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, samples: Vec<Sample>, split: Split) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        for s in &samples {
            check_len("sample features", schema.feature_count(), s.features.len())?;
            if s.label >= schema.class_count() {
                return Err(Error::LabelOutOfRange {
                    label: s.label,
                    classes: schema.class_count(),
                });
            }
        }
        Ok(Self {
            schema,
            samples,
            split,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    /// Same samples under a different split tag.
    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.schema.class_count()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

/// One cluster's private shard.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDataset {
    pub cluster_id: usize,
    pub dataset: Dataset,
    /// Positions of these samples in the dataset that was partitioned.
    pub source_indices: Vec<usize>,
}

impl ClusterDataset {
    pub fn size(&self) -> usize {
        self.dataset.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormKind {
    /// Scale each feature to `[0, 1]`.
    #[default]
    MinMax,
    /// Subtract the mean and divide by the standard deviation.
    ZScore,
}

/// Per-feature scaling statistics, fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    kind: NormKind,
    /// `(min, max)` for min-max, `(mean, stddev)` for z-score.
    pairs: Vec<(f64, f64)>,
}

impl NormStats {
    pub fn new(kind: NormKind, pairs: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &pairs {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite("normalization stats"));
            }
            let ok = match kind {
                NormKind::MinMax => a <= b,
                NormKind::ZScore => b >= 0.0,
            };
            if !ok {
                return Err(invalid("stats", "min > max or negative stddev"));
            }
        }
        Ok(Self { kind, pairs })
    }

    pub fn fit(dataset: &Dataset, kind: NormKind) -> Self {
        let d = dataset.schema.feature_count();
        let n = dataset.len() as f64;
        let pairs = (0..d)
            .map(|j| {
                let col = dataset.samples.iter().map(|s| s.features[j]);
                match kind {
                    NormKind::MinMax => col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    }),
                    NormKind::ZScore => {
                        let mean = col.clone().sum::<f64>() / n;
                        let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        (mean, libm::sqrt(var))
                    }
                }
            })
            .collect();
        Self { kind, pairs }
    }

    /// Element-wise mean of several fitted stats of the same kind and width.
    pub fn mean_of(stats: &[NormStats]) -> Result<Self> {
        let first = stats.first().ok_or(Error::Empty("stats"))?;
        let mut pairs = vec![(0.0, 0.0); first.pairs.len()];
        for s in stats {
            if s.kind != first.kind {
                return Err(invalid("stats", "mixed normalization kinds"));
            }
            check_len("stats width", first.pairs.len(), s.pairs.len())?;
            for (acc, p) in pairs.iter_mut().zip(&s.pairs) {
                acc.0 += p.0;
                acc.1 += p.1;
            }
        }
        let k = stats.len() as f64;
        for p in &mut pairs {
            *p = (p.0 / k, p.1 / k);
        }
        Ok(Self {
            kind: first.kind,
            pairs,
        })
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    fn scale(&self, j: usize, v: f64) -> f64 {
        let (a, b) = self.pairs[j];
        match self.kind {
            NormKind::MinMax => {
                let range = b - a;
                if range > 0.0 {
                    (v - a) / range
                } else {
                    0.0
                }
            }
            NormKind::ZScore => {
                if b > 0.0 {
                    (v - a) / b
                } else {
                    0.0
                }
            }
        }
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        check_len(
            "normalization stats",
            dataset.schema.feature_count(),
            self.pairs.len(),
        )?;
        let samples = dataset
            .samples
            .iter()
            .map(|s| Sample {
                features: s
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| self.scale(j, v))
                    .collect(),
                label: s.label,
            })
            .collect();
        Ok(Dataset {
            schema: dataset.schema.clone(),
            samples,
            split: dataset.split,
        })
    }
}

/// Min-max normalizes `dataset`. With `stats` absent they are fitted on the
/// dataset itself; otherwise the supplied (training) stats are reused.
pub fn normalize(dataset: &Dataset, stats: Option<&NormStats>) -> Result<(Dataset, NormStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => NormStats::fit(dataset, NormKind::MinMax),
    };
    Ok((stats.apply(dataset)?, stats))
}

/// Deals `n_clusters * per_cluster` distinct samples, chosen uniformly at
/// random without replacement, into equally sized clusters.
pub fn partition(
    dataset: &Dataset,
    n_clusters: usize,
    per_cluster: usize,
    seed: u64,
) -> Result<Vec<ClusterDataset>> {
    if n_clusters == 0 {
        return Err(invalid("n_clusters", "must be positive"));
    }
    if per_cluster == 0 {
        return Err(invalid("per_cluster", "must be positive"));
    }
    let needed = n_clusters
        .checked_mul(per_cluster)
        .ok_or_else(|| invalid("n_clusters", "overflow"))?;
    if needed > dataset.len() {
        return Err(Error::Capacity {
            needed,
            available: dataset.len(),
        });
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut stream(seed, Purpose::Partition, 0, 0));

    order[..needed]
        .chunks(per_cluster)
        .enumerate()
        .map(|(cluster_id, idx)| {
            let samples = idx.iter().map(|&i| dataset.samples[i].clone()).collect();
            Ok(ClusterDataset {
                cluster_id,
                dataset: Dataset::new(dataset.schema.clone(), samples, Split::Train)?,
                source_indices: idx.to_vec(),
            })
        })
        .collect()
}

/// A balanced five-class Gaussian mixture over the traffic schema.
///
/// Each class mean is a random unit direction scaled by `class_separation`;
/// samples add unit-variance spherical noise. The result is shuffled and
/// min-max normalized over the whole set.
pub fn generate_synthetic(n_per_class: usize, class_separation: f64, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(invalid("n_per_class", "must be at least 1"));
    }
    if !(class_separation >= 0.0 && class_separation.is_finite()) {
        return Err(invalid("class_separation", "must be finite and nonnegative"));
    }
    let schema = FeatureSchema::bnat();
    let d = schema.feature_count();
    let m = schema.class_count();

    let mut means_rng = stream(seed, Purpose::Synthetic, 0, 0);
    let means: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut means_rng)).collect();
            let norm = libm::sqrt(dir.iter().map(|v| v * v).sum::<f64>());
            dir.iter().map(|v| v / norm * class_separation).collect()
        })
        .collect();

    let mut rng = stream(seed, Purpose::Synthetic, 1, 0);
    let mut samples = Vec::with_capacity(n_per_class * m);
    for (label, mean) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            let features = mean
                .iter()
                .map(|mu| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mu + z
                })
                .collect();
            samples.push(Sample { features, label });
        }
    }
    samples.shuffle(&mut rng);

    let raw = Dataset::new(schema, samples, Split::Train)?;
    Ok(normalize(&raw, None)?.0)
}

/// Train/test pair drawn from one synthetic mixture, so both splits share the
/// same class means and scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub class_separation: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn generate(&self) -> Result<(Dataset, Dataset)> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(invalid("synthetic", "train and test sizes must be positive"));
        }
        let classes = BNAT_CLASSES.len();
        let train_pc = self.n_train.div_ceil(classes);
        let test_pc = self.n_test.div_ceil(classes);
        let all = generate_synthetic(train_pc + test_pc, self.class_separation, self.seed)?;
        let schema = all.schema.clone();

        let mut seen = vec![0usize; classes];
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for s in all.into_samples() {
            seen[s.label] += 1;
            if seen[s.label] <= train_pc {
                train.push(s);
            } else {
                test.push(s);
            }
        }
        let mut rng = stream(self.seed, Purpose::Split, 0, 0);
        train.shuffle(&mut rng);
        test.shuffle(&mut rng);
        train.truncate(self.n_train);
        test.truncate(self.n_test);
        Ok((
            Dataset::new(schema.clone(), train, Split::Train)?,
            Dataset::new(schema, test, Split::Test)?,
        ))
    }
}
