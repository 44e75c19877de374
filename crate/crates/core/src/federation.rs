//! Synchronous federated training with per-cluster clipping and noise.
//!
//! Each round every cluster starts from the current global model, takes one
//! SGD step on a fresh minibatch, clips the resulting update, and publishes
//! its clipped model plus calibrated noise. The coordinator averages the
//! published models into the next global model. Minibatch and noise streams
//! are keyed by `(master_seed, cluster, round)` and the average is taken in
//! ascending cluster order, so results do not depend on how the clusters are
//! scheduled.

use alloc::vec::Vec;

use rand::seq::index;

use crate::accountant::{compose_all, BudgetReport};
use crate::data::{normalize, partition, ClusterDataset, Dataset, NormKind, NormStats, Sample};
use crate::dp::{clip_update, perturb, sample_noise, DpConfig, Mechanism, NoiseScale};
use crate::error::{check_len, invalid, Error, Result};
use crate::metrics::{accuracy, macro_precision, macro_recall, tail_average, ConfusionMatrix};
use crate::model::{init_model, loss_and_gradient, param_delta, predict_batch, sgd_step, Activation, LayerShape, ModelParams};
use crate::rng::{stream, Purpose};

/// Test rows per evaluation chunk. Fixed so that chunking never depends on
/// the executor.
const EVAL_CHUNK: usize = 512;

/// Runs a closure over every item of a slice, returning results in slice
/// order. Implementations may run items concurrently.
pub trait Executor {
    fn map_mut<T, R, F>(&self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(&mut T) -> R + Sync + Send;
}

/// Runs items one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_mut<T, R, F>(&self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(&mut T) -> R + Sync + Send,
    {
        items.iter_mut().map(f).collect()
    }
}

/// Monotonic milliseconds from an arbitrary origin.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// A clock that never advances, for environments without a timer.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormScope {
    /// Stats fitted on the whole training split and shared by every cluster.
    #[default]
    Global,
    /// Each cluster fits its own stats; the test split uses their mean.
    PerCluster,
}

/// How `run_experiment` scales features before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Data is used as given.
    #[default]
    Off,
    On { kind: NormKind, scope: NormScope },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub shape: LayerShape,
    pub activation: Activation,
    pub dp: DpConfig,
    pub n_clusters: usize,
    pub per_cluster: usize,
    pub max_rounds: usize,
    pub batch_size: usize,
    pub master_seed: u64,
    pub eval_every: usize,
    /// Trailing rounds averaged into the tail metrics.
    pub tail_window: usize,
    /// `δ̀` of the advanced composition bound.
    pub delta_slack: f64,
    pub normalization: Normalization,
    /// Also score every cluster's local (pre-noise) model on the test split.
    pub per_cluster_eval: bool,
}

impl ExperimentConfig {
    /// The reference setup: a 21-128-128-5 ReLU network, batch 1024,
    /// learning rate 0.0046, 1470 samples per cluster, 1000 rounds,
    /// `δ = 10⁻⁵`, clip norm 1, no noise.
    pub fn reference(n_clusters: usize) -> Self {
        let per_cluster = 1470;
        let batch_size = 1024;
        let max_rounds = 1000;
        let learning_rate = 0.0046;
        Self {
            shape: LayerShape::new(alloc::vec![21, 128, 128, 5]).unwrap(),
            activation: Activation::Relu,
            dp: DpConfig {
                mechanism: Mechanism::None,
                epsilon: f64::INFINITY,
                delta: 1e-5,
                clip_norm: 1.0,
                learning_rate,
                dataset_size: per_cluster,
                batch_fraction: batch_size as f64 / per_cluster as f64,
                max_rounds,
            },
            n_clusters,
            per_cluster,
            max_rounds,
            batch_size,
            master_seed: 0,
            eval_every: 1,
            tail_window: 100,
            delta_slack: 1e-5,
            normalization: Normalization::Off,
            per_cluster_eval: false,
        }
    }

    /// Sets the per-cluster size, keeping the calibration inputs in step.
    /// The batch fraction becomes `min(batch, size) / size`.
    pub fn with_per_cluster(mut self, per_cluster: usize) -> Self {
        self.per_cluster = per_cluster;
        self.dp.dataset_size = per_cluster;
        self.dp.batch_fraction = self.batch_size.min(per_cluster) as f64 / per_cluster.max(1) as f64;
        self
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.max_rounds = rounds;
        self.dp.max_rounds = rounds;
        self
    }

    pub fn with_learning_rate(mut self, mu: f64) -> Self {
        self.dp.learning_rate = mu;
        self
    }

    pub fn with_noise(mut self, mechanism: Mechanism, epsilon: f64) -> Self {
        self.dp.mechanism = mechanism;
        self.dp.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dp.validate()?;
        if self.n_clusters == 0 {
            return Err(invalid("n_clusters", "must be at least 1"));
        }
        if self.per_cluster == 0 {
            return Err(invalid("per_cluster", "must be at least 1"));
        }
        if self.max_rounds == 0 {
            return Err(invalid("max_rounds", "must be at least 1"));
        }
        if self.n_clusters > u32::MAX as usize || self.max_rounds > u32::MAX as usize {
            return Err(invalid("n_clusters", "clusters and rounds must fit in 32 bits"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(invalid("eval_every", "must be at least 1"));
        }
        if self.tail_window == 0 {
            return Err(invalid("tail_window", "must be at least 1"));
        }
        if !(self.delta_slack >= 0.0 && self.delta_slack.is_finite()) {
            return Err(invalid("delta_slack", "must be nonnegative"));
        }
        if self.dp.dataset_size != self.per_cluster {
            return Err(invalid("dp.dataset_size", "must equal per_cluster"));
        }
        if self.dp.max_rounds != self.max_rounds {
            return Err(invalid("dp.max_rounds", "must equal max_rounds"));
        }
        Ok(())
    }

    /// Number of evaluation records a run produces: `ceil(T / eval_every)`.
    pub fn record_count(&self) -> usize {
        self.max_rounds.div_ceil(self.eval_every)
    }

    fn is_eval_round(&self, round: usize) -> bool {
        round % self.eval_every == 0 || round == self.max_rounds
    }
}

/// One participant: its shard and its current local model.
#[derive(Debug, Clone)]
pub struct ClusterState {
    pub cluster_id: usize,
    pub data: ClusterDataset,
    /// Local model after the last round, before noise.
    pub params: ModelParams,
}

/// What a cluster publishes after one round.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub cluster_id: usize,
    /// Clipped, noised model `γ`.
    pub perturbed: ModelParams,
    /// Minibatch loss before the step.
    pub loss: f64,
}

/// One round of local work for `state`, starting from `global`.
///
/// The batch of `min(batch_size, |D|)` samples is drawn without replacement
/// from the `(seed, cluster, round, batch)` stream; noise comes from the
/// `(seed, cluster, round, noise)` stream. On return `state.params` holds the
/// clipped, un-noised local model.
pub fn local_round(
    state: &mut ClusterState,
    global: &ModelParams,
    cfg: &ExperimentConfig,
    scale: &NoiseScale,
    round: usize,
) -> Result<LocalUpdate> {
    if state.params.shape() != global.shape() {
        return Err(Error::DimensionMismatch {
            context: "cluster vs global layout",
            expected: global.len(),
            actual: state.params.len(),
        });
    }
    let samples = state.data.dataset.samples();
    let take = cfg.batch_size.min(samples.len());
    let mut batch_rng = stream(cfg.master_seed, Purpose::Batch, state.cluster_id, round);
    let batch: Vec<&Sample> = index::sample(&mut batch_rng, samples.len(), take)
        .iter()
        .map(|i| &samples[i])
        .collect();

    let (loss, grad) = loss_and_gradient(global, &batch)?;
    let stepped = sgd_step(global, &grad, cfg.dp.learning_rate)?;
    let update = param_delta(&stepped, global)?;
    let clipped = clip_update(update.values(), cfg.dp.clip_norm)?;
    let local = perturb(global, &clipped)?;

    let mut noise_rng = stream(cfg.master_seed, Purpose::Noise, state.cluster_id, round);
    let noise = sample_noise(cfg.dp.mechanism, scale, local.len(), &mut noise_rng)?;
    let perturbed = perturb(&local, &noise)?;
    state.params = local;
    Ok(LocalUpdate {
        cluster_id: state.cluster_id,
        perturbed,
        loss,
    })
}

/// Element-wise mean of `updates`, accumulated in the given order as a
/// running mean `m += (x - m) / k`. Averaging identical models returns that
/// model exactly.
pub fn aggregate(updates: &[ModelParams]) -> Result<ModelParams> {
    let first = updates.first().ok_or(Error::Empty("updates"))?;
    let mut mean = first.values().to_vec();
    for (k, u) in updates.iter().enumerate().skip(1) {
        if u.shape() != first.shape() {
            return Err(Error::DimensionMismatch {
                context: "aggregated layouts",
                expected: first.len(),
                actual: u.len(),
            });
        }
        let count = (k + 1) as f64;
        for (m, &x) in mean.iter_mut().zip(u.values()) {
            *m += (x - *m) / count;
        }
    }
    Ok(first.with_values(mean))
}

/// Metrics after one evaluated round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub iteration: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Mean over clusters of the minibatch loss.
    pub mean_loss: f64,
    pub elapsed_ms: f64,
    /// Per-cluster local-model accuracy, when enabled.
    pub cluster_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Number of records averaged.
    pub records: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<RoundRecord>,
    /// Global model after the final round.
    pub final_params: ModelParams,
    /// Test-split confusion matrix of the final model.
    pub final_confusion: ConfusionMatrix,
    pub tail: TailMetrics,
    pub sensitivity: f64,
    pub noise_scale: NoiseScale,
    /// `None` when no noise is added (no finite guarantee).
    pub budgets: Option<BudgetReport>,
    pub total_elapsed_ms: f64,
}

/// Confusion matrix of `params` on `test`.
pub fn evaluate<E: Executor>(params: &ModelParams, test: &[Sample], exec: &E) -> Result<ConfusionMatrix> {
    let classes = params.shape().output_width();
    let mut chunks: Vec<&[Sample]> = test.chunks(EVAL_CHUNK).collect();
    let parts = exec.map_mut(&mut chunks, |chunk| -> Result<ConfusionMatrix> {
        let preds = predict_batch(params, chunk)?;
        let mut cm = ConfusionMatrix::new(classes);
        for (s, p) in chunk.iter().zip(preds) {
            cm.add(s.label, p)?;
        }
        Ok(cm)
    });
    let mut total = ConfusionMatrix::new(classes);
    for part in parts {
        total.merge(&part?)?;
    }
    Ok(total)
}

fn prepare_data(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<(Vec<ClusterDataset>, Dataset)> {
    match cfg.normalization {
        Normalization::Off => Ok((
            partition(train, cfg.n_clusters, cfg.per_cluster, cfg.master_seed)?,
            test.clone(),
        )),
        Normalization::On { kind, scope: NormScope::Global } => {
            let stats = NormStats::fit(train, kind);
            let train = stats.apply(train)?;
            let test = stats.apply(test)?;
            Ok((partition(&train, cfg.n_clusters, cfg.per_cluster, cfg.master_seed)?, test))
        }
        Normalization::On { kind, scope: NormScope::PerCluster } => {
            let raw = partition(train, cfg.n_clusters, cfg.per_cluster, cfg.master_seed)?;
            let mut all_stats = Vec::with_capacity(raw.len());
            let mut clusters = Vec::with_capacity(raw.len());
            for c in raw {
                let stats = NormStats::fit(&c.dataset, kind);
                let dataset = stats.apply(&c.dataset)?;
                all_stats.push(stats);
                clusters.push(ClusterDataset { dataset, ..c });
            }
            let shared = NormStats::mean_of(&all_stats)?;
            Ok((clusters, normalize(test, Some(&shared))?.0))
        }
    }
}

/// Runs the full federated protocol and evaluates the global model on
/// `test` every `eval_every` rounds (and after the last round).
pub fn run_experiment<E: Executor, C: Clock>(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    exec: &E,
    clock: &C,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    check_len("input width vs features", cfg.shape.input_width(), train.schema().feature_count())?;
    check_len("output width vs classes", cfg.shape.output_width(), train.schema().class_count())?;
    check_len("test features", train.schema().feature_count(), test.schema().feature_count())?;
    let sensitivity = cfg.dp.sensitivity()?;
    let scale = cfg.dp.noise_scale()?;
    let budgets = match cfg.dp.mechanism {
        Mechanism::None => None,
        _ => Some(compose_all(
            cfg.dp.epsilon,
            cfg.dp.delta,
            cfg.n_clusters,
            cfg.max_rounds,
            cfg.delta_slack,
        )?),
    };

    let (clusters, test) = prepare_data(cfg, train, test)?;
    let mut global = init_model(&cfg.shape, cfg.activation, cfg.master_seed);
    let mut states: Vec<ClusterState> = clusters
        .into_iter()
        .map(|data| ClusterState {
            cluster_id: data.cluster_id,
            data,
            params: global.clone(),
        })
        .collect();

    let mut records = Vec::with_capacity(cfg.record_count());
    let mut final_confusion = ConfusionMatrix::new(cfg.shape.output_width());
    let start = clock.now_ms();

    for round in 1..=cfg.max_rounds {
        let outcomes = exec.map_mut(&mut states, |s| local_round(s, &global, cfg, &scale, round));
        let mut updates = Vec::with_capacity(outcomes.len());
        let mut loss_sum = 0.0;
        for o in outcomes {
            // a blown-up model surfaces first as a non-finite update or loss
            let o = o.map_err(|e| match e {
                Error::NonFinite(_) => Error::Divergence { round },
                e => e,
            })?;
            loss_sum += o.loss;
            updates.push(o.perturbed);
        }
        let next = aggregate(&updates)?;
        if !next.is_finite() {
            return Err(Error::Divergence { round });
        }
        global = next;

        if cfg.is_eval_round(round) {
            let cm = evaluate(&global, test.samples(), exec)?;
            let cluster_accuracy = if cfg.per_cluster_eval {
                let mut out = Vec::with_capacity(states.len());
                for s in &states {
                    out.push(accuracy(&evaluate(&s.params, test.samples(), exec)?)?);
                }
                out
            } else {
                Vec::new()
            };
            records.push(RoundRecord {
                iteration: round,
                accuracy: accuracy(&cm)?,
                precision: macro_precision(&cm)?,
                recall: macro_recall(&cm)?,
                mean_loss: loss_sum / states.len() as f64,
                elapsed_ms: clock.now_ms() - start,
                cluster_accuracy,
            });
            final_confusion = cm;
        }
    }
    let total_elapsed_ms = clock.now_ms() - start;

    let window = cfg.tail_window.div_ceil(cfg.eval_every).min(records.len());
    let series = |f: fn(&RoundRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
    let tail = TailMetrics {
        accuracy: tail_average(&series(|r| r.accuracy), window)?,
        precision: tail_average(&series(|r| r.precision), window)?,
        recall: tail_average(&series(|r| r.recall), window)?,
        records: window,
    };

    Ok(ExperimentResult {
        config: cfg.clone(),
        records,
        final_params: global,
        final_confusion,
        tail,
        sensitivity,
        noise_scale: scale,
        budgets,
        total_elapsed_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, Split, SyntheticConfig};
    use crate::dp::gaussian_sigma;
    use alloc::vec;

    fn tiny_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::reference(2)
            .with_per_cluster(20)
            .with_rounds(5);
        cfg.shape = LayerShape::new(vec![21, 6, 5]).unwrap();
        cfg.batch_size = 8;
        cfg.tail_window = 2;
        cfg
    }

    fn data() -> (Dataset, Dataset) {
        SyntheticConfig { n_train: 60, n_test: 30, class_separation: 3.0, seed: 1 }
            .generate()
            .unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let shape = LayerShape::new(vec![2, 2]).unwrap();
        let v = init_model(&shape, Activation::Relu, 1);
        assert_eq!(aggregate(&[v.clone()]).unwrap(), v);
        let neg = v.with_values(v.values().iter().map(|x| -x).collect());
        assert!(aggregate(&[v.clone(), neg]).unwrap().values().iter().all(|&x| x == 0.0));
        let tenth = v.with_values(vec![0.1; v.len()]);
        assert_eq!(aggregate(&[tenth.clone(), tenth.clone(), tenth.clone()]).unwrap(), tenth);
        assert!(aggregate(&[]).is_err());
        let other = ModelParams::zeros(LayerShape::new(vec![3, 2]).unwrap(), Activation::Relu);
        assert!(aggregate(&[v, other]).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = tiny_cfg();
        assert!(cfg.validate().is_ok());
        let mut bad = cfg.clone();
        bad.dp.dataset_size = 3;
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.eval_every = 0;
        assert!(bad.validate().is_err());
        assert_eq!(ExperimentConfig { eval_every: 2, ..cfg.clone() }.record_count(), 3);
        assert_eq!(cfg.record_count(), 5);
    }

    #[test]
    fn record_count_and_tail() {
        let (train, test) = data();
        let cfg = ExperimentConfig { eval_every: 2, ..tiny_cfg() };
        let r = run_experiment(&cfg, &train, &test, &Sequential, &NoClock).unwrap();
        let its: Vec<usize> = r.records.iter().map(|r| r.iteration).collect();
        assert_eq!(its, vec![2, 4, 5]);
        assert_eq!(r.tail.records, 1);
        assert_eq!(r.tail.accuracy, r.records[2].accuracy);
        assert!(r.budgets.is_none());
    }

    #[test]
    fn zero_step_keeps_global() {
        let (train, _) = data();
        let mut cfg = tiny_cfg();
        cfg.dp.learning_rate = 1e-300;
        cfg.dp.clip_norm = 1e12;
        let global = init_model(&cfg.shape, cfg.activation, 4);
        let shard = partition(&train, 1, 20, 0).unwrap().remove(0);
        let mut state = ClusterState { cluster_id: 0, data: shard, params: global.clone() };
        let out = local_round(&mut state, &global, &cfg, &NoiseScale::NONE, 1).unwrap();
        for (a, b) in out.perturbed.values().iter().zip(global.values()) {
            assert!((a - b).abs() < 1e-290);
        }
    }

    // 2-2-2 network, one sample, traced by hand.
    //   W1 = I, b1 = 0, W2 = I, b2 = 0, x = [1, 0], label 1
    //   z1 = [1, 0] -> relu [1, 0]; z2 = [1, 0]; p = [e/(e+1), 1/(e+1)]
    //   dz2 = p - [0, 1] = [a, -a] with a = e/(e+1)
    //   dW2 = h^T dz2 = [[a, -a], [0, 0]]; db2 = [a, -a]
    //   dh = dz2 W2^T = [a, -a]; relu mask [1, 0] -> dz1 = [a, 0]
    //   dW1 = x^T dz1 = [[a, 0], [0, 0]]; db1 = [a, 0]
    // Step with mu = 1 then clip to norm 1: update norm is a*sqrt(6).
    #[test]
    fn hand_traced_round() {
        let schema = FeatureSchema::new(vec!["x0".into(), "x1".into()], vec!["c0".into(), "c1".into()]).unwrap();
        let ds = Dataset::new(schema, vec![Sample { features: vec![1.0, 0.0], label: 1 }], Split::Train).unwrap();
        let shard = partition(&ds, 1, 1, 0).unwrap().remove(0);
        let shape = LayerShape::new(vec![2, 2, 2]).unwrap();
        let global = ModelParams::from_values(
            shape.clone(),
            Activation::Relu,
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        let mut cfg = ExperimentConfig::reference(1).with_per_cluster(1).with_learning_rate(1.0);
        cfg.shape = shape;
        let mut state = ClusterState { cluster_id: 0, data: shard, params: global.clone() };
        let out = local_round(&mut state, &global, &cfg, &NoiseScale::NONE, 1).unwrap();

        let e = core::f64::consts::E;
        let a = e / (e + 1.0);
        let grad = [a, 0.0, 0.0, 0.0, a, 0.0, a, -a, 0.0, 0.0, a, -a];
        let norm = a * 6f64.sqrt();
        let factor = (1.0 / norm).min(1.0);
        for i in 0..12 {
            let want = global.values()[i] - grad[i] * factor;
            assert!((out.perturbed.values()[i] - want).abs() < 1e-15, "coord {i}");
        }
        assert_eq!(state.params, out.perturbed);
        assert!((out.loss - (1.0 + e).ln()).abs() < 1e-15);
    }

    #[test]
    fn local_round_replays() {
        let (train, _) = data();
        let mut cfg = tiny_cfg().with_noise(Mechanism::Gaussian, 0.5);
        cfg.master_seed = 3;
        let scale = gaussian_sigma(0.01, 0.5, 1e-5).unwrap();
        let global = init_model(&cfg.shape, cfg.activation, 2);
        let shard = partition(&train, 2, 20, 0).unwrap().remove(1);
        let mut s1 = ClusterState { cluster_id: 1, data: shard.clone(), params: global.clone() };
        let mut s2 = ClusterState { cluster_id: 1, data: shard, params: global.clone() };
        let a = local_round(&mut s1, &global, &cfg, &scale, 7).unwrap();
        let b = local_round(&mut s2, &global, &cfg, &scale, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.perturbed, s1.params);
    }

    // Reversed executor: runs clusters in reverse order.
    struct Reversed;
    impl Executor for Reversed {
        fn map_mut<T, R, F>(&self, items: &mut [T], f: F) -> Vec<R>
        where
            T: Send,
            R: Send,
            F: Fn(&mut T) -> R + Sync + Send,
        {
            let mut out: Vec<R> = items.iter_mut().rev().map(f).collect();
            out.reverse();
            out
        }
    }

    #[test]
    fn execution_order_does_not_matter() {
        let (train, test) = data();
        let cfg = tiny_cfg().with_noise(Mechanism::Laplace, 0.1);
        let a = run_experiment(&cfg, &train, &test, &Sequential, &NoClock).unwrap();
        let b = run_experiment(&cfg, &train, &test, &Reversed, &NoClock).unwrap();
        assert_eq!(a.final_params, b.final_params);
        assert_eq!(a.records, b.records);
        assert!(a.budgets.is_some());
    }

    #[test]
    fn divergence_is_reported() {
        let (train, test) = data();
        let mut cfg = tiny_cfg();
        cfg.dp.clip_norm = 1e300;
        cfg.dp.learning_rate = 1e300;
        let err = run_experiment(&cfg, &train, &test, &Sequential, &NoClock).unwrap_err();
        assert!(matches!(err, Error::Divergence { round: 1..=3 }), "{err:?}");
    }

    #[test]
    fn per_cluster_normalization_and_eval() {
        let (train, test) = data();
        let mut cfg = tiny_cfg();
        cfg.normalization = Normalization::On { kind: NormKind::ZScore, scope: NormScope::PerCluster };
        cfg.per_cluster_eval = true;
        let r = run_experiment(&cfg, &train, &test, &Sequential, &NoClock).unwrap();
        assert!(r.records.iter().all(|r| r.cluster_accuracy.len() == 2));
    }
}
