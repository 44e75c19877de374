//! Multilayer perceptron: forward pass, softmax cross-entropy, analytic
//! gradients and plain SGD.
//!
//! Parameters live in one flat vector with a fixed layout, because the
//! privacy and federation code operate on flat vectors. For each layer in
//! order, the weight matrix comes first, stored row-major as
//! `inputs x outputs` (entry `(i, j)` connects input `i` to output `j`),
//! followed by the `outputs` biases.

use alloc::vec;
use alloc::vec::Vec;
use core::borrow::Borrow;

use rand::Rng;

use crate::data::Sample;
use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{gemm, Op};
use crate::rng::{stream, Purpose};

/// Layer widths from input to output, e.g. `[21, 128, 128, 5]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayerShape {
    sizes: Vec<usize>,
}

impl LayerShape {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(invalid("layer sizes", "need at least an input and an output layer"));
        }
        if sizes.contains(&0) {
            return Err(invalid("layer sizes", "every width must be at least 1"));
        }
        Ok(Self { sizes })
    }

    /// `features -> hidden... -> classes`.
    pub fn mlp(features: usize, hidden: &[usize], classes: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(features);
        sizes.extend_from_slice(hidden);
        sizes.push(classes);
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn slots(&self) -> Vec<Slot> {
        let mut offset = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let s = Slot {
                    inputs: w[0],
                    outputs: w[1],
                    weights: offset,
                    bias: offset + w[0] * w[1],
                };
                offset = s.bias + s.outputs;
                s
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    inputs: usize,
    outputs: usize,
    weights: usize,
    bias: usize,
}

impl Slot {
    fn weights<'a>(&self, v: &'a [f64]) -> &'a [f64] {
        &v[self.weights..self.bias]
    }
    fn bias<'a>(&self, v: &'a [f64]) -> &'a [f64] {
        &v[self.bias..self.bias + self.outputs]
    }
}

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = libm::tanh(*v)),
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the activation
    /// output `a`.
    fn backprop(self, a: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => grad
                .iter_mut()
                .zip(a)
                .for_each(|(g, &a)| {
                    if a <= 0.0 {
                        *g = 0.0
                    }
                }),
            Activation::Tanh => grad.iter_mut().zip(a).for_each(|(g, &a)| *g *= 1.0 - a * a),
        }
    }
}

/// Network parameters in the canonical flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    shape: LayerShape,
    activation: Activation,
    values: Vec<f64>,
}

/// One dense layer, unpacked from the flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `inputs x outputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ModelParams {
    pub fn from_values(shape: LayerShape, activation: Activation, values: Vec<f64>) -> Result<Self> {
        check_len("parameter vector", shape.param_count(), values.len())?;
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(Self {
            shape,
            activation,
            values,
        })
    }

    pub fn zeros(shape: LayerShape, activation: Activation) -> Self {
        let values = vec![0.0; shape.param_count()];
        Self {
            shape,
            activation,
            values,
        }
    }

    pub fn shape(&self) -> &LayerShape {
        &self.shape
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same shape, new values. Does not check finiteness.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            shape: self.shape.clone(),
            activation: self.activation,
            values,
        }
    }

    pub fn unflatten(&self) -> Vec<DenseLayer> {
        self.shape
            .slots()
            .iter()
            .map(|s| DenseLayer {
                inputs: s.inputs,
                outputs: s.outputs,
                weights: s.weights(&self.values).to_vec(),
                bias: s.bias(&self.values).to_vec(),
            })
            .collect()
    }

    pub fn flatten(layers: &[DenseLayer], activation: Activation) -> Result<Self> {
        let first = layers.first().ok_or(Error::Empty("layers"))?;
        let mut sizes = vec![first.inputs];
        let mut values = Vec::new();
        for l in layers {
            check_len("layer inputs", *sizes.last().unwrap(), l.inputs)?;
            check_len("layer weights", l.inputs * l.outputs, l.weights.len())?;
            check_len("layer bias", l.outputs, l.bias.len())?;
            sizes.push(l.outputs);
            values.extend_from_slice(&l.weights);
            values.extend_from_slice(&l.bias);
        }
        Self::from_values(LayerShape::new(sizes)?, activation, values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A gradient or parameter difference in the canonical layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Weights uniform in `±1/sqrt(fan_in)` per layer, biases zero.
pub fn init_model(shape: &LayerShape, activation: Activation, seed: u64) -> ModelParams {
    let mut rng = stream(seed, Purpose::Init, 0, 0);
    let mut params = ModelParams::zeros(shape.clone(), activation);
    for s in shape.slots() {
        let bound = 1.0 / libm::sqrt(s.inputs as f64);
        for w in &mut params.values[s.weights..s.bias] {
            *w = rng.random_range(-bound..bound);
        }
    }
    params
}

/// Post-activation outputs of every layer for a batch of `rows` inputs.
/// The last entry holds the output logits.
fn forward_all(params: &ModelParams, inputs: &[f64], rows: usize) -> Vec<Vec<f64>> {
    let slots = params.shape.slots();
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(slots.len());
    for (l, s) in slots.iter().enumerate() {
        let prev = if l == 0 { inputs } else { &acts[l - 1] };
        let mut z = Vec::with_capacity(rows * s.outputs);
        for _ in 0..rows {
            z.extend_from_slice(s.bias(&params.values));
        }
        gemm(rows, s.inputs, s.outputs, prev, Op::N, s.weights(&params.values), Op::N, 1.0, &mut z);
        if l + 1 < slots.len() {
            params.activation.apply(&mut z);
        }
        acts.push(z);
    }
    acts
}

fn output_width(slots: &[Slot]) -> usize {
    slots.last().unwrap().outputs
}

/// `ln Σ exp(z)`, shifted by the maximum.
fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(z.iter().map(|v| libm::exp(v - max)).sum::<f64>())
}

fn softmax_rows(logits: &mut [f64], classes: usize) {
    logits.chunks_mut(classes).for_each(softmax_in_place);
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

fn pack<S: Borrow<Sample>>(params: &ModelParams, batch: &[S]) -> Result<Vec<f64>> {
    let d = params.shape.input_width();
    let mut x = Vec::with_capacity(batch.len() * d);
    for s in batch {
        let s = s.borrow();
        check_len("input features", d, s.features.len())?;
        x.extend_from_slice(&s.features);
    }
    Ok(x)
}

/// Class probabilities for one input.
pub fn forward(params: &ModelParams, features: &[f64]) -> Result<Vec<f64>> {
    check_len("input features", params.shape.input_width(), features.len())?;
    let mut out = forward_all(params, features, 1).pop().unwrap();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict(params: &ModelParams, features: &[f64]) -> Result<usize> {
    forward(params, features).map(|p| argmax(&p))
}

/// Predicted classes for a batch, evaluated in one pass.
pub fn predict_batch<S: Borrow<Sample>>(params: &ModelParams, batch: &[S]) -> Result<Vec<usize>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let x = pack(params, batch)?;
    let logits = forward_all(params, &x, batch.len()).pop().unwrap();
    Ok(logits.chunks(params.shape.output_width()).map(argmax).collect())
}

fn check_labels<S: Borrow<Sample>>(params: &ModelParams, batch: &[S]) -> Result<()> {
    let classes = params.shape.output_width();
    match batch.iter().map(Borrow::borrow).find(|s: &&Sample| s.label >= classes) {
        Some(s) => Err(Error::LabelOutOfRange {
            label: s.label,
            classes,
        }),
        None => Ok(()),
    }
}

fn mean_cross_entropy<S: Borrow<Sample>>(logits: &[f64], classes: usize, batch: &[S]) -> f64 {
    let total: f64 = logits
        .chunks(classes)
        .zip(batch)
        .map(|(z, s)| log_sum_exp(z) - z[s.borrow().label])
        .sum();
    total / batch.len() as f64
}

/// Mean softmax cross-entropy over `batch`.
pub fn loss<S: Borrow<Sample>>(params: &ModelParams, batch: &[S]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    check_labels(params, batch)?;
    let x = pack(params, batch)?;
    let logits = forward_all(params, &x, batch.len()).pop().unwrap();
    Ok(mean_cross_entropy(&logits, params.shape.output_width(), batch))
}

/// Mean cross-entropy and its exact gradient.
///
/// The loss is evaluated as `logsumexp(z) - z_label`, so it stays finite
/// when a probability underflows.
pub fn loss_and_gradient<S: Borrow<Sample>>(
    params: &ModelParams,
    batch: &[S],
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    check_labels(params, batch)?;
    let n = batch.len();
    let x = pack(params, batch)?;
    let slots = params.shape.slots();
    let mut acts = forward_all(params, &x, n);
    let classes = output_width(&slots);
    let mut probs = acts.pop().unwrap();
    let loss = mean_cross_entropy(&probs, classes, batch);
    softmax_rows(&mut probs, classes);

    // dL/dz at the output: (p - onehot) / n
    let inv_n = 1.0 / n as f64;
    let mut delta: Vec<f64> = probs.iter().map(|p| p * inv_n).collect();
    for (row, s) in delta.chunks_mut(classes).zip(batch) {
        row[s.borrow().label] -= inv_n;
    }

    let mut grad = vec![0.0; params.values.len()];
    for l in (0..slots.len()).rev() {
        let s = slots[l];
        let input = if l == 0 { &x } else { &acts[l - 1] };
        gemm(
            s.inputs,
            n,
            s.outputs,
            input,
            Op::T,
            &delta,
            Op::N,
            0.0,
            &mut grad[s.weights..s.bias],
        );
        let gb = &mut grad[s.bias..s.bias + s.outputs];
        for row in delta.chunks(s.outputs) {
            gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
        }
        if l > 0 {
            let mut back = vec![0.0; n * s.inputs];
            gemm(n, s.outputs, s.inputs, &delta, Op::N, s.weights(&params.values), Op::T, 0.0, &mut back);
            params.activation.backprop(&acts[l - 1], &mut back);
            delta = back;
        }
    }
    Ok((loss, Gradient(grad)))
}

/// `values - mu * grad`.
pub fn sgd_step(params: &ModelParams, grad: &Gradient, mu: f64) -> Result<ModelParams> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("learning_rate", "must be positive and finite"));
    }
    check_len("gradient", params.values.len(), grad.0.len())?;
    let values = params
        .values
        .iter()
        .zip(&grad.0)
        .map(|(w, g)| w - mu * g)
        .collect();
    Ok(params.with_values(values))
}

/// Element-wise `new - old`.
pub fn param_delta(new: &ModelParams, old: &ModelParams) -> Result<Gradient> {
    if new.shape != old.shape {
        return Err(Error::DimensionMismatch {
            context: "parameter layouts",
            expected: old.values.len(),
            actual: new.values.len(),
        });
    }
    Ok(Gradient(
        new.values.iter().zip(&old.values).map(|(a, b)| a - b).collect(),
    ))
}
