//! Minimal differentiable feedforward engine: an MLP with rectifier hidden
//! layers and an identity output, inverted dropout after each hidden layer,
//! exact backpropagation, and plain mini-batch gradient descent.

mod train;

pub use train::{
    balanced_batch_sampler, classification_accuracy, train, Checkpoint, ModelSpec, TrainConfig,
    TrainedModel,
};

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One dense layer; weights are row-major, `weights[o * in_dim + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer { in_dim, out_dim, weights: vec![0.0; in_dim * out_dim], biases: vec![0.0; out_dim] }
    }

    fn xavier(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Layer::zeros(in_dim, out_dim);
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.biases.clone();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out[o] += acc;
        }
        out
    }
}

/// The final layer. The ordinal variant shares one weight vector across its
/// k−1 outputs and keeps k−1 free biases, which is what makes non-increasing
/// biases equivalent to non-increasing output probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OutputLayer {
    Dense(Layer),
    SharedWeight { in_dim: usize, weight: Vec<f64>, biases: Vec<f64> },
}

impl OutputLayer {
    pub fn in_dim(&self) -> usize {
        match self {
            OutputLayer::Dense(l) => l.in_dim,
            OutputLayer::SharedWeight { in_dim, .. } => *in_dim,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            OutputLayer::Dense(l) => l.out_dim,
            OutputLayer::SharedWeight { biases, .. } => biases.len(),
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        match self {
            OutputLayer::Dense(l) => l.affine(x),
            OutputLayer::SharedWeight { weight, biases, .. } => {
                let u: f64 = weight.iter().zip(x).map(|(w, xi)| w * xi).sum();
                biases.iter().map(|b| u + b).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub input_dim: usize,
    pub hidden: Vec<Layer>,
    pub output: OutputLayer,
}

impl MlpParams {
    /// Xavier-uniform weights, zero biases. The ordinal head gets the
    /// shared-weight output; all other heads get a dense output.
    pub fn init(
        input_dim: usize,
        hidden_widths: &[usize],
        output_width: usize,
        shared_weight_output: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut hidden = Vec::with_capacity(hidden_widths.len());
        let mut prev = input_dim;
        for &w in hidden_widths {
            hidden.push(Layer::xavier(prev, w, rng));
            prev = w;
        }
        let output = if shared_weight_output {
            let limit = (6.0 / (prev + 1) as f64).sqrt();
            let weight: Vec<f64> = (0..prev).map(|_| rng.random_range(-limit..limit)).collect();
            OutputLayer::SharedWeight { in_dim: prev, weight, biases: vec![0.0; output_width] }
        } else {
            OutputLayer::Dense(Layer::xavier(prev, output_width, rng))
        };
        MlpParams { input_dim, hidden, output }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim];
        sizes.extend(self.hidden.iter().map(|l| l.out_dim));
        sizes.push(self.output.out_dim());
        sizes
    }

    pub fn output_width(&self) -> usize {
        self.output.out_dim()
    }

    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            input_dim: self.input_dim,
            hidden: self.hidden.iter().map(|l| Layer::zeros(l.in_dim, l.out_dim)).collect(),
            output: match &self.output {
                OutputLayer::Dense(l) => OutputLayer::Dense(Layer::zeros(l.in_dim, l.out_dim)),
                OutputLayer::SharedWeight { in_dim, biases, .. } => OutputLayer::SharedWeight {
                    in_dim: *in_dim,
                    weight: vec![0.0; *in_dim],
                    biases: vec![0.0; biases.len()],
                },
            },
        }
    }

    /// self += factor · other, elementwise over all parameters.
    pub fn add_scaled(&mut self, other: &MlpParams, factor: f64) {
        for (a, b) in self.hidden.iter_mut().zip(&other.hidden) {
            for (w, g) in a.weights.iter_mut().zip(&b.weights) {
                *w += factor * g;
            }
            for (bias, g) in a.biases.iter_mut().zip(&b.biases) {
                *bias += factor * g;
            }
        }
        match (&mut self.output, &other.output) {
            (OutputLayer::Dense(a), OutputLayer::Dense(b)) => {
                for (w, g) in a.weights.iter_mut().zip(&b.weights) {
                    *w += factor * g;
                }
                for (bias, g) in a.biases.iter_mut().zip(&b.biases) {
                    *bias += factor * g;
                }
            }
            (
                OutputLayer::SharedWeight { weight: wa, biases: ba, .. },
                OutputLayer::SharedWeight { weight: wb, biases: bb, .. },
            ) => {
                for (w, g) in wa.iter_mut().zip(wb) {
                    *w += factor * g;
                }
                for (bias, g) in ba.iter_mut().zip(bb) {
                    *bias += factor * g;
                }
            }
            _ => unreachable!("gradient shape always mirrors the parameter shape"),
        }
    }

    /// Flat view of all parameters, used by finite-difference tests.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.hidden {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        match &self.output {
            OutputLayer::Dense(l) => {
                out.extend_from_slice(&l.weights);
                out.extend_from_slice(&l.biases);
            }
            OutputLayer::SharedWeight { weight, biases, .. } => {
                out.extend_from_slice(weight);
                out.extend_from_slice(biases);
            }
        }
        out
    }

    /// Inverse of `flatten`; panics if the length differs.
    pub fn unflatten_into(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        let mut next = || *it.next().expect("flat parameter vector too short");
        for l in &mut self.hidden {
            for w in &mut l.weights {
                *w = next();
            }
            for b in &mut l.biases {
                *b = next();
            }
        }
        match &mut self.output {
            OutputLayer::Dense(l) => {
                for w in &mut l.weights {
                    *w = next();
                }
                for b in &mut l.biases {
                    *b = next();
                }
            }
            OutputLayer::SharedWeight { weight, biases, .. } => {
                for w in weight.iter_mut() {
                    *w = next();
                }
                for b in biases.iter_mut() {
                    *b = next();
                }
            }
        }
        assert!(it.next().is_none(), "flat parameter vector too long");
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = self.input_dim;
        for l in &self.hidden {
            if l.in_dim != prev || l.weights.len() != l.in_dim * l.out_dim
                || l.biases.len() != l.out_dim
            {
                return Err(Error::Input("hidden layer dimensions do not chain".into()));
            }
            prev = l.out_dim;
        }
        if self.output.in_dim() != prev {
            return Err(Error::Input("output layer input width mismatch".into()));
        }
        if self.flatten().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutMode {
    Off,
    Train,
    McInference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutConfig {
    pub rate: f64,
    pub mode: DropoutMode,
}

impl DropoutConfig {
    pub fn off() -> Self {
        DropoutConfig { rate: 0.0, mode: DropoutMode::Off }
    }

    pub fn train(rate: f64) -> Self {
        DropoutConfig { rate, mode: DropoutMode::Train }
    }

    pub fn mc(rate: f64) -> Self {
        DropoutConfig { rate, mode: DropoutMode::McInference }
    }

    /// Masks are drawn only when a stochastic mode is on AND the rate is
    /// positive; a rate of 0 is exactly the deterministic network.
    pub fn active(&self) -> bool {
        !matches!(self.mode, DropoutMode::Off) && self.rate > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::Config(format!("dropout rate {} outside [0,1)", self.rate)));
        }
        Ok(())
    }
}

/// Everything backward needs: layer inputs, pre-activations, and the dropout
/// scale actually applied to each hidden unit.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// Pre-activation of each hidden layer.
    pub pre: Vec<Vec<f64>>,
    /// Post-activation (after rectifier and dropout) of each hidden layer.
    pub post: Vec<Vec<f64>>,
    /// Dropout scale per unit (0 or 1/(1−rate)); None when inactive.
    pub mask_scales: Vec<Option<Vec<f64>>>,
}

/// Forward pass. Hidden layers apply the rectifier, then inverted dropout
/// (keep probability 1−rate, kept units scaled by 1/(1−rate) so the masked
/// expectation of a linear layer equals its deterministic value).
pub fn forward(
    params: &MlpParams,
    x: &[f64],
    dropout: &DropoutConfig,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(ForwardTrace, Vec<f64>)> {
    if x.len() != params.input_dim {
        return Err(Error::Input(format!(
            "input has {} features, network expects {}",
            x.len(),
            params.input_dim
        )));
    }
    dropout.validate()?;
    if dropout.active() && rng.is_none() {
        return Err(Error::Config("active dropout requires an rng".into()));
    }
    let mut trace = ForwardTrace {
        input: x.to_vec(),
        pre: Vec::with_capacity(params.hidden.len()),
        post: Vec::with_capacity(params.hidden.len()),
        mask_scales: Vec::with_capacity(params.hidden.len()),
    };
    let mut activation = x.to_vec();
    for layer in &params.hidden {
        let pre = layer.affine(&activation);
        let mut post: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let mask = if dropout.active() {
            let rng = rng.as_deref_mut().expect("checked above");
            let keep_scale = 1.0 / (1.0 - dropout.rate);
            let scales: Vec<f64> = (0..post.len())
                .map(|_| if rng.random::<f64>() < dropout.rate { 0.0 } else { keep_scale })
                .collect();
            for (v, &s) in post.iter_mut().zip(&scales) {
                *v *= s;
            }
            Some(scales)
        } else {
            None
        };
        trace.pre.push(pre);
        trace.post.push(post.clone());
        trace.mask_scales.push(mask);
        activation = post;
    }
    let output = params.output.forward(&activation);
    if output.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite network output".into()));
    }
    Ok((trace, output))
}

/// Backpropagation; returns gradients in the same shape as the parameters.
pub fn backward(
    params: &MlpParams,
    trace: &ForwardTrace,
    output_grad: &[f64],
) -> Result<MlpParams> {
    if output_grad.len() != params.output.out_dim() {
        return Err(Error::Input(format!(
            "output gradient has {} entries, output layer has {}",
            output_grad.len(),
            params.output.out_dim()
        )));
    }
    if trace.pre.len() != params.hidden.len() {
        return Err(Error::Input("trace does not match network depth".into()));
    }
    let mut grads = params.zeros_like();
    let last_activation =
        if params.hidden.is_empty() { &trace.input } else { &trace.post[params.hidden.len() - 1] };

    // Output layer.
    let mut upstream: Vec<f64>;
    match (&params.output, &mut grads.output) {
        (OutputLayer::Dense(layer), OutputLayer::Dense(g)) => {
            upstream = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let go = output_grad[o];
                g.biases[o] = go;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let wrow = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    row[i] = go * last_activation[i];
                    upstream[i] += wrow[i] * go;
                }
            }
        }
        (
            OutputLayer::SharedWeight { in_dim, weight, .. },
            OutputLayer::SharedWeight { weight: gw, biases: gb, .. },
        ) => {
            let total: f64 = output_grad.iter().sum();
            gb.copy_from_slice(output_grad);
            upstream = vec![0.0; *in_dim];
            for i in 0..*in_dim {
                gw[i] = total * last_activation[i];
                upstream[i] = total * weight[i];
            }
        }
        _ => unreachable!("zeros_like preserves the output layer variant"),
    }

    // Hidden layers, last to first.
    for l in (0..params.hidden.len()).rev() {
        let layer = &params.hidden[l];
        let mut delta = upstream;
        if let Some(scales) = &trace.mask_scales[l] {
            for (d, &s) in delta.iter_mut().zip(scales) {
                *d *= s;
            }
        }
        for (d, &pre) in delta.iter_mut().zip(&trace.pre[l]) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }
        let below: &[f64] = if l == 0 { &trace.input } else { &trace.post[l - 1] };
        let g = &mut grads.hidden[l];
        upstream = vec![0.0; layer.in_dim];
        for o in 0..layer.out_dim {
            let d = delta[o];
            g.biases[o] = d;
            let grow = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let wrow = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for i in 0..layer.in_dim {
                grow[i] = d * below[i];
                upstream[i] += wrow[i] * d;
            }
        }
    }
    Ok(grads)
}
