//! Logistic multilayer perceptron trained by full-batch error-backprop.
//!
//! Every unit computes `phi(sum_i w_ij y_i)` with `phi` the logistic
//! function and the bias carried as a constant-1 input. The loss is the
//! batch mean of `0.5 * ||output - target||^2`; each weight moves by
//! `-learning_rate * gradient + momentum * previous_delta`. All units
//! update on every step; nothing gates which neurons learn.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::rng::{rng_for, Stream};

pub fn logistic(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

/// Dense layer; `weights` is row-major `outputs x (inputs + bias)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub bias: bool,
    pub weights: Vec<f64>,
}

impl Layer {
    fn row_len(&self) -> usize {
        self.inputs + usize::from(self.bias)
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        let row_len = self.row_len();
        (0..self.outputs)
            .map(|j| {
                let row = &self.weights[j * row_len..(j + 1) * row_len];
                let mut s: f64 = row[..self.inputs].iter().zip(input).map(|(w, y)| w * y).sum();
                if self.bias {
                    s += row[self.inputs];
                }
                logistic(s)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    /// Previous weight deltas, for momentum.
    velocity: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            momentum: 0.0,
            epochs: 100,
            seed: 0,
            hidden: vec![8],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer of size 0".into()));
        }
        Ok(())
    }
}

/// Per-layer gradients, same layout as the weights.
pub type Gradients = Vec<Vec<f64>>;

impl Mlp {
    /// Random initialization: uniform in [-0.5, 0.5] scaled by
    /// `1/sqrt(fan_in)`, drawn from the seed's init stream.
    pub fn new(sizes: &[usize], bias: bool, seed: u64) -> Result<Self> {
        let mut rng = rng_for(seed, Stream::Init, 0);
        Self::build(sizes, bias, |fan_in| {
            rng.gen_range(-0.5..=0.5) / (fan_in as f64).sqrt()
        })
    }

    pub fn zeros(sizes: &[usize], bias: bool) -> Result<Self> {
        Self::build(sizes, bias, |_| 0.0)
    }

    fn build(sizes: &[usize], bias: bool, mut init: impl FnMut(usize) -> f64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "need at least input and output sizes, all positive".into(),
            ));
        }
        let layers: Vec<Layer> = sizes
            .windows(2)
            .map(|w| {
                let row_len = w[0] + usize::from(bias);
                Layer {
                    inputs: w[0],
                    outputs: w[1],
                    bias,
                    weights: (0..w[1] * row_len).map(|_| init(w[0])).collect(),
                }
            })
            .collect();
        let velocity = layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
        Ok(Self { layers, velocity })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        for pair in layers.windows(2) {
            check_dim("layer chain", pair[0].outputs, pair[1].inputs)?;
        }
        for l in &layers {
            check_dim("layer weights", l.outputs * l.row_len(), l.weights.len())?;
        }
        let velocity = layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
        Ok(Self { layers, velocity })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn weight_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.activations(x)?.pop().expect("output layer"))
    }

    /// Activations of every layer, input first.
    pub fn activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim("mlp input", self.input_dim(), x.len())?;
        let mut acts = vec![x.to_vec()];
        for layer in &self.layers {
            let next = layer.forward(acts.last().unwrap());
            acts.push(next);
        }
        Ok(acts)
    }

    /// Mean loss and its gradient over `batch`.
    pub fn gradient(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut grads: Gradients = self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
        let mut loss = 0.0;
        for (x, target) in batch {
            check_dim("mlp target", self.output_dim(), target.len())?;
            let acts = self.activations(x)?;
            let out = acts.last().unwrap();
            loss += 0.5
                * out
                    .iter()
                    .zip(target)
                    .map(|(o, t)| (o - t) * (o - t))
                    .sum::<f64>();
            // delta = dLoss/d(pre-activation)
            let mut delta: Vec<f64> = out
                .iter()
                .zip(target)
                .map(|(o, t)| (o - t) * o * (1.0 - o))
                .collect();
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let row_len = layer.row_len();
                let g = &mut grads[li];
                for (j, d) in delta.iter().enumerate() {
                    let row = &mut g[j * row_len..(j + 1) * row_len];
                    for (gi, y) in row[..layer.inputs].iter_mut().zip(input) {
                        *gi += d * y;
                    }
                    if layer.bias {
                        row[layer.inputs] += d;
                    }
                }
                if li > 0 {
                    delta = (0..layer.inputs)
                        .map(|i| {
                            let back: f64 = delta
                                .iter()
                                .enumerate()
                                .map(|(j, d)| d * layer.weights[j * row_len + i])
                                .sum();
                            back * input[i] * (1.0 - input[i])
                        })
                        .collect();
                }
            }
        }
        let n = batch.len() as f64;
        for g in &mut grads {
            for v in g.iter_mut() {
                *v /= n;
            }
        }
        Ok((loss / n, grads))
    }

    /// One full-batch step in place.
    pub fn backprop_step(
        &mut self,
        batch: &[(Vec<f64>, Vec<f64>)],
        learning_rate: f64,
        momentum: f64,
    ) -> Result<f64> {
        let (loss, grads) = self.gradient(batch)?;
        if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::Diverged("non-finite loss or gradient".into()));
        }
        for ((layer, vel), g) in self.layers.iter_mut().zip(&mut self.velocity).zip(&grads) {
            for ((w, v), gi) in layer.weights.iter_mut().zip(vel.iter_mut()).zip(g) {
                let delta = -learning_rate * gi + momentum * *v;
                *w += delta;
                *v = delta;
            }
        }
        if self.layers.iter().flat_map(|l| &l.weights).any(|w| !w.is_finite()) {
            return Err(Error::Diverged("non-finite weight after update".into()));
        }
        Ok(loss)
    }

    /// Value-semantics form of [`Mlp::backprop_step`].
    pub fn backprop_update(
        &self,
        batch: &[(Vec<f64>, Vec<f64>)],
        config: &TrainConfig,
    ) -> Result<Mlp> {
        let mut next = self.clone();
        next.backprop_step(batch, config.learning_rate, config.momentum)?;
        Ok(next)
    }

    /// Predicted class: argmax of the outputs, or `output > 0.5` for a
    /// single-output network.
    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        let out = self.forward(x)?;
        Ok(if out.len() == 1 {
            usize::from(out[0] > 0.5)
        } else {
            argmax(&out)
        })
    }

    /// Misclassification rate on `data`.
    pub fn error_rate(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut wrong = 0usize;
        for (x, &l) in data.features.iter().zip(&data.labels) {
            if self.classify(x)? != l {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / data.len() as f64)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Targets for `data`: one-hot over classes, or the raw 0/1 label for a
/// single-output network.
pub fn targets(data: &Dataset, output_dim: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    data.features
        .iter()
        .zip(&data.labels)
        .map(|(x, &l)| {
            let t = if output_dim == 1 {
                vec![l as f64]
            } else {
                let mut t = vec![0.0; output_dim];
                t[l] = 1.0;
                t
            };
            (x.clone(), t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub mlp: Mlp,
    /// Fitting error on the training set after each epoch.
    pub curve: Vec<f64>,
    pub initial_error: f64,
    pub final_error: f64,
    /// Set when training diverged; the run then scores error 1.0.
    pub failure: Option<String>,
}

/// Layer sizes `[input, hidden..., classes]` for `data`.
pub fn layer_sizes(data: &Dataset, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = vec![data.dim()];
    sizes.extend_from_slice(hidden);
    sizes.push(data.n_classes.max(2));
    sizes
}

/// Full-batch training. Divergence is reported in the result, not raised.
pub fn train(mut mlp: Mlp, data: &Dataset, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    check_dim("training data", mlp.input_dim(), data.dim())?;
    let batch = targets(data, mlp.output_dim());
    let initial_error = mlp.error_rate(data)?;
    let mut curve = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        if let Err(e) = mlp.backprop_step(&batch, config.learning_rate, config.momentum) {
            let n = config.epochs - curve.len();
            curve.extend(std::iter::repeat_n(1.0, n));
            return Ok(TrainReport {
                mlp,
                curve,
                initial_error,
                final_error: 1.0,
                failure: Some(e.to_string()),
            });
        }
        curve.push(mlp.error_rate(data)?);
    }
    let final_error = curve.last().copied().unwrap_or(initial_error);
    Ok(TrainReport {
        mlp,
        curve,
        initial_error,
        final_error,
        failure: None,
    })
}

/// Per hidden layer, the fraction of units with activation at or below
/// `fire_threshold`, averaged over `inputs`.
pub fn firing_fraction(mlp: &Mlp, inputs: &[Vec<f64>], fire_threshold: f64) -> Result<Vec<f64>> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no inputs".into()));
    }
    let hidden = mlp.layers.len() - 1;
    let mut sums = vec![0.0; hidden];
    for x in inputs {
        let acts = mlp.activations(x)?;
        for (h, sum) in sums.iter_mut().enumerate() {
            let layer = &acts[h + 1];
            let silent = layer.iter().filter(|&&a| a <= fire_threshold).count();
            *sum += silent as f64 / layer.len() as f64;
        }
    }
    Ok(sums.into_iter().map(|s| s / inputs.len() as f64).collect())
}
