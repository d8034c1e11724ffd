//! Fully connected network with sigmoid hidden layers and one linear output
//! node, trained by full-batch gradient descent on mean squared error.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_columns, check_targets, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub normalize_inputs: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_layers: vec![100, 90, 80],
            learning_rate: 0.01,
            epochs: 1000,
            seed: 0,
            normalize_inputs: true,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_layers.contains(&0) {
            return Err(ModelError::InvalidConfig("hidden layer with zero nodes".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Dense layer; `weights` has shape (outputs, inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Per-feature min-max scaling to [0, 1] from training statistics.
/// Constant columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let (min, max) = x
            .columns()
            .into_iter()
            .map(|c| {
                c.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
            })
            .unzip();
        MinMaxScaler { min, max }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let span = self.max[j] - self.min[j];
            if span > 0.0 {
                col.mapv_inplace(|v| (v - self.min[j]) / span);
            } else {
                col.fill(0.0);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub n_inputs: usize,
    pub layers: Vec<Layer>,
    pub scaler: Option<MinMaxScaler>,
}

/// Gradient of the batch MSE, one entry per layer with the layer's shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub layers: Vec<Layer>,
    pub loss: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl MlpModel {
    /// Seeded initialization: weights uniform in ±√(6 / (fan_in + fan_out)), zero biases.
    pub fn init(n_inputs: usize, config: &MlpConfig, scaler: Option<MinMaxScaler>) -> Result<Self, ModelError> {
        config.validate()?;
        if n_inputs == 0 {
            return Err(ModelError::InvalidConfig("network needs at least one input".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut widths = vec![n_inputs];
        widths.extend(&config.hidden_layers);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((fan_out, fan_in), || {
                        rng.random_range(-limit..=limit)
                    }),
                    biases: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(MlpModel { config: config.clone(), n_inputs, layers, scaler })
    }

    /// Builds a model from explicit layers; shapes must chain to one output.
    pub fn from_layers(
        config: MlpConfig,
        layers: Vec<Layer>,
        scaler: Option<MinMaxScaler>,
    ) -> Result<Self, ModelError> {
        let first = layers.first().ok_or_else(|| ModelError::InvalidConfig("no layers".into()))?;
        let n_inputs = first.weights.ncols();
        let mut width = n_inputs;
        for layer in &layers {
            if layer.weights.ncols() != width {
                return Err(ModelError::DimensionMismatch { expected: width, found: layer.weights.ncols() });
            }
            if layer.biases.len() != layer.weights.nrows() {
                return Err(ModelError::DimensionMismatch {
                    expected: layer.weights.nrows(),
                    found: layer.biases.len(),
                });
            }
            width = layer.weights.nrows();
        }
        if width != 1 {
            return Err(ModelError::DimensionMismatch { expected: 1, found: width });
        }
        if let Some(s) = &scaler {
            if s.min.len() != n_inputs || s.max.len() != n_inputs {
                return Err(ModelError::DimensionMismatch { expected: n_inputs, found: s.min.len() });
            }
        }
        Ok(MlpModel { config, n_inputs, layers, scaler })
    }

    /// Layer widths from input to output, e.g. `[14, 100, 90, 80, 1]`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.n_inputs];
        s.extend(self.layers.iter().map(|l| l.weights.nrows()));
        s
    }

    fn prepare(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match &self.scaler {
            Some(s) => s.transform(x),
            None => x.to_owned(),
        }
    }

    /// Activations of every layer, input first; the last entry is the (n, 1) output.
    fn forward(&self, input: Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = acts[k].dot(&layer.weights.t());
            z += &layer.biases;
            if k < last {
                z.mapv_inplace(sigmoid);
            }
            acts.push(z);
        }
        acts
    }

    fn loss_and_gradient(&self, input: Array2<f64>, y: ArrayView1<'_, f64>) -> MlpGradient {
        let n = y.len() as f64;
        let acts = self.forward(input);
        let out = acts.last().expect("output").column(0).to_owned();
        let residual = &out - &y;
        let loss = residual.dot(&residual) / n;

        let mut delta: Array2<f64> = (residual * (2.0 / n)).insert_axis(Axis(1));
        let mut grads = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let weights = delta.t().dot(&acts[k]);
            let biases = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&layer.weights);
                back.zip_mut_with(&acts[k], |d, &a| *d *= a * (1.0 - a));
                delta = back;
            }
            grads.push(Layer { weights, biases });
        }
        grads.reverse();
        MlpGradient { layers: grads, loss }
    }

    fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }
}

/// Analytic gradient of the batch mean squared error with respect to every
/// weight and bias. Rows are raw features; the model's scaler is applied.
pub fn mlp_gradient(
    model: &MlpModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
) -> Result<MlpGradient, ModelError> {
    check_columns(model.n_inputs, &x)?;
    check_targets(&x, &y)?;
    if y.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    Ok(model.loss_and_gradient(model.prepare(x), y))
}

pub fn fit_mlp(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    config: &MlpConfig,
) -> Result<MlpModel, ModelError> {
    check_targets(&x, &y)?;
    if x.nrows() == 0 {
        return Err(ModelError::EmptyDataset);
    }
    let scaler = config.normalize_inputs.then(|| MinMaxScaler::fit(x));
    let mut model = MlpModel::init(x.ncols(), config, scaler)?;
    let input = model.prepare(x);
    let lr = config.learning_rate;
    for epoch in 0..config.epochs {
        let grad = model.loss_and_gradient(input.clone(), y);
        if !grad.loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        for (layer, g) in model.layers.iter_mut().zip(&grad.layers) {
            layer.weights.scaled_add(-lr, &g.weights);
            layer.biases.scaled_add(-lr, &g.biases);
        }
    }
    if !model.is_finite() {
        return Err(ModelError::NonFiniteLoss { epoch: config.epochs });
    }
    Ok(model)
}

pub fn predict_mlp(model: &MlpModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, ModelError> {
    check_columns(model.n_inputs, &x)?;
    let acts = model.forward(model.prepare(x));
    Ok(acts.last().expect("output").column(0).to_vec())
}
