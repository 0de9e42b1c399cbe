//! Fully connected ReLU network with a softmax output, trained with
//! mini-batch Adam on the mean cross-entropy loss.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Model, argmax, check_dim, check_training_data};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_layers: vec![300, 300],
            learning_rate: 0.0005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 1000,
            patience: 10,
            validation_fraction: 0.1,
            seed: 42,
        }
    }
}

/// Validation loss must drop by more than this to count as an improvement.
const IMPROVEMENT_TOL: f64 = 1e-4;

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("MLP learning rate must be > 0"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::param("MLP layer widths must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("MLP batch size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::param("MLP validation fraction must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon.is_nan()
            || self.epsilon <= 0.0
        {
            return Err(Error::param("invalid Adam coefficients"));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let hidden: Vec<String> = self.hidden_layers.iter().map(|h| h.to_string()).collect();
        format!(
            "hidden={};activation=relu;optimizer=adam(beta1={};beta2={};eps={});lr={};batch={};max_epochs={};patience={};val_fraction={};seed={}",
            hidden.join("x"),
            self.beta1,
            self.beta2,
            self.epsilon,
            self.learning_rate,
            self.batch_size,
            self.max_epochs,
            self.patience,
            self.validation_fraction,
            self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `fan_in × fan_out`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Per-layer `(∂L/∂W, ∂L/∂b)`.
pub type Gradients = Vec<(Array2<f64>, Array1<f64>)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Dense>,
    pub epochs_run: usize,
}

fn softmax_rows(mut z: Array2<f64>) -> Array2<f64> {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    z
}

impl MlpModel {
    /// He-uniform weights, zero biases.
    pub fn init(input_dim: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(n_classes);
        let layers = widths
            .windows(2)
            .map(|w| {
                let limit = (6.0 / w[0] as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-limit..limit)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        MlpModel { layers, epochs_run: 0 }
    }

    pub fn dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().expect("at least one layer").weights.ncols()
    }

    /// Activations of every layer; the first entry is the input, the last the softmax output.
    fn forward_all(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.to_owned()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = acts[l].dot(&layer.weights) + &layer.bias;
            acts.push(if l == last {
                softmax_rows(z)
            } else {
                z.mapv(|v| v.max(0.0))
            });
        }
        acts
    }

    /// Class probabilities, one row per input row.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.dim(), x.ncols())?;
        Ok(self.forward_all(x).pop().expect("output layer"))
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, x: ArrayView2<'_, f64>, y: &[usize]) -> f64 {
        let probs = self.forward_all(x).pop().expect("output layer");
        cross_entropy(&probs, y)
    }

    /// Loss and its gradient with respect to every weight and bias.
    pub fn loss_and_gradients(&self, x: ArrayView2<'_, f64>, y: &[usize]) -> (f64, Gradients) {
        let acts = self.forward_all(x);
        let n = x.nrows() as f64;
        let probs = acts.last().expect("output layer");
        let loss = cross_entropy(probs, y);

        let mut delta = probs.clone();
        for (i, &c) in y.iter().enumerate() {
            delta[[i, c]] -= 1.0;
        }
        delta /= n;

        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let input = &acts[l];
            let gw = input.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                back.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        (loss, grads)
    }

    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        check_dim(self.dim(), x.len())?;
        let p = self.predict_proba(x.insert_axis(Axis(0)))?;
        Ok(argmax(p.row(0).iter().copied()))
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
    }
}

fn cross_entropy(probs: &Array2<f64>, y: &[usize]) -> f64 {
    let n = y.len().max(1) as f64;
    -y.iter()
        .enumerate()
        .map(|(i, &c)| probs[[i, c]].max(1e-300).ln())
        .sum::<f64>()
        / n
}

impl Model for MlpModel {
    fn dim(&self) -> usize {
        MlpModel::dim(self)
    }

    fn predict_one(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        MlpModel::predict_one(self, x)
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        MlpModel::predict(self, x)
    }
}

struct Adam {
    m: Gradients,
    v: Gradients,
    t: i32,
}

impl Adam {
    fn new(model: &MlpModel) -> Self {
        let zeros: Gradients = model
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
            .collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, p: &MlpParams) {
        self.t += 1;
        let bc1 = 1.0 - p.beta1.powi(self.t);
        let bc2 = 1.0 - p.beta2.powi(self.t);
        let lr = p.learning_rate * bc2.sqrt() / bc1;
        for (l, (gw, gb)) in grads.iter().enumerate() {
            let layer = &mut model.layers[l];
            let (mw, mb) = &mut self.m[l];
            let (vw, vb) = &mut self.v[l];
            update(&mut layer.weights, mw, vw, gw, p, lr);
            update(&mut layer.bias, mb, vb, gb, p, lr);
        }
    }
}

fn update<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    p: &MlpParams,
    lr: f64,
) {
    ndarray::Zip::from(param).and(m).and(v).and(g).for_each(|w, m, v, &g| {
        *m = p.beta1 * *m + (1.0 - p.beta1) * g;
        *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
        *w -= lr * *m / (v.sqrt() + p.epsilon);
    });
}

/// Trains `input → hidden… → n_classes`. A seeded `validation_fraction` of
/// the samples is held out for early stopping; the weights with the lowest
/// validation loss are returned.
pub fn train_mlp(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, params: &MlpParams) -> Result<MlpModel> {
    params.validate()?;
    check_training_data(x, y, n_classes)?;
    let distinct = y.iter().collect::<std::collections::BTreeSet<_>>().len();
    if distinct < 2 {
        return Err(Error::param("MLP training needs at least two classes"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.shuffle(&mut rng);
    let n_val = (x.nrows() as f64 * params.validation_fraction).round() as usize;
    let n_val = if n_val >= x.nrows() { 0 } else { n_val };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_x = x.select(Axis(0), val_idx);
    let val_y: Vec<usize> = val_idx.iter().map(|&i| y[i]).collect();

    let mut model = MlpModel::init(x.ncols(), &params.hidden_layers, n_classes, rng.random());
    let mut adam = Adam::new(&model);
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..params.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(params.batch_size) {
            let bx = x.select(Axis(0), batch);
            let by: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let (loss, grads) = model.loss_and_gradients(bx.view(), &by);
            if !loss.is_finite() {
                return Err(Error::param(format!("MLP loss diverged at epoch {epoch}")));
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut model, &grads, params);
        }
        model.epochs_run = epoch + 1;
        let monitored = if n_val > 0 {
            model.loss(val_x.view(), &val_y)
        } else {
            epoch_loss / train_idx.len() as f64
        };
        if monitored < best_loss - IMPROVEMENT_TOL {
            stale = 0;
        } else {
            stale += 1;
        }
        if monitored < best_loss {
            best_loss = monitored;
            best = model.clone();
        }
        if stale >= params.patience {
            break;
        }
    }
    best.epochs_run = model.epochs_run;
    log::debug!(
        "MLP stopped after {} epochs, best monitored loss {best_loss:.5}",
        model.epochs_run
    );
    Ok(best)
}

/// Zeroes all weights and biases; the output is then uniform over classes.
pub fn zero_weights(model: &mut MlpModel) {
    for l in &mut model.layers {
        l.weights.fill(0.0);
        l.bias.fill(0.0);
    }
}
