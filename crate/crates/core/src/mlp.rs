//! Minimal feedforward network trained by mini-batch SGD.
//!
//! ReLU hidden layers, identity output, squared-error or
//! softmax-cross-entropy loss, seeded initialization and shuffling so every
//! training run is reproducible bit for bit. Kept deliberately small: the
//! crate only needs it as the nonlinear regressor for the pretext task and
//! the supervised baselines.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    /// Mean over the batch of the squared row error.
    SquaredError,
    /// Softmax over the output row against a target distribution
    /// (rows of the target matrix must sum to 1).
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Input, hidden..., output widths. Hidden layers use ReLU; the output
    /// layer is linear (logits under the cross-entropy loss). Two entries
    /// mean no hidden layer: a plain linear map, the convex special case.
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: Loss,
    pub seed: u64,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "layer_sizes needs at least input and output widths".into(),
            ));
        }
        if self.layer_sizes.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated nonempty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// `weights[l]` is `layer_sizes[l] x layer_sizes[l+1]`: it maps layer-l
    /// activations (rows) forward by right-multiplication.
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub config: MlpConfig,
}

/// A trained model together with the per-epoch mean training loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub loss_curve: Vec<f64>,
}

impl MlpModel {
    /// Seeded He-uniform weights (limit sqrt(6/fan_in), matched to the ReLU
    /// hidden layers), zero biases.
    pub fn init(config: MlpConfig) -> Result<MlpModel> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in config.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            weights.push(Matrix::from_fn(fan_in, fan_out, |_, _| {
                rng.gen::<f64>() * 2.0 * limit - limit
            }));
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpModel { weights, biases, config })
    }

    pub fn from_parameters(
        config: MlpConfig,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
    ) -> Result<MlpModel> {
        config.validate()?;
        let layers = config.layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::DimensionMismatch(format!(
                "{} weight and {} bias blocks for {layers} layers",
                weights.len(),
                biases.len()
            )));
        }
        for l in 0..layers {
            let (fan_in, fan_out) = (config.layer_sizes[l], config.layer_sizes[l + 1]);
            if weights[l].rows() != fan_in || weights[l].cols() != fan_out {
                return Err(Error::DimensionMismatch(format!(
                    "weights[{l}] is {}x{}, expected {fan_in}x{fan_out}",
                    weights[l].rows(),
                    weights[l].cols()
                )));
            }
            if biases[l].len() != fan_out {
                return Err(Error::DimensionMismatch(format!("biases[{l}] length")));
            }
            if !weights[l].is_finite() || !biases[l].iter().all(|b| b.is_finite()) {
                return Err(Error::NonFinite(format!("layer {l} parameters")));
            }
        }
        Ok(MlpModel { weights, biases, config })
    }

    /// Forward pass on a batch (rows are samples).
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        Ok(self.forward(inputs)?.pop().expect("at least the input block"))
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_rows(&[x.to_vec()])?;
        Ok(self.predict(&m)?.row(0).to_vec())
    }

    /// Activations of every layer, input first, output last.
    fn forward(&self, inputs: &Matrix) -> Result<Vec<Matrix>> {
        if inputs.cols() != self.config.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} input columns, net expects {}",
                inputs.cols(),
                self.config.input_dim()
            )));
        }
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(inputs.clone());
        for l in 0..layers {
            let mut z = acts[l].dot(&self.weights[l]);
            for i in 0..z.rows() {
                let row = z.row_mut(i);
                for (v, b) in row.iter_mut().zip(&self.biases[l]) {
                    *v += b;
                }
            }
            if l + 1 < layers {
                for i in 0..z.rows() {
                    for v in z.row_mut(i) {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }
            acts.push(z);
        }
        Ok(acts)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<MlpModel> {
        let raw: MlpModel = serde_json::from_str(text)?;
        MlpModel::from_parameters(raw.config, raw.weights, raw.biases)
    }
}

// ─── loss and gradients ───

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}

/// Batch loss and its gradient at the output layer.
fn loss_and_output_grad(loss: Loss, outputs: &Matrix, targets: &Matrix) -> (f64, Matrix) {
    let b = outputs.rows() as f64;
    match loss {
        Loss::SquaredError => {
            let gap = outputs.sub(targets);
            let f = gap.frobenius_norm();
            (f * f / b, gap.scale(2.0 / b))
        }
        Loss::SoftmaxCrossEntropy => {
            let probs = softmax_rows(outputs);
            let mut total = 0.0;
            for i in 0..outputs.rows() {
                for j in 0..outputs.cols() {
                    let t = targets[(i, j)];
                    if t != 0.0 {
                        total -= t * probs[(i, j)].ln();
                    }
                }
            }
            (total / b, probs.sub(targets).scale(1.0 / b))
        }
    }
}

/// Full-batch loss and analytic parameter gradients by backpropagation.
pub fn gradients(
    model: &MlpModel,
    inputs: &Matrix,
    targets: &Matrix,
) -> Result<(f64, Vec<Matrix>, Vec<Vec<f64>>)> {
    if targets.rows() != inputs.rows() || targets.cols() != model.config.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "targets {}x{} against {} inputs and output width {}",
            targets.rows(),
            targets.cols(),
            inputs.rows(),
            model.config.output_dim()
        )));
    }
    let acts = model.forward(inputs)?;
    let layers = model.weights.len();
    let (loss, mut delta) = loss_and_output_grad(model.config.loss, &acts[layers], targets);

    let mut d_weights = vec![Matrix::zeros(0, 0); layers];
    let mut d_biases = vec![Vec::new(); layers];
    for l in (0..layers).rev() {
        d_weights[l] = acts[l].transpose().dot(&delta);
        d_biases[l] = delta.col_means().iter().map(|m| m * delta.rows() as f64).collect();
        if l > 0 {
            let mut back = delta.dot(&model.weights[l].transpose());
            // ReLU gate: the stored activation is zero exactly where the
            // pre-activation was clipped.
            for i in 0..back.rows() {
                let gate = acts[l].row(i);
                let row = back.row_mut(i);
                for (v, &g) in row.iter_mut().zip(gate) {
                    if g <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
            delta = back;
        }
    }
    Ok((loss, d_weights, d_biases))
}

// ─── training ───

/// Mini-batch SGD with seeded shuffling each epoch. The returned curve holds
/// the per-epoch mean training loss (weighted by batch size). Divergence to
/// a non-finite loss aborts with a diagnostic.
pub fn train(config: MlpConfig, inputs: &Matrix, targets: &Matrix) -> Result<TrainOutcome> {
    let mut model = MlpModel::init(config)?;
    let n = inputs.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if targets.rows() != n || targets.cols() != model.config.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "targets {}x{} against {} inputs and output width {}",
            targets.rows(),
            targets.cols(),
            n,
            model.config.output_dim()
        )));
    }
    // The init consumed part of the seed stream; continue it for shuffling.
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(model.config.epochs);
    let lr = model.config.learning_rate;
    let d = inputs.cols();
    let m = targets.cols();
    for epoch in 0..model.config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(model.config.batch_size) {
            let xb = Matrix::from_fn(chunk.len(), d, |i, j| inputs[(chunk[i], j)]);
            let yb = Matrix::from_fn(chunk.len(), m, |i, j| targets[(chunk[i], j)]);
            let (loss, d_w, d_b) = gradients(&model, &xb, &yb)?;
            epoch_loss += loss * chunk.len() as f64;
            for l in 0..model.weights.len() {
                model.weights[l] = model.weights[l].sub(&d_w[l].scale(lr));
                for (b, g) in model.biases[l].iter_mut().zip(&d_b[l]) {
                    *b -= lr * g;
                }
            }
        }
        epoch_loss /= n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "training diverged at epoch {epoch}: loss = {epoch_loss}"
            )));
        }
        curve.push(epoch_loss);
    }
    for (l, w) in model.weights.iter().enumerate() {
        if !w.is_finite() || !model.biases[l].iter().all(|b| b.is_finite()) {
            return Err(Error::Numerical(format!("non-finite parameters in layer {l}")));
        }
    }
    Ok(TrainOutcome { model, loss_curve: curve })
}

/// Compares analytic gradients to central finite differences (step `1e-5`)
/// at the seeded initialization; returns the max relative error over all
/// parameters. Relative scale is floored at `1e-3` so near-zero gradient
/// pairs compare absolutely.
pub fn grad_check(config: MlpConfig, inputs: &Matrix, targets: &Matrix) -> Result<f64> {
    let model = MlpModel::init(config)?;
    let (_, d_w, d_b) = gradients(&model, inputs, targets)?;
    let h = 1e-5;
    let mut worst = 0.0_f64;
    let mut check = |analytic: f64, numeric: f64| {
        let denom = analytic.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max((analytic - numeric).abs() / denom);
    };
    let loss_at = |m: &MlpModel| -> Result<f64> {
        let out = m.predict(inputs)?;
        Ok(loss_and_output_grad(m.config.loss, &out, targets).0)
    };
    for l in 0..model.weights.len() {
        for r in 0..model.weights[l].rows() {
            for c in 0..model.weights[l].cols() {
                let mut plus = model.clone();
                plus.weights[l][(r, c)] += h;
                let mut minus = model.clone();
                minus.weights[l][(r, c)] -= h;
                let numeric = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
                check(d_w[l][(r, c)], numeric);
            }
        }
        for k in 0..model.biases[l].len() {
            let mut plus = model.clone();
            plus.biases[l][k] += h;
            let mut minus = model.clone();
            minus.biases[l][k] -= h;
            let numeric = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
            check(d_b[l][k], numeric);
        }
    }
    Ok(worst)
}

// ─── tests ───
