use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::loss::{check_one_hot, Loss};
use super::model::{Gradients, MlpModel};
use crate::error::{invalid, shape_err, Error, Result};
use crate::seed::{self, Rng};
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Inverted dropout applied to the network input during training.
    pub dropout_rate: f64,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 32,
            epochs: 100,
            dropout_rate: 0.0,
            seed: 0,
            loss: Loss::Mse,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return invalid(format!("learning_rate must be non-negative, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return invalid(format!("dropout_rate must lie in [0,1), got {}", self.dropout_rate));
        }
        if self.batch_size == 0 {
            return invalid("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || self.adam_eps <= 0.0 {
            return invalid("Adam betas must lie in [0,1) and eps must be positive");
        }
        Ok(())
    }
}

/// Paired inputs and targets, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub inputs: Tensor2,
    pub targets: Tensor2,
}

impl LabeledDataset {
    pub fn new(inputs: Tensor2, targets: Tensor2) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return shape_err(format!("{} inputs vs {} targets", inputs.rows(), targets.rows()));
        }
        Ok(Self { inputs, targets })
    }

    /// Dataset with one-hot targets built from class indices.
    pub fn from_classes(inputs: Tensor2, labels: &[usize], n_classes: usize) -> Result<Self> {
        let mut t = Tensor2::zeros(labels.len(), n_classes);
        for (i, &c) in labels.iter().enumerate() {
            if c >= n_classes {
                return invalid(format!("label {c} out of range for {n_classes} classes"));
            }
            t[(i, c)] = 1.0;
        }
        Self::new(inputs, t)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self { inputs: self.inputs.select_rows(idx), targets: self.targets.select_rows(idx) }
    }
}

/// First-order optimizer with its per-parameter state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Optimizer {
    pub fn new(config: &TrainConfig, model: &MlpModel) -> Self {
        Self::with(config.optimizer, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps, model)
    }

    pub fn adam(lr: f64, model: &MlpModel) -> Self {
        Self::with(OptimizerKind::Adam, lr, 0.9, 0.999, 1e-8, model)
    }

    pub fn adam_with_betas(lr: f64, beta1: f64, beta2: f64, model: &MlpModel) -> Self {
        Self::with(OptimizerKind::Adam, lr, beta1, beta2, 1e-8, model)
    }

    pub fn sgd(lr: f64, model: &MlpModel) -> Self {
        Self::with(OptimizerKind::Sgd, lr, 0.9, 0.999, 1e-8, model)
    }

    fn with(kind: OptimizerKind, lr: f64, beta1: f64, beta2: f64, eps: f64, model: &MlpModel) -> Self {
        let z = Gradients::zeros_like(model);
        Self { kind, lr, beta1, beta2, eps, t: 0, m: z.clone(), v: z }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) {
        match self.kind {
            OptimizerKind::Sgd => {
                let mut s = grads.clone();
                for w in &mut s.weights {
                    w.scale(self.lr);
                }
                for b in &mut s.biases {
                    b.iter_mut().for_each(|v| *v *= self.lr);
                }
                model.apply_step(&s);
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - self.beta1.powi(self.t);
                let bc2 = 1.0 - self.beta2.powi(self.t);
                let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
                let update = |m: &mut [f64], v: &mut [f64], g: &[f64], p: &mut [f64]| {
                    for i in 0..g.len() {
                        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                        let mh = m[i] / bc1;
                        let vh = v[i] / bc2;
                        p[i] -= lr * mh / (vh.sqrt() + eps);
                    }
                };
                for (l, layer) in model.layers_mut().iter_mut().enumerate() {
                    update(
                        self.m.weights[l].data_mut(),
                        self.v.weights[l].data_mut(),
                        grads.weights[l].data(),
                        layer.weights.data_mut(),
                    );
                    update(&mut self.m.biases[l], &mut self.v.biases[l], &grads.biases[l], &mut layer.biases);
                }
            }
        }
    }
}

/// Inverted-dropout multipliers: each entry is 0 with probability `rate`,
/// otherwise `1/(1−rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Tensor2 {
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
    Tensor2::from_vec(rows, cols, data).expect("sized above")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Sample-weighted mean mini-batch loss of each epoch.
    pub loss: Vec<f64>,
}

/// Mini-batch training. The result depends only on the initial model, the
/// dataset and `config` (including its seed).
pub fn train(model: &mut MlpModel, data: &LabeledDataset, config: &TrainConfig) -> Result<TrainHistory> {
    config.validate()?;
    if data.is_empty() {
        return invalid("empty dataset");
    }
    if data.inputs.cols() != model.input_dim() || data.targets.cols() != model.output_dim() {
        return shape_err(format!(
            "dataset {}→{} vs model {}→{}",
            data.inputs.cols(),
            data.targets.cols(),
            model.input_dim(),
            model.output_dim()
        ));
    }
    if config.loss == Loss::CrossEntropy {
        check_one_hot(&data.targets)?;
    }
    let mut rng = seed::rng(config.seed);
    let mut opt = Optimizer::new(config, model);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let n_layers = model.layers().len();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = data.subset(chunk);
            let masks = (config.dropout_rate > 0.0).then(|| {
                let mut m: Vec<Option<Tensor2>> = vec![None; n_layers];
                m[0] = Some(dropout_mask(chunk.len(), batch.inputs.cols(), config.dropout_rate, &mut rng));
                m
            });
            let pass = model.forward(&batch.inputs, masks.as_deref())?;
            let loss = config.loss.value(pass.output(), &batch.targets)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, detail: format!("batch loss {loss}") });
            }
            total += loss * chunk.len() as f64;
            let grads = model.backward(&pass, &batch.targets, config.loss)?;
            opt.step(model, &grads);
        }
        history.push(total / n as f64);
    }
    Ok(TrainHistory { loss: history })
}
