use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layer::{Activation, DenseLayer};
use super::loss::Loss;
use crate::error::{invalid, shape_err, Error, Result};
use crate::seed;
use crate::tensor::Tensor2;

/// Feed-forward stack of dense layers. Serializes as a [`ModelDoc`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelDoc", try_from = "ModelDoc")]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
}

/// Everything the backward pass needs from a forward pass.
///
/// `inputs[l]` is what layer `l` actually consumed (after dropout), and
/// `outputs[l]` its post-activation result. `masks[l]` holds the inverted
/// dropout multipliers applied to `inputs[l]`, if any.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub inputs: Vec<Tensor2>,
    pub outputs: Vec<Tensor2>,
    pub masks: Vec<Option<Tensor2>>,
}

impl ForwardPass {
    pub fn output(&self) -> &Tensor2 {
        self.outputs.last().expect("model has at least one layer")
    }
}

/// Parameter-shaped container used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Tensor2>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.layers.iter().map(|l| Tensor2::zeros(l.weights.rows(), l.weights.cols())).collect(),
            biases: model.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend_from_slice(w.data());
            v.extend_from_slice(b);
        }
        v
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.data_mut().iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.flat().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl MlpModel {
    /// Glorot-uniform weights and zero biases. `dims` lists the input width
    /// followed by each layer's width; `activations` has one entry per layer.
    pub fn new(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return invalid(format!(
                "{} widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            ));
        }
        let mut rng = seed::rng(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect();
                DenseLayer {
                    weights: Tensor2::from_vec(fan_out, fan_in, data).expect("sized above"),
                    biases: vec![0.0; fan_out],
                    activation,
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return invalid("model needs at least one layer");
        }
        for (i, l) in layers.iter().enumerate() {
            if l.biases.len() != l.output_dim() {
                return shape_err(format!("layer {i}: {} biases for {} outputs", l.biases.len(), l.output_dim()));
            }
            if i > 0 && layers[i - 1].output_dim() != l.input_dim() {
                return shape_err(format!(
                    "layer {i} expects {} inputs but layer {} emits {}",
                    l.input_dim(),
                    i - 1,
                    layers[i - 1].output_dim()
                ));
            }
            if l.activation == Activation::Softmax && i + 1 != layers.len() {
                return Err(Error::Contract(format!("softmax on non-final layer {i}")));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.data().len() + l.biases.len()).sum()
    }

    pub fn final_activation(&self) -> Activation {
        self.layers.last().unwrap().activation
    }

    /// Runs the batch through every layer, keeping intermediates for backprop.
    pub fn forward(&self, batch: &Tensor2, masks: Option<&[Option<Tensor2>]>) -> Result<ForwardPass> {
        if batch.cols() != self.input_dim() {
            return shape_err(format!("batch has {} columns, model expects {}", batch.cols(), self.input_dim()));
        }
        if let Some(m) = masks {
            if m.len() != self.layers.len() {
                return shape_err(format!("{} dropout masks for {} layers", m.len(), self.layers.len()));
            }
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut kept = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mask = masks.and_then(|m| m[l].clone());
            if let Some(mk) = &mask {
                if mk.shape() != x.shape() {
                    return shape_err(format!("dropout mask {:?} on input {:?}", mk.shape(), x.shape()));
                }
                x.data_mut().iter_mut().zip(mk.data()).for_each(|(v, s)| *v *= s);
            }
            let mut z = layer.affine(&x)?;
            layer.activation.apply(&mut z);
            inputs.push(x);
            kept.push(mask);
            x = z.clone();
            outputs.push(z);
        }
        Ok(ForwardPass { inputs, outputs, masks: kept })
    }

    /// Inference-time output.
    pub fn predict(&self, batch: &Tensor2) -> Result<Tensor2> {
        let mut x = batch.clone();
        if x.cols() != self.input_dim() {
            return shape_err(format!("batch has {} columns, model expects {}", x.cols(), self.input_dim()));
        }
        for layer in &self.layers {
            let mut z = layer.affine(&x)?;
            layer.activation.apply(&mut z);
            x = z;
        }
        Ok(x)
    }

    /// Backpropagates an arbitrary upstream gradient `dL/d(output)`.
    /// Returns the parameter gradients and `dL/d(input)`.
    pub fn backward_from_output_grad(&self, pass: &ForwardPass, grad_out: &Tensor2) -> Result<(Gradients, Tensor2)> {
        let last = self.layers.len() - 1;
        let dz = self.layers[last].activation.backprop(&pass.outputs[last], grad_out);
        self.backward_from_preactivation(pass, dz)
    }

    /// Backpropagates `dL/dz` of the final layer's pre-activation.
    pub fn backward_from_preactivation(&self, pass: &ForwardPass, mut dz: Tensor2) -> Result<(Gradients, Tensor2)> {
        if dz.shape() != pass.output().shape() {
            return shape_err(format!("upstream gradient {:?} vs output {:?}", dz.shape(), pass.output().shape()));
        }
        let mut grads = Gradients::zeros_like(self);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            grads.weights[l] = dz.t_matmul(&pass.inputs[l])?;
            for row in dz.iter_rows() {
                for (gb, v) in grads.biases[l].iter_mut().zip(row) {
                    *gb += v;
                }
            }
            let mut dx = dz.matmul(&layer.weights)?;
            if let Some(mask) = &pass.masks[l] {
                dx.data_mut().iter_mut().zip(mask.data()).for_each(|(v, s)| *v *= s);
            }
            if l == 0 {
                return Ok((grads, dx));
            }
            dz = self.layers[l - 1].activation.backprop(&pass.outputs[l - 1], &dx);
        }
        unreachable!("loop returns at layer 0")
    }

    /// Gradient of the batch-mean `loss` with respect to every parameter.
    pub fn backward(&self, pass: &ForwardPass, targets: &Tensor2, loss: Loss) -> Result<Gradients> {
        let pred = pass.output();
        if pred.shape() != targets.shape() {
            return shape_err(format!("targets {:?} vs output {:?}", targets.shape(), pred.shape()));
        }
        if loss == Loss::CrossEntropy && self.final_activation() == Activation::Softmax {
            super::loss::check_one_hot(targets)?;
            // softmax and cross-entropy fuse to (ŷ − y)/N
            let n = pred.rows().max(1) as f64;
            let mut dz = pred.clone();
            dz.data_mut().iter_mut().zip(targets.data()).for_each(|(p, t)| *p = (*p - t) / n);
            return Ok(self.backward_from_preactivation(pass, dz)?.0);
        }
        let g = loss.output_grad(pred, targets)?;
        Ok(self.backward_from_output_grad(pass, &g)?.0)
    }

    /// Visits every parameter in the same order as [`Gradients::flat`].
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut k = 0;
        for layer in &mut self.layers {
            for w in layer.weights.data_mut() {
                f(k, w);
                k += 1;
            }
            for b in &mut layer.biases {
                f(k, b);
                k += 1;
            }
        }
    }

    /// Mutable access to the `k`-th parameter in [`Gradients::flat`] order.
    pub fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let nw = layer.weights.data().len();
            if k < nw {
                return &mut layer.weights.data_mut()[k];
            }
            k -= nw;
            if k < layer.biases.len() {
                return &mut layer.biases[k];
            }
            k -= layer.biases.len();
        }
        panic!("parameter index out of range")
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend_from_slice(l.weights.data());
            v.extend_from_slice(&l.biases);
        }
        v
    }

    /// Applies `param -= step` for a gradient-shaped step.
    pub fn apply_step(&mut self, step: &Gradients) {
        for ((layer, sw), sb) in self.layers.iter_mut().zip(&step.weights).zip(&step.biases) {
            layer.weights.data_mut().iter_mut().zip(sw.data()).for_each(|(p, s)| *p -= s);
            layer.biases.iter_mut().zip(sb).for_each(|(p, s)| *p -= s);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDoc::from(self)).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// On-disk model layout: `{layers: [{rows, cols, weights, biases, activation}]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub layers: Vec<LayerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl From<MlpModel> for ModelDoc {
    fn from(m: MlpModel) -> Self {
        Self::from(&m)
    }
}

impl From<&MlpModel> for ModelDoc {
    fn from(m: &MlpModel) -> Self {
        Self {
            layers: m
                .layers
                .iter()
                .map(|l| LayerDoc {
                    rows: l.weights.rows(),
                    cols: l.weights.cols(),
                    weights: l.weights.data().to_vec(),
                    biases: l.biases.clone(),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelDoc> for MlpModel {
    type Error = Error;
    fn try_from(doc: ModelDoc) -> Result<Self> {
        let layers = doc
            .layers
            .into_iter()
            .map(|l| {
                Ok(DenseLayer {
                    weights: Tensor2::from_vec(l.rows, l.cols, l.weights)?,
                    biases: l.biases,
                    activation: l.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MlpModel::from_layers(layers)
    }
}
