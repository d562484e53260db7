use serde::{Deserialize, Serialize};

use crate::tensor::Tensor2;

/// Elementwise (or row-wise, for softmax) nonlinearity applied after the affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    #[serde(rename = "ReLU", alias = "Relu")]
    Relu,
    Tanh,
    Sigmoid,
    /// Row-wise softmax. Only valid on the final layer.
    Softmax,
}

impl Activation {
    pub(crate) fn apply(self, z: &mut Tensor2) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => z.data_mut().iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Sigmoid => z.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Softmax => {
                for i in 0..z.rows() {
                    softmax_in_place(z.row_mut(i));
                }
            }
        }
    }

    /// Pulls `dL/dy` back to `dL/dz`, given the activation output `y`.
    pub(crate) fn backprop(self, y: &Tensor2, grad_y: &Tensor2) -> Tensor2 {
        let mut dz = grad_y.clone();
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for (d, &o) in dz.data_mut().iter_mut().zip(y.data()) {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            Activation::Tanh => {
                for (d, &o) in dz.data_mut().iter_mut().zip(y.data()) {
                    *d *= 1.0 - o * o;
                }
            }
            Activation::Sigmoid => {
                for (d, &o) in dz.data_mut().iter_mut().zip(y.data()) {
                    *d *= o * (1.0 - o);
                }
            }
            Activation::Softmax => {
                for i in 0..y.rows() {
                    let s = y.row(i);
                    let g = grad_y.row(i);
                    let inner: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
                    for (j, d) in dz.row_mut(i).iter_mut().enumerate() {
                        *d = s[j] * (g[j] - inner);
                    }
                }
            }
        }
        dz
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

/// Fully connected layer `y = σ(W x + b)` with `W` stored out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor2,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    /// Pre-activation `x Wᵀ + b` for a batch of row vectors.
    pub(crate) fn affine(&self, x: &Tensor2) -> crate::Result<Tensor2> {
        let mut z = x.matmul_t(&self.weights)?;
        for i in 0..z.rows() {
            for (v, b) in z.row_mut(i).iter_mut().zip(&self.biases) {
                *v += b;
            }
        }
        Ok(z)
    }
}
