use serde::{Deserialize, Serialize};

use crate::tensor::Tensor2;

/// Per-column affine map to zero mean and unit (sample) standard deviation,
/// fitted once and reused on unseen rows. Constant columns map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(m: &Tensor2) -> Self {
        let mean = m.column_means();
        let n = m.rows() as f64;
        let std = (0..m.cols())
            .map(|j| (m.iter_rows().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt())
            .collect();
        Self { mean, std }
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = if *s > 0.0 { (*v - m) / s } else { 0.0 };
        }
    }

    pub fn transform(&self, m: &Tensor2) -> Tensor2 {
        let mut out = m.clone();
        for i in 0..out.rows() {
            self.transform_row(out.row_mut(i));
        }
        out
    }
}
