//! Kernel support vector machines trained by SMO, and k-nearest neighbours.

mod knn;
mod svm;

pub use knn::KnnModel;
pub use svm::{dual_objective, median_heuristic, rbf_kernel, svm_train, Kernel, SvmConfig, SvmFit, SvmModel};

use crate::error::{invalid, Result};
use crate::tensor::Tensor2;

/// One-vs-rest multiclass SVM; predicts the class with the largest decision value.
#[derive(Debug, Clone, PartialEq)]
pub struct OvrSvm {
    pub models: Vec<SvmModel>,
    /// False if any binary problem hit its pass budget.
    pub converged: bool,
}

impl OvrSvm {
    /// All binary machines share one kernel; a missing width is resolved by
    /// the median heuristic on the full training set.
    pub fn train(data: &Tensor2, labels: &[usize], n_classes: usize, config: &SvmConfig) -> Result<Self> {
        if n_classes < 2 || labels.iter().any(|&l| l >= n_classes) {
            return invalid("labels must lie in 0..n_classes with n_classes >= 2");
        }
        let kernel = config.kernel.unwrap_or_else(|| Kernel::Rbf { sigma: median_heuristic(data) });
        let mut models = Vec::with_capacity(n_classes);
        let mut converged = true;
        for c in 0..n_classes {
            let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            let cfg = SvmConfig { kernel: Some(kernel), seed: crate::seed::derive_indexed(config.seed, "ovr", c as u64), ..config.clone() };
            let fit = svm_train(data, &y, &cfg)?;
            converged &= fit.converged;
            models.push(fit.model);
        }
        Ok(Self { models, converged })
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let scores: Vec<f64> = self.models.iter().map(|m| m.decision(x)).collect();
        (0..scores.len()).fold(0, |best, c| if scores[c] > scores[best] { c } else { best })
    }
}
