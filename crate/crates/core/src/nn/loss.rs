use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor2;

/// Probabilities are clamped to this floor before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    /// Squared error summed over outputs, averaged over the batch.
    Mse,
    /// `−Σ y log ŷ` averaged over the batch; targets must be one-hot.
    CrossEntropy,
}

fn check_shapes(pred: &Tensor2, targets: &Tensor2) -> Result<()> {
    if pred.shape() != targets.shape() {
        return Err(Error::Shape(format!(
            "predictions {:?} vs targets {:?}",
            pred.shape(),
            targets.shape()
        )));
    }
    Ok(())
}

/// Fails unless every row is a one-hot indicator.
pub fn check_one_hot(targets: &Tensor2) -> Result<()> {
    for (i, row) in targets.iter_rows().enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::Contract(format!("target row {i} is not one-hot")));
        }
    }
    Ok(())
}

impl Loss {
    pub fn value(self, pred: &Tensor2, targets: &Tensor2) -> Result<f64> {
        check_shapes(pred, targets)?;
        let n = pred.rows().max(1) as f64;
        match self {
            Loss::Mse => {
                let s: f64 = pred.data().iter().zip(targets.data()).map(|(p, t)| (p - t) * (p - t)).sum();
                Ok(s / n)
            }
            Loss::CrossEntropy => {
                check_one_hot(targets)?;
                let s: f64 = pred
                    .data()
                    .iter()
                    .zip(targets.data())
                    .filter(|(_, &t)| t != 0.0)
                    .map(|(&p, &t)| -t * p.clamp(PROB_FLOOR, 1.0).ln())
                    .sum();
                Ok(s / n)
            }
        }
    }

    /// `dL/dŷ` for the batch-mean loss.
    pub fn output_grad(self, pred: &Tensor2, targets: &Tensor2) -> Result<Tensor2> {
        check_shapes(pred, targets)?;
        let n = pred.rows().max(1) as f64;
        let mut g = Tensor2::zeros(pred.rows(), pred.cols());
        for ((gv, &p), &t) in g.data_mut().iter_mut().zip(pred.data()).zip(targets.data()) {
            *gv = match self {
                Loss::Mse => 2.0 * (p - t) / n,
                Loss::CrossEntropy => {
                    if t == 0.0 || p < PROB_FLOOR {
                        0.0
                    } else {
                        -t / (p * n)
                    }
                }
            };
        }
        Ok(g)
    }
}
