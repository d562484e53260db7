use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed;
use crate::tensor::{dot, sq_dist, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    /// `exp(−‖x−y‖²/σ²)`.
    Rbf { sigma: f64 },
}

pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    (-sq_dist(x, y) / (sigma * sigma)).exp()
}

impl Kernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(x, y),
            Kernel::Rbf { sigma } => rbf_kernel(x, y, sigma),
        }
    }
}

/// Median Euclidean distance over all sample pairs, or over a fixed stride
/// subsample of at most 1500 rows for larger sets.
pub fn median_heuristic(data: &Tensor2) -> f64 {
    let n = data.rows();
    let stride = n.div_ceil(1500).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut d = Vec::with_capacity(idx.len() * idx.len() / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d.push(sq_dist(data.row(i), data.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub c: f64,
    pub tolerance: f64,
    /// `None` selects RBF with the median-heuristic width.
    pub kernel: Option<Kernel>,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 10.0, tolerance: 1e-3, kernel: None, seed: 0 }
    }
}

/// Binary kernel SVM keeping only the support vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Tensor2,
    pub alphas: Vec<f64>,
    /// ±1.
    pub labels: Vec<f64>,
    pub bias: f64,
    pub kernel: Kernel,
    pub c_penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub model: SvmModel,
    /// Multipliers for every training sample, in input order.
    pub all_alphas: Vec<f64>,
    /// Dual objective after each pass over the data.
    pub dual_history: Vec<f64>,
    /// False when the pass budget ran out before the KKT conditions held.
    pub converged: bool,
}

/// `W(α) = Σα − ½ ΣΣ αᵢαⱼyᵢyⱼK(xᵢ,xⱼ)`.
pub fn dual_objective(data: &Tensor2, y: &[f64], alphas: &[f64], kernel: Kernel) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alphas[j] != 0.0 {
                quad += alphas[i] * alphas[j] * y[i] * y[j] * kernel.eval(data.row(i), data.row(j));
            }
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Sequential minimal optimisation on the dual. Each violator of the KKT
/// conditions is paired with a random partner; if that pair cannot move, the
/// remaining partners are tried in cyclic order from the random start. Stops
/// after a pass with no violators, a pass in which nothing could move, or
/// `10·N` passes.
pub fn svm_train(data: &Tensor2, labels: &[f64], config: &SvmConfig) -> Result<SvmFit> {
    let n = data.rows();
    if n < 2 || labels.len() != n {
        return invalid("need at least two labelled samples");
    }
    if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
        return invalid("labels must be ±1");
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return invalid("both classes must be present");
    }
    if !(config.c > 0.0 && config.tolerance > 0.0) {
        return invalid("C and tolerance must be positive");
    }
    let kernel = config.kernel.unwrap_or_else(|| Kernel::Rbf { sigma: median_heuristic(data) });
    if let Kernel::Rbf { sigma } = kernel {
        if !(sigma > 0.0) {
            return invalid("RBF width must be positive");
        }
    }
    let (c, tol) = (config.c, config.tolerance);
    let y = labels;
    let k = |i: usize, j: usize| kernel.eval(data.row(i), data.row(j));
    let diag: Vec<f64> = (0..n).map(|i| k(i, i)).collect();
    let mut alpha = vec![0.0; n];
    let mut b = 0.0;
    // err[i] = f(xᵢ) − yᵢ with f(x) = Σ αⱼyⱼK(xⱼ,x) + b
    let mut err: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut rng = seed::rng(config.seed);
    let mut history = Vec::new();
    let mut converged = false;
    let dual = |alpha: &[f64], err: &[f64], b: f64| -> f64 {
        // Σαᵢ − ½ Σ αᵢyᵢ(f(xᵢ) − b)
        let s: f64 = alpha.iter().sum();
        s - 0.5 * (0..n).map(|i| alpha[i] * y[i] * (err[i] + y[i] - b)).sum::<f64>()
    };

    let try_pair = |i: usize, j: usize, alpha: &mut [f64], err: &mut [f64], b: &mut f64| -> bool {
        if i == j {
            return false;
        }
        let (ai, aj) = (alpha[i], alpha[j]);
        let (lo, hi) = if y[i] != y[j] { ((aj - ai).max(0.0), (c + aj - ai).min(c)) } else { ((ai + aj - c).max(0.0), (ai + aj).min(c)) };
        if hi - lo < 1e-12 * c {
            return false;
        }
        let kij = k(i, j);
        let eta = diag[i] + diag[j] - 2.0 * kij;
        if !(eta > 1e-12) {
            return false;
        }
        let mut aj_new = (aj + y[j] * (err[i] - err[j]) / eta).clamp(lo, hi);
        if hi - aj_new < 1e-12 * c {
            aj_new = hi;
        } else if aj_new - lo < 1e-12 * c {
            aj_new = lo;
        }
        if (aj_new - aj).abs() < 1e-12 * (aj + aj_new + 1e-12) {
            return false;
        }
        let ai_new = ai + y[i] * y[j] * (aj - aj_new);
        let (di, dj) = ((ai_new - ai) * y[i], (aj_new - aj) * y[j]);
        let b1 = *b - err[i] - di * diag[i] - dj * kij;
        let b2 = *b - err[j] - di * kij - dj * diag[j];
        let b_new = if ai_new > 0.0 && ai_new < c {
            b1
        } else if aj_new > 0.0 && aj_new < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        for t in 0..n {
            err[t] += di * k(i, t) + dj * k(j, t) + (b_new - *b);
        }
        *b = b_new;
        alpha[i] = ai_new.clamp(0.0, c);
        alpha[j] = aj_new;
        true
    };

    for _pass in 0..10 * n {
        let (mut violators, mut moved) = (0, 0);
        for i in 0..n {
            let r = err[i] * y[i];
            if !((r < -tol && alpha[i] < c) || (r > tol && alpha[i] > 0.0)) {
                continue;
            }
            violators += 1;
            let start = rng.random_range(0..n);
            for off in 0..n {
                if try_pair(i, (start + off) % n, &mut alpha, &mut err, &mut b) {
                    moved += 1;
                    break;
                }
            }
        }
        history.push(dual(&alpha, &err, b));
        if violators == 0 {
            converged = true;
            break;
        }
        if moved == 0 {
            // violators remain but no pair can make progress
            break;
        }
    }

    // Refit the threshold on the free multipliers.
    let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > 1e-9 * c && alpha[i] < c * (1.0 - 1e-9)).collect();
    let b_final = if free.is_empty() {
        b
    } else {
        free.iter().map(|&i| y[i] - (err[i] + y[i] - b)).sum::<f64>() / free.len() as f64
    };
    let sv: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
    let model = SvmModel {
        support_vectors: data.select_rows(&sv),
        alphas: sv.iter().map(|&i| alpha[i]).collect(),
        labels: sv.iter().map(|&i| y[i]).collect(),
        bias: b_final,
        kernel,
        c_penalty: c,
    };
    Ok(SvmFit { model, all_alphas: alpha, dual_history: history, converged })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvmDoc {
    alphas: Vec<f64>,
    labels: Vec<f64>,
    support_vectors: Vec<Vec<f64>>,
    bias: f64,
    kernel: String,
    sigma: Option<f64>,
    #[serde(rename = "C")]
    c: f64,
}

impl SvmModel {
    /// `f(x) = b + Σ αᵢyᵢK(xᵢ, x)`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias
            + self
                .support_vectors
                .iter_rows()
                .zip(self.alphas.iter().zip(&self.labels))
                .map(|(s, (a, l))| a * l * self.kernel.eval(s, x))
                .sum::<f64>()
    }

    /// Class ±1 with zero mapped to +1, plus the decision value.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let f = self.decision(x);
        (if f >= 0.0 { 1.0 } else { -1.0 }, f)
    }

    pub fn to_json(&self) -> String {
        let (kernel, sigma) = match self.kernel {
            Kernel::Linear => ("linear".to_string(), None),
            Kernel::Rbf { sigma } => ("rbf".to_string(), Some(sigma)),
        };
        let doc = SvmDoc {
            alphas: self.alphas.clone(),
            labels: self.labels.clone(),
            support_vectors: self.support_vectors.iter_rows().map(<[f64]>::to_vec).collect(),
            bias: self.bias,
            kernel,
            sigma,
            c: self.c_penalty,
        };
        serde_json::to_string_pretty(&doc).expect("plain data serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: SvmDoc = serde_json::from_str(text)?;
        let kernel = match (d.kernel.as_str(), d.sigma) {
            ("linear", _) => Kernel::Linear,
            ("rbf", Some(sigma)) if sigma > 0.0 => Kernel::Rbf { sigma },
            (k, s) => return invalid(format!("unsupported kernel {k} with sigma {s:?}")),
        };
        if d.alphas.len() != d.labels.len() || d.alphas.len() != d.support_vectors.len() {
            return invalid("alphas, labels and support_vectors differ in length");
        }
        let dim = d.support_vectors.first().map_or(0, Vec::len);
        let support_vectors = Tensor2::from_vec(d.support_vectors.len(), dim, d.support_vectors.concat())?;
        Ok(Self { support_vectors, alphas: d.alphas, labels: d.labels, bias: d.bias, kernel, c_penalty: d.c })
    }
}
