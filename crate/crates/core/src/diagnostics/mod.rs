//! Grid anomaly classification from high-frequency line measurements.
//!
//! A single 20-node grid is perturbed many times. Each realization records
//! one electrical signal (input admittance, reflection coefficient or
//! transfer function) at the observation node and divides its magnitude by
//! the same signal on the anomaly-free grid with the same loads. The
//! resulting ratio vectors are classified into four anomaly classes.

mod confusion;

pub use confusion::{BinaryConfusion, ConfusionMatrix};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{KnnModel, OvrSvm, SvmConfig};
use crate::error::{invalid, Error, Result};
use crate::io::fmt17;
use crate::medium::anomaly::log_uniform;
use crate::medium::{perturb, topo_random, AnomalyKind, AnomalyRanges, FrequencyGrid, Load, TlSolver, Topology, TopologyConfig, DEFAULT_Z0};
use crate::nn::{train, Activation, LabeledDataset, Loss, MlpModel, OptimizerKind, Scaler, TrainConfig};
use crate::seed;
use crate::tensor::Tensor2;

/// Anomaly classes with their fixed 1-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnomalyClass {
    Unperturbed = 1,
    LoadImpedanceChange = 2,
    ConcentratedFault = 3,
    DistributedFault = 4,
}

impl AnomalyClass {
    pub const ALL: [AnomalyClass; 4] =
        [AnomalyClass::Unperturbed, AnomalyClass::LoadImpedanceChange, AnomalyClass::ConcentratedFault, AnomalyClass::DistributedFault];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i.wrapping_sub(1)).copied()
    }

    fn anomaly_kind(self) -> Option<AnomalyKind> {
        match self {
            AnomalyClass::Unperturbed => None,
            AnomalyClass::LoadImpedanceChange => Some(AnomalyKind::LoadChange),
            AnomalyClass::ConcentratedFault => Some(AnomalyKind::ConcentratedFault),
            AnomalyClass::DistributedFault => Some(AnomalyKind::DistributedFault),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Signal {
    Yin,
    RhoIn,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadMode {
    /// Every load stays at 2 kΩ.
    Constant2kOhm,
    /// Every load is redrawn per realization from `variable_load_ohms`.
    RandomVariable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierKind {
    /// One tanh hidden layer of 100 units and a softmax output.
    Mlp100,
    SvmOvr,
    Knn,
}

/// Per-bin map applied to the ratio before standardization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InputTransform {
    Ratio,
    /// `sign(l) · ln(1 + |l| / floor)` with `l = ln(ratio)`. Deviations from
    /// one span several decades across anomaly classes; this keeps a 1e-3
    /// change visible next to a tenfold one.
    LogDeviation { floor: f64 },
}

impl Default for InputTransform {
    fn default() -> Self {
        InputTransform::LogDeviation { floor: 1e-4 }
    }
}

impl InputTransform {
    pub fn apply(self, ratio: &[f64]) -> Vec<f64> {
        match self {
            InputTransform::Ratio => ratio.to_vec(),
            InputTransform::LogDeviation { floor } => ratio
                .iter()
                .map(|r| {
                    let l = r.ln();
                    l.signum() * (l.abs() / floor).ln_1p()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagConfig {
    pub topology: TopologyConfig,
    pub n_realizations: usize,
    pub signal: Signal,
    pub load_mode: LoadMode,
    /// Log-uniform range for [`LoadMode::RandomVariable`], Ω.
    pub variable_load_ohms: (f64, f64),
    pub f_start: f64,
    pub f_stop: f64,
    pub f_spacing: f64,
    pub anomalies: AnomalyRanges,
    pub train_fraction: f64,
    pub input_transform: InputTransform,
    pub classifier: ClassifierKind,
    pub mlp_epochs: usize,
    pub mlp_learning_rate: f64,
    pub mlp_batch_size: usize,
    pub knn_k: usize,
    pub svm: SvmConfig,
    pub seed: u64,
}

impl Default for DiagConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig { n_nodes: 20, area_side: 1000.0, avg_edge_len: Some(700.0), ..Default::default() },
            n_realizations: 10_000,
            signal: Signal::RhoIn,
            load_mode: LoadMode::Constant2kOhm,
            variable_load_ohms: (100.0, 10e3),
            f_start: 4.3e3,
            f_stop: 500e3,
            f_spacing: 4.3e3,
            anomalies: AnomalyRanges::default(),
            train_fraction: 0.5,
            input_transform: InputTransform::default(),
            classifier: ClassifierKind::Mlp100,
            mlp_epochs: 150,
            mlp_learning_rate: 1e-3,
            mlp_batch_size: 64,
            knn_k: 5,
            svm: SvmConfig::default(),
            seed: 0,
        }
    }
}

impl DiagConfig {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::with_spacing(self.f_start, self.f_stop, self.f_spacing)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return invalid(format!("train_fraction must lie in (0,1), got {}", self.train_fraction));
        }
        if self.n_realizations == 0 {
            return invalid("n_realizations must be positive");
        }
        let (lo, hi) = self.variable_load_ohms;
        if !(lo > 0.0 && lo <= hi) {
            return invalid("variable_load_ohms must be positive and ordered");
        }
        if let InputTransform::LogDeviation { floor } = self.input_transform {
            if !(floor > 0.0 && floor.is_finite()) {
                return invalid("input_transform floor must be positive");
            }
        }
        if self.knn_k % 2 == 0 {
            return invalid("knn_k must be odd");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagSample {
    /// `|measured| / |reference|` per frequency bin.
    pub ratio: Vec<f64>,
    pub label: AnomalyClass,
}

#[derive(Debug, Clone)]
pub struct DiagDataset {
    pub samples: Vec<DiagSample>,
    pub grid: FrequencyGrid,
    pub base: Topology,
    /// Node where admittance and reflection are measured; also the
    /// transmitter for transfer functions.
    pub observation: usize,
    /// Realizations redrawn because the signal was not finite.
    pub resampled: usize,
}

const MAX_REDRAWS: usize = 100;

fn signal_magnitude(t: &Topology, grid: &FrequencyGrid, signal: Signal, obs: usize, rx: usize) -> Result<Vec<f64>> {
    let solver = TlSolver::new(t, grid)?;
    Ok(match signal {
        Signal::H => solver.transfer(obs, rx)?.h.iter().map(|h| h.norm()).collect(),
        Signal::Yin => solver.input_admittance(obs)?.iter().map(|y| y.norm()).collect(),
        Signal::RhoIn => {
            solver.input_admittance(obs)?.iter().map(|&y| crate::medium::reflection(y, DEFAULT_Z0).norm()).collect()
        }
    })
}

/// One realization of `class`, or `None` if the signal came out non-finite
/// or non-positive.
fn realization(cfg: &DiagConfig, base: &Topology, grid: &FrequencyGrid, obs: usize, leaves: &[usize], class: AnomalyClass, rng: &mut seed::Rng) -> Result<Option<Vec<f64>>> {
    let mut healthy = base.clone();
    if cfg.load_mode == LoadMode::RandomVariable {
        for n in &mut healthy.nodes {
            n.load = Load::resistive(log_uniform(rng, cfg.variable_load_ohms));
        }
    }
    let rx = leaves[rng.random_range(0..leaves.len())];
    let measured = match class.anomaly_kind() {
        None => healthy.clone(),
        Some(kind) => perturb(&healthy, &cfg.anomalies.draw(kind, &healthy, rng))?,
    };
    let num = signal_magnitude(&measured, grid, cfg.signal, obs, rx)?;
    let den = signal_magnitude(&healthy, grid, cfg.signal, obs, rx)?;
    let ratio: Vec<f64> = num.iter().zip(&den).map(|(a, b)| a / b).collect();
    Ok(ratio.iter().all(|r| r.is_finite() && *r > 0.0).then_some(ratio))
}

/// Balanced dataset: realization `i` belongs to class `ALL[i mod 4]`.
pub fn build_diag_dataset(cfg: &DiagConfig) -> Result<DiagDataset> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let base = topo_random(&cfg.topology, seed::derive(cfg.seed, "diag-topology"))?;
    let observation = base.hub();
    let leaves: Vec<usize> = base.leaves().into_iter().filter(|&v| v != observation).collect();
    if leaves.is_empty() {
        return invalid("the grid has no leaf to receive transfer-function probes");
    }
    let out: Vec<Result<(DiagSample, usize)>> = (0..cfg.n_realizations)
        .into_par_iter()
        .map(|i| {
            let class = AnomalyClass::ALL[i % 4];
            let mut rng = seed::rng(seed::derive_indexed(cfg.seed, "diag-realization", i as u64));
            for redraw in 0..MAX_REDRAWS {
                if let Some(ratio) = realization(cfg, &base, &grid, observation, &leaves, class, &mut rng)? {
                    return Ok((DiagSample { ratio, label: class }, redraw));
                }
            }
            Err(Error::RejectionBudget(MAX_REDRAWS))
        })
        .collect();
    let mut samples = Vec::with_capacity(cfg.n_realizations);
    let mut resampled = 0;
    for r in out {
        let (s, k) = r?;
        samples.push(s);
        resampled += k;
    }
    Ok(DiagDataset { samples, grid, base, observation, resampled })
}

impl DiagDataset {
    /// One row per realization: the ratio columns `r0…`, then `label`.
    pub fn to_csv(&self) -> String {
        let n = self.grid.n_bins;
        let mut s: String = (0..n).map(|k| format!("r{k},")).collect();
        s.push_str("label\n");
        for d in &self.samples {
            for v in &d.ratio {
                s.push_str(&fmt17(*v));
                s.push(',');
            }
            s.push_str(&format!("{}\n", d.label.index()));
        }
        s
    }

    /// Copy restricted to `classes`.
    pub fn subset(&self, classes: &[AnomalyClass]) -> Self {
        Self { samples: self.samples.iter().filter(|s| classes.contains(&s.label)).cloned().collect(), ..self.clone() }
    }
}

/// Disjoint train/test indices, split within each class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn stratified_split(labels: &[AnomalyClass], train_fraction: f64, seed: u64) -> Split {
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in AnomalyClass::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let k = (idx.len() as f64 * train_fraction).round() as usize;
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

#[derive(Debug, Clone)]
enum Inner {
    Mlp(MlpModel),
    Svm(OvrSvm),
    Knn(KnnModel),
}

/// A trained classifier over a fixed class list.
#[derive(Debug, Clone)]
pub struct DiagModel {
    pub classes: Vec<AnomalyClass>,
    pub input_transform: InputTransform,
    pub scaler: Scaler,
    inner: Inner,
}

impl DiagModel {
    pub fn kind(&self) -> ClassifierKind {
        match self.inner {
            Inner::Mlp(_) => ClassifierKind::Mlp100,
            Inner::Svm(_) => ClassifierKind::SvmOvr,
            Inner::Knn(_) => ClassifierKind::Knn,
        }
    }

    pub fn mlp(&self) -> Option<&MlpModel> {
        match &self.inner {
            Inner::Mlp(m) => Some(m),
            _ => None,
        }
    }

    pub fn predict(&self, ratio: &[f64]) -> Result<AnomalyClass> {
        let mut x = self.input_transform.apply(ratio);
        self.scaler.transform_row(&mut x);
        let k = match &self.inner {
            Inner::Mlp(m) => {
                let p = m.predict(&Tensor2::from_vec(1, x.len(), x)?)?;
                let row = p.row(0);
                (0..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b })
            }
            Inner::Svm(m) => m.predict(&x),
            Inner::Knn(m) => m.predict(&x),
        };
        Ok(self.classes[k])
    }
}

fn rows(dataset: &DiagDataset, idx: &[usize], transform: InputTransform) -> Result<Tensor2> {
    let n = dataset.grid.n_bins;
    Tensor2::from_vec(idx.len(), n, idx.iter().flat_map(|&i| transform.apply(&dataset.samples[i].ratio)).collect())
}

/// Classes present in the dataset, in index order.
pub fn classes_of(dataset: &DiagDataset) -> Vec<AnomalyClass> {
    AnomalyClass::ALL.into_iter().filter(|c| dataset.samples.iter().any(|s| s.label == *c)).collect()
}

/// Stratified split by `seed`, then fits the configured classifier on the
/// training half.
pub fn train_diag(dataset: &DiagDataset, cfg: &DiagConfig, seed: u64) -> Result<(DiagModel, Split)> {
    cfg.validate()?;
    let classes = classes_of(dataset);
    if classes.len() < 2 {
        return invalid("diagnostics needs at least two classes");
    }
    let labels: Vec<AnomalyClass> = dataset.samples.iter().map(|s| s.label).collect();
    let split = stratified_split(&labels, cfg.train_fraction, seed::derive(seed, "diag-split"));
    for c in &classes {
        if !split.train.iter().any(|&i| labels[i] == *c) {
            return invalid(format!("class {} has no training samples", c.index()));
        }
    }
    let x = rows(dataset, &split.train, cfg.input_transform)?;
    let scaler = Scaler::fit(&x);
    let x = scaler.transform(&x);
    let y: Vec<usize> = split.train.iter().map(|&i| classes.iter().position(|c| *c == labels[i]).unwrap()).collect();
    let inner = match cfg.classifier {
        ClassifierKind::Mlp100 => {
            let mut model = MlpModel::new(&[x.cols(), 100, classes.len()], &[Activation::Tanh, Activation::Softmax], seed::derive(seed, "diag-init"))?;
            let tc = TrainConfig {
                optimizer: OptimizerKind::Adam,
                learning_rate: cfg.mlp_learning_rate,
                batch_size: cfg.mlp_batch_size,
                epochs: cfg.mlp_epochs,
                seed: seed::derive(seed, "diag-train"),
                loss: Loss::CrossEntropy,
                ..Default::default()
            };
            train(&mut model, &LabeledDataset::from_classes(x, &y, classes.len())?, &tc)?;
            Inner::Mlp(model)
        }
        ClassifierKind::SvmOvr => {
            let svm = SvmConfig { seed: seed::derive(seed, "diag-svm"), ..cfg.svm.clone() };
            Inner::Svm(OvrSvm::train(&x, &y, classes.len(), &svm)?)
        }
        ClassifierKind::Knn => Inner::Knn(KnnModel::new(x, y, cfg.knn_k)?),
    };
    Ok((DiagModel { classes, input_transform: cfg.input_transform, scaler, inner }, split))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagEvaluation {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: Vec<(AnomalyClass, f64)>,
    /// Unperturbed versus any anomaly, from the same predictions.
    pub detection_accuracy: f64,
}

pub fn evaluate_diag(model: &DiagModel, dataset: &DiagDataset, indices: &[usize]) -> Result<DiagEvaluation> {
    let preds: Vec<(AnomalyClass, AnomalyClass)> = indices
        .par_iter()
        .map(|&i| Ok((dataset.samples[i].label, model.predict(&dataset.samples[i].ratio)?)))
        .collect::<Result<_>>()?;
    Ok(evaluation(ConfusionMatrix::from_pairs(&model.classes, &preds)?))
}

fn evaluation(confusion: ConfusionMatrix) -> DiagEvaluation {
    DiagEvaluation {
        accuracy: confusion.accuracy(),
        per_class: confusion.classes.iter().copied().zip(confusion.per_class_accuracy()).collect(),
        detection_accuracy: confusion.detection().accuracy(),
        confusion,
    }
}

/// Restricts the dataset to `classes`, retrains and evaluates on the test half.
pub fn class_subset_experiment(dataset: &DiagDataset, classes: &[AnomalyClass], cfg: &DiagConfig, seed: u64) -> Result<DiagEvaluation> {
    let mut wanted: Vec<AnomalyClass> = classes.to_vec();
    wanted.sort();
    wanted.dedup();
    if wanted.len() < 2 {
        return invalid("a class subset needs at least two classes");
    }
    let sub = dataset.subset(&wanted);
    let (model, split) = train_diag(&sub, cfg, seed)?;
    evaluate_diag(&model, &sub, &split.test)
}

/// Accuracies for one load mode, laid out like the detection table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagTableRow {
    pub load_mode: LoadMode,
    pub fault_detection: f64,
    pub all_classes: f64,
    pub three_classes: f64,
}

/// Plain-text table with one row per load mode and the columns
/// fault detection, all 4 classes, 3 classes (percent).
pub fn summary_table(rows: &[DiagTableRow]) -> String {
    let mut s = format!("{:<22}{:>18}{:>16}{:>12}\n", "Load impedances", "Fault Detection", "All 4 Classes", "3 Classes");
    for r in rows {
        let mode = match r.load_mode {
            LoadMode::Constant2kOhm => "Constant (2 kOhm)",
            LoadMode::RandomVariable => "Variable",
        };
        s.push_str(&format!(
            "{:<22}{:>17.1}%{:>15.1}%{:>11.1}%\n",
            mode,
            100.0 * r.fault_detection,
            100.0 * r.all_classes,
            100.0 * r.three_classes
        ));
    }
    s
}
