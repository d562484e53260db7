use serde::{Deserialize, Serialize};

use super::{purity, select_som, SomSelection};
use crate::error::{invalid, Result};
use crate::features::{feature_matrix, standardize, FeatureConfig, FeatureMatrix};
use crate::medium::{noise_synthesize, NoiseComponent, NoiseSpec};
use crate::seed;
use crate::tensor::Tensor2;

/// Noise recordings of known composition pushed through the feature and
/// SOM pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseClusterConfig {
    /// One recording per class; its slots all carry the class index.
    pub classes: Vec<NoiseSpec>,
    pub slots_per_class: usize,
    pub sample_rate: f64,
    pub features: FeatureConfig,
    pub som_epochs: usize,
    pub seed: u64,
}

/// Stationary background, background plus a broadcast carrier, and
/// background plus impulsive bursts.
pub fn planted_noise_classes() -> Vec<NoiseSpec> {
    let background = NoiseComponent::Colored { level: 0.01, slope_db_per_decade: -20.0 };
    vec![
        NoiseSpec { components: vec![background.clone()], coupling: 0.6 },
        NoiseSpec { components: vec![background.clone(), NoiseComponent::Narrowband { freq: 75e3, amplitude: 0.03 }], coupling: 0.6 },
        NoiseSpec {
            components: vec![background, NoiseComponent::Impulsive { rate: 2000.0, amplitude_mean: 0.2, width_mean: 1e-5 }],
            coupling: 0.6,
        },
    ]
}

impl Default for NoiseClusterConfig {
    fn default() -> Self {
        Self {
            classes: planted_noise_classes(),
            slots_per_class: 60,
            sample_rate: 1e6,
            features: FeatureConfig::default(),
            som_epochs: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseClusterResult {
    /// Raw features, class blocks in order.
    pub features: FeatureMatrix,
    pub standardized: Tensor2,
    pub labels: Vec<usize>,
    pub selection: SomSelection,
    pub purity: f64,
}

impl NoiseClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.slots_per_class == 0 {
            return invalid("noise clustering needs at least one class and one slot per class");
        }
        if self.som_epochs == 0 {
            return invalid("som_epochs must be positive");
        }
        for c in &self.classes {
            c.validate()?;
        }
        self.features.validate(self.sample_rate)
    }
}

pub fn noise_cluster(config: &NoiseClusterConfig) -> Result<NoiseClusterResult> {
    config.validate()?;
    let duration = (config.slots_per_class * config.features.slot_len) as f64 / config.sample_rate;
    let mut parts = Vec::new();
    let mut degenerate = Vec::new();
    let mut labels = Vec::new();
    for (k, spec) in config.classes.iter().enumerate() {
        let (a, b) = noise_synthesize(spec, duration, config.sample_rate, seed::derive_indexed(config.seed, "noise-class", k as u64))?;
        let m = feature_matrix(&a, &b, &config.features)?;
        labels.extend(std::iter::repeat_n(k, m.values.rows()));
        degenerate.extend(m.degenerate);
        parts.push(m.values);
    }
    let refs: Vec<&Tensor2> = parts.iter().collect();
    let features = FeatureMatrix { values: Tensor2::vstack(&refs)?, degenerate };
    let standardized = standardize(&features.values);
    let selection = select_som(&standardized, config.som_epochs, seed::derive(config.seed, "noise-som"))?;
    let purity = purity(&selection.assignments, &labels);
    Ok(NoiseClusterResult { features, standardized, labels, selection, purity })
}
