use crate::error::{invalid, Result};

/// Sampled voltage on one conductor pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Volts.
    pub samples: Vec<f64>,
    /// Hz.
    pub sample_rate: f64,
}

impl Trace {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return invalid("trace has no samples");
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return invalid(format!("sample rate must be positive, got {sample_rate}"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}
