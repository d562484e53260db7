use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniformly spaced frequency points `f_start, f_start+Δf, …, f_stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub f_start: f64,
    pub f_stop: f64,
    pub n_bins: usize,
}

impl FrequencyGrid {
    pub fn new(f_start: f64, f_stop: f64, n_bins: usize) -> Result<Self> {
        let g = Self { f_start, f_stop, n_bins };
        g.validate()?;
        Ok(g)
    }

    /// Grid starting at `f_start` with step `spacing`, as many points as fit
    /// below or at `f_max`.
    pub fn with_spacing(f_start: f64, f_max: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return invalid("spacing must be positive");
        }
        // tolerate representation error on exact multiples
        let n = ((f_max - f_start) / spacing + 1e-9).floor() as usize + 1;
        Self::new(f_start, f_start + (n - 1) as f64 * spacing, n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_start > 0.0 && self.f_stop > self.f_start && self.f_stop.is_finite()) {
            return invalid(format!("grid needs 0 < f_start < f_stop, got {}..{}", self.f_start, self.f_stop));
        }
        if self.n_bins < 2 {
            return invalid("grid needs at least two bins");
        }
        Ok(())
    }

    /// Bin width, which is also the spacing between points.
    pub fn spacing(&self) -> f64 {
        (self.f_stop - self.f_start) / (self.n_bins - 1) as f64
    }

    pub fn freq(&self, k: usize) -> f64 {
        self.f_start + k as f64 * self.spacing()
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n_bins).map(|k| self.freq(k)).collect()
    }

    /// 2–86 MHz broadband grid.
    pub fn broadband(n_bins: usize) -> Self {
        Self { f_start: 2e6, f_stop: 86e6, n_bins }
    }
}

/// Complex voltage transfer function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResponse {
    pub grid: FrequencyGrid,
    pub h: Vec<Complex64>,
}

impl ChannelResponse {
    pub fn magnitude_db(&self) -> Vec<f64> {
        self.h.iter().map(|h| 20.0 * h.norm().log10()).collect()
    }

    pub fn power_gains(&self) -> Vec<f64> {
        self.h.iter().map(|h| h.norm_sqr()).collect()
    }

    /// `10 log10` of the band-averaged power gain.
    pub fn average_gain_db(&self) -> f64 {
        let m = self.power_gains().iter().sum::<f64>() / self.h.len() as f64;
        10.0 * m.log10()
    }

    /// CSV with columns `freq_hz,re,im,mag_db`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,re,im,mag_db\n");
        for (k, h) in self.h.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{}\n",
                crate::io::fmt17(self.grid.freq(k)),
                crate::io::fmt17(h.re),
                crate::io::fmt17(h.im),
                crate::io::fmt17(20.0 * h.norm().log10())
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostic_band_has_116_points() {
        let g = FrequencyGrid::with_spacing(4.3e3, 500e3, 4.3e3).unwrap();
        assert_eq!(g.n_bins, 116);
        assert!((g.spacing() - 4.3e3).abs() < 1e-6);
    }

    #[test]
    fn rejects_inverted_band() {
        assert!(FrequencyGrid::new(5.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::new(1.0, 5.0, 1).is_err());
    }
}
