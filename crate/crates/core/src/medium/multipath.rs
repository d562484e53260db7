use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grid::{ChannelResponse, FrequencyGrid};
use crate::error::{invalid, Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: f64,
    /// Metres.
    pub length: f64,
}

/// Echo-model parameters: `H(f) = Σ gᵢ e^{−(a0 + a1 f^k) dᵢ} e^{−j2πf dᵢ/v}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathParams {
    pub paths: Vec<Path>,
    pub a0: f64,
    pub a1: f64,
    pub k: f64,
    /// Propagation speed, m/s.
    pub v: f64,
}

impl MultipathParams {
    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return invalid("multipath model needs at least one path");
        }
        if !(self.v > 0.0) {
            return invalid("propagation speed must be positive");
        }
        if self.paths.iter().any(|p| !(p.length > 0.0)) {
            return invalid("path lengths must be positive");
        }
        Ok(())
    }
}

pub fn topdown_channel(params: &MultipathParams, grid: &FrequencyGrid) -> Result<ChannelResponse> {
    params.validate()?;
    grid.validate()?;
    let h = grid
        .freqs()
        .into_iter()
        .map(|f| {
            let att = params.a0 + params.a1 * f.powf(params.k);
            params
                .paths
                .iter()
                .map(|p| {
                    let phase = -2.0 * std::f64::consts::PI * f * p.length / params.v;
                    Complex64::from_polar(p.gain * (-att * p.length).exp(), phase)
                })
                .sum()
        })
        .collect();
    Ok(ChannelResponse { grid: *grid, h })
}

/// Ranges for [`random_multipath`].
///
/// The band-averaged gain of each draw is Gaussian in dB (log-normal in
/// linear units); draws whose magnitude leaves `[min_db, max_db]` on the
/// grid are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultipathConfig {
    pub grid: FrequencyGrid,
    pub min_paths: usize,
    pub max_paths: usize,
    /// Shortest (direct) path length range, m.
    pub first_path_m: (f64, f64),
    /// Extra length of each further echo over the previous one, m.
    pub echo_step_m: (f64, f64),
    /// Relative magnitude range of the echoes.
    pub echo_gain: (f64, f64),
    /// Echo magnitudes are scaled down until their sum is at most this
    /// fraction of the direct path.
    pub echo_budget: f64,
    pub a0: f64,
    pub a1: (f64, f64),
    pub k: f64,
    pub v: (f64, f64),
    pub mean_gain_db: f64,
    pub std_gain_db: f64,
    pub min_db: f64,
    pub max_db: f64,
    pub max_draws: usize,
}

impl Default for MultipathConfig {
    fn default() -> Self {
        Self {
            grid: FrequencyGrid::broadband(256),
            min_paths: 3,
            max_paths: 10,
            first_path_m: (10.0, 50.0),
            echo_step_m: (3.0, 40.0),
            echo_gain: (0.05, 0.5),
            echo_budget: 0.8,
            a0: 0.0,
            a1: (1e-10, 6e-10),
            k: 1.0,
            v: (1.5e8, 2.0e8),
            mean_gain_db: -45.0,
            std_gain_db: 6.0,
            min_db: -90.0,
            max_db: -10.0,
            max_draws: 1000,
        }
    }
}

impl MultipathConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let ordered = |r: (f64, f64)| r.0 <= r.1;
        if self.min_paths == 0 || self.min_paths > self.max_paths {
            return invalid("path count range must be non-empty and positive");
        }
        if !(self.first_path_m.0 > 0.0) || !ordered(self.first_path_m) || !ordered(self.echo_step_m) {
            return invalid("path length ranges must be positive and ordered");
        }
        if !ordered(self.echo_gain) || !ordered(self.a1) || !ordered(self.v) || !(self.v.0 > 0.0) {
            return invalid("gain, attenuation and speed ranges must be ordered");
        }
        if !(self.min_db < self.max_db) || !(self.std_gain_db >= 0.0) {
            return invalid("dB bounds must be ordered and the gain spread non-negative");
        }
        Ok(())
    }
}

/// Draws one echo model whose response stays within the configured dB window.
pub fn random_multipath(seed: u64, config: &MultipathConfig) -> Result<MultipathParams> {
    config.validate()?;
    let mut rng = seed::rng(seed);
    let gain_db = Normal::new(config.mean_gain_db, config.std_gain_db).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let uni = |rng: &mut seed::Rng, r: (f64, f64)| if r.0 == r.1 { r.0 } else { rng.random_range(r.0..r.1) };
    for _ in 0..config.max_draws {
        let n_paths = rng.random_range(config.min_paths..=config.max_paths);
        let mut length = uni(&mut rng, config.first_path_m);
        let mut paths = vec![Path { gain: 1.0, length }];
        for _ in 1..n_paths {
            length += uni(&mut rng, config.echo_step_m);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            paths.push(Path { gain: sign * uni(&mut rng, config.echo_gain), length });
        }
        let echo_sum: f64 = paths[1..].iter().map(|p| p.gain.abs()).sum();
        if echo_sum > config.echo_budget {
            let s = config.echo_budget / echo_sum;
            paths[1..].iter_mut().for_each(|p| p.gain *= s);
        }
        let mut params = MultipathParams {
            paths,
            a0: config.a0,
            a1: uni(&mut rng, config.a1),
            k: config.k,
            v: uni(&mut rng, config.v),
        };
        let target_db = gain_db.sample(&mut rng);
        let h = topdown_channel(&params, &config.grid)?;
        let s = 10f64.powf((target_db - h.average_gain_db()) / 20.0);
        params.paths.iter_mut().for_each(|p| p.gain *= s);
        let db = topdown_channel(&params, &config.grid)?.magnitude_db();
        if db.iter().all(|&v| v >= config.min_db && v <= config.max_db) {
            return Ok(params);
        }
    }
    Err(Error::RejectionBudget(config.max_draws))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(gain: f64, length: f64, a0: f64, a1: f64) -> MultipathParams {
        MultipathParams { paths: vec![Path { gain, length }], a0, a1, k: 1.0, v: 2e8 }
    }

    #[test]
    fn lossless_single_path_has_unit_gain() {
        let h = topdown_channel(&single(1.0, 30.0, 0.0, 0.0), &FrequencyGrid::broadband(32)).unwrap();
        assert!(h.h.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn frequency_flat_attenuation() {
        let h = topdown_channel(&single(1.0, 40.0, 0.01, 0.0), &FrequencyGrid::broadband(32)).unwrap();
        let expect = (-0.4f64).exp();
        assert!(h.h.iter().all(|v| (v.norm() - expect).abs() < 1e-12));
    }

    #[test]
    fn two_equal_paths_cancel_at_half_wave_offset() {
        let v = 2e8;
        let f0 = 20e6;
        let d1 = 30.0;
        let d2 = d1 + v / (2.0 * f0);
        let p = MultipathParams { paths: vec![Path { gain: 1.0, length: d1 }, Path { gain: 1.0, length: d2 }], a0: 0.0, a1: 0.0, k: 1.0, v };
        let grid = FrequencyGrid::new(10e6, 30e6, 201).unwrap();
        let h = topdown_channel(&p, &grid).unwrap();
        let (kmin, _) = h.h.iter().enumerate().min_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
        assert!((grid.freq(kmin) - f0).abs() < 1e-3);
        assert!(h.h[kmin].norm() < 1e-9);
    }

    #[test]
    fn random_draws_are_reproducible_and_bounded() {
        let cfg = MultipathConfig::default();
        let a = random_multipath(5, &cfg).unwrap();
        assert_eq!(a, random_multipath(5, &cfg).unwrap());
        let db = topdown_channel(&a, &cfg.grid).unwrap().magnitude_db();
        assert!(db.iter().all(|&v| (-90.0..=-10.0).contains(&v)));
    }

    #[test]
    fn impossible_window_exhausts_the_budget() {
        let cfg = MultipathConfig { min_db: -11.0, max_db: -10.0, max_draws: 20, ..Default::default() };
        assert!(matches!(random_multipath(1, &cfg), Err(Error::RejectionBudget(20))));
    }
}
