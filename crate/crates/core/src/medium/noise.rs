//! Synthetic two-channel PLC noise.
//!
//! Each component is rendered twice from independent streams, `a` and `b`.
//! Channel 1 receives `a`; channel 2 receives `c·a + √(1−c²)·b` where `c` is
//! the coupling coefficient, so `c = 1` makes the channels identical.

use rand::Rng as _;
use rand_distr::{Distribution, Exp, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::{self, Rng};
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum NoiseComponent {
    /// Gaussian background whose PSD falls by `slope_db_per_decade`; `level`
    /// is the RMS voltage.
    Colored { level: f64, slope_db_per_decade: f64 },
    /// Sinusoidal interferer, e.g. a broadcast carrier.
    Narrowband { freq: f64, amplitude: f64 },
    /// Gaussian bursts synchronous with the mains: active for the first
    /// `duty` fraction of every half mains period, RMS `level` while active.
    Cyclostationary { mains_period: f64, duty: f64, level: f64 },
    /// Poisson impulses at `rate` per second with exponentially distributed
    /// peak amplitude and decay time, random polarity.
    Impulsive { rate: f64, amplitude_mean: f64, width_mean: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub components: Vec<NoiseComponent>,
    /// Shared fraction between the two channels, in `[0, 1]`.
    pub coupling: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.coupling) {
            return invalid(format!("coupling must lie in [0,1], got {}", self.coupling));
        }
        for c in &self.components {
            let ok = match *c {
                NoiseComponent::Colored { level, slope_db_per_decade } => level >= 0.0 && slope_db_per_decade.is_finite(),
                NoiseComponent::Narrowband { freq, amplitude } => freq >= 0.0 && amplitude >= 0.0,
                NoiseComponent::Cyclostationary { mains_period, duty, level } => {
                    mains_period > 0.0 && (0.0..=1.0).contains(&duty) && level >= 0.0
                }
                NoiseComponent::Impulsive { rate, amplitude_mean, width_mean } => {
                    rate >= 0.0 && amplitude_mean >= 0.0 && width_mean > 0.0
                }
            };
            if !ok {
                return invalid(format!("invalid noise component {c:?}"));
            }
        }
        Ok(())
    }
}

fn gaussian(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Unit-RMS Gaussian noise with a power-law PSD, shaped in the frequency domain.
fn colored(n: usize, slope_db_per_decade: f64, rng: &mut Rng) -> Vec<f64> {
    let white = gaussian(n, rng);
    if slope_db_per_decade == 0.0 {
        return white;
    }
    let mut buf: Vec<Complex<f64>> = white.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    // amplitude ∝ f^(slope/20) turns into a PSD slope of `slope` dB per decade
    let exponent = slope_db_per_decade / 20.0;
    for (k, v) in buf.iter_mut().enumerate() {
        let kk = k.min(n - k);
        if kk == 0 {
            *v = Complex::new(0.0, 0.0);
        } else {
            *v *= (kk as f64).powf(exponent);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let out: Vec<f64> = buf.iter().map(|v| v.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        out.iter().map(|v| v / rms).collect()
    } else {
        out
    }
}

fn render(component: &NoiseComponent, n: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    match *component {
        NoiseComponent::Colored { level, slope_db_per_decade } => {
            colored(n, slope_db_per_decade, rng).into_iter().map(|v| v * level).collect()
        }
        NoiseComponent::Narrowband { freq, amplitude } => {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            (0..n).map(|i| amplitude * (std::f64::consts::TAU * freq * i as f64 / rate + phase).sin()).collect()
        }
        NoiseComponent::Cyclostationary { mains_period, duty, level } => {
            let half = mains_period / 2.0;
            let offset = rng.random::<f64>() * half;
            gaussian(n, rng)
                .into_iter()
                .enumerate()
                .map(|(i, g)| {
                    let t = i as f64 / rate + offset;
                    if (t % half) / half < duty {
                        g * level
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        NoiseComponent::Impulsive { rate: lambda, amplitude_mean, width_mean } => {
            let mut out = vec![0.0; n];
            if lambda <= 0.0 || amplitude_mean <= 0.0 {
                return out;
            }
            let gap = Exp::new(lambda).expect("positive rate");
            let amp = Exp::new(1.0 / amplitude_mean).expect("positive mean");
            let width = Exp::new(1.0 / width_mean).expect("positive mean");
            let mut t = gap.sample(rng);
            let duration = n as f64 / rate;
            while t < duration {
                let a: f64 = amp.sample(rng) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                let tau = (width.sample(rng) as f64).max(1.0 / rate);
                let start = (t * rate) as usize;
                let end = (start + (5.0 * tau * rate).ceil() as usize).min(n);
                for (i, o) in out.iter_mut().enumerate().take(end).skip(start) {
                    *o += a * (-((i - start) as f64) / (tau * rate)).exp();
                }
                t += gap.sample(rng);
            }
            out
        }
    }
}

/// Renders `duration` seconds of two-channel noise at `sample_rate`.
pub fn noise_synthesize(spec: &NoiseSpec, duration: f64, sample_rate: f64, seed: u64) -> Result<(Trace, Trace)> {
    spec.validate()?;
    if !(sample_rate > 0.0) {
        return invalid("sample rate must be positive");
    }
    let n = (duration * sample_rate).round() as usize;
    if n == 0 {
        return invalid("duration shorter than one sample");
    }
    let mut ch1 = vec![0.0; n];
    let mut ch2 = vec![0.0; n];
    let c = spec.coupling;
    let s = (1.0 - c * c).max(0.0).sqrt();
    for (i, comp) in spec.components.iter().enumerate() {
        let a = render(comp, n, sample_rate, &mut seed::rng(seed::derive_indexed(seed, "noise-shared", i as u64)));
        let b = render(comp, n, sample_rate, &mut seed::rng(seed::derive_indexed(seed, "noise-own", i as u64)));
        for j in 0..n {
            ch1[j] += a[j];
            ch2[j] += c * a[j] + s * b[j];
        }
    }
    Ok((Trace::new(ch1, sample_rate)?, Trace::new(ch2, sample_rate)?))
}
