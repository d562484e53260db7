//! End-to-end learned physical layer.
//!
//! An encoder maps a one-hot message to `n` real channel symbols, a power
//! normalisation fixes the average energy, a channel layer applies an FIR
//! response plus Gaussian noise, and a softmax decoder recovers the message.
//! All four stages are differentiable, so encoder and decoder train jointly
//! on cross-entropy.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::io::{csv_row, fmt17};
use crate::medium::ChannelResponse;
use crate::nn::{Activation, Gradients, MlpModel, Optimizer};
use crate::seed::{self, Rng};
use crate::tensor::Tensor2;

/// Power constraint applied to the encoder output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Mean squared entry over the whole block equals 1.
    AvgPower,
    /// Every row has squared norm `n`.
    PerSymbolEnergy,
}

pub fn normalize(x: &Tensor2, rule: Normalization) -> Result<Tensor2> {
    let mut y = x.clone();
    match rule {
        Normalization::AvgPower => {
            let ms = x.data().iter().map(|v| v * v).sum::<f64>() / x.data().len() as f64;
            if !(ms > 0.0) {
                return Err(Error::Numerical("zero-energy block cannot be normalised".into()));
            }
            y.scale(1.0 / ms.sqrt());
        }
        Normalization::PerSymbolEnergy => {
            let n = x.cols() as f64;
            for i in 0..y.rows() {
                let e = y.row(i).iter().map(|v| v * v).sum::<f64>();
                if !(e > 0.0) {
                    return Err(Error::Numerical(format!("row {i} has zero energy")));
                }
                let s = (n / e).sqrt();
                y.row_mut(i).iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    Ok(y)
}

/// `dL/dx` given the raw block `x`, its normalised image `y` and `dL/dy`.
pub fn normalize_backward(x: &Tensor2, y: &Tensor2, grad: &Tensor2, rule: Normalization) -> Tensor2 {
    let mut out = grad.clone();
    match rule {
        Normalization::AvgPower => {
            let ne = x.data().len() as f64;
            let s = (x.data().iter().map(|v| v * v).sum::<f64>() / ne).sqrt();
            let gy: f64 = grad.data().iter().zip(y.data()).map(|(g, v)| g * v).sum::<f64>() / ne;
            out.data_mut().iter_mut().zip(y.data()).for_each(|(g, v)| *g = (*g - v * gy) / s);
        }
        Normalization::PerSymbolEnergy => {
            let n = x.cols() as f64;
            for i in 0..x.rows() {
                let norm = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                let gy: f64 = grad.row(i).iter().zip(y.row(i)).map(|(g, v)| g * v).sum::<f64>() / n;
                let c = n.sqrt() / norm;
                out.row_mut(i).iter_mut().zip(y.row(i)).for_each(|(g, v)| *g = c * (*g - v * gy));
            }
        }
    }
    out
}

/// Causal FIR over each row, truncated to the row length, plus i.i.d.
/// Gaussian noise.
pub fn channel_layer(x: &Tensor2, taps: &[f64], noise_std: f64, rng: &mut Rng) -> Tensor2 {
    let mut y = Tensor2::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let (xi, yi) = (x.row(i), y.row_mut(i));
        for (t, out) in yi.iter_mut().enumerate() {
            *out = (0..=t.min(taps.len() - 1)).map(|k| taps[k] * xi[t - k]).sum();
        }
        if noise_std > 0.0 {
            yi.iter_mut().for_each(|v| *v += noise_std * rng.sample::<f64, _>(StandardNormal));
        }
    }
    y
}

/// `dL/dx` of [`channel_layer`]: correlation of the upstream gradient with the taps.
pub fn channel_backward(grad: &Tensor2, taps: &[f64]) -> Tensor2 {
    let n = grad.cols();
    let mut dx = Tensor2::zeros(grad.rows(), n);
    for i in 0..grad.rows() {
        let (g, d) = (grad.row(i), dx.row_mut(i));
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = (j..n).take_while(|t| t - j < taps.len()).map(|t| g[t] * taps[t - j]).sum();
        }
    }
    dx
}

/// Real `n`-tap FIR from a sampled frequency response: the first `n` samples
/// of its inverse DFT (real part), scaled to unit energy.
pub fn taps_from_response(h: &ChannelResponse, n: usize) -> Result<Vec<f64>> {
    let mut buf = h.h.iter().map(|c| rustfft::num_complex::Complex::new(c.re, c.im)).collect::<Vec<_>>();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    let mut taps: Vec<f64> = buf.iter().take(n).map(|c| c.re).collect();
    let e = taps.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(e > 0.0) {
        return invalid("channel response has no energy in its first taps");
    }
    taps.iter_mut().for_each(|v| *v /= e);
    Ok(taps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeConfig {
    /// Message cardinality, a power of two.
    pub m: usize,
    /// Real channel uses per message.
    pub n: usize,
    pub hidden: Vec<usize>,
    /// FIR taps; `None` is the AWGN channel.
    pub taps: Option<Vec<f64>>,
    pub normalization: Normalization,
    pub train_ebn0_db: f64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self {
            m: 4,
            n: 1,
            hidden: vec![32],
            taps: None,
            normalization: Normalization::AvgPower,
            train_ebn0_db: 8.0,
            epochs: 60,
            steps_per_epoch: 50,
            batch_size: 256,
            learning_rate: 5e-3,
            seed: 0,
        }
    }
}

impl AeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || !self.m.is_power_of_two() {
            return invalid(format!("m must be a power of two >= 2, got {}", self.m));
        }
        if self.n == 0 || self.batch_size == 0 || self.hidden.contains(&0) {
            return invalid("n, batch_size and hidden widths must be positive");
        }
        if let Some(t) = &self.taps {
            if t.is_empty() || t.iter().any(|v| !v.is_finite()) {
                return invalid("taps must be a non-empty finite vector");
            }
        }
        if !(self.learning_rate >= 0.0) || !self.train_ebn0_db.is_finite() {
            return invalid("learning_rate must be non-negative and train_ebn0_db finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeSystem {
    pub encoder: MlpModel,
    pub decoder: MlpModel,
    pub taps: Vec<f64>,
    pub normalization: Normalization,
    /// Mean cross-entropy per epoch.
    pub loss_history: Vec<f64>,
}

pub fn bits_per_message(m: usize) -> f64 {
    (m as f64).log2()
}

/// Per-dimension noise deviation `√(Es / (2·log₂M·Eb/N0))`.
pub fn noise_std_for(es: f64, m: usize, ebn0_db: f64) -> f64 {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    (es / (2.0 * bits_per_message(m) * ebn0)).sqrt()
}


impl AeSystem {
    pub fn new(config: &AeConfig) -> Result<Self> {
        config.validate()?;
        let (m, n) = (config.m, config.n);
        let mut enc_dims = vec![m];
        enc_dims.extend(&config.hidden);
        enc_dims.push(n);
        let mut dec_dims = vec![n];
        dec_dims.extend(&config.hidden);
        dec_dims.push(m);
        let h = config.hidden.len();
        let enc_act: Vec<Activation> = (0..=h).map(|l| if l < h { Activation::Relu } else { Activation::Identity }).collect();
        let dec_act: Vec<Activation> = (0..=h).map(|l| if l < h { Activation::Relu } else { Activation::Softmax }).collect();
        Ok(Self {
            encoder: MlpModel::new(&enc_dims, &enc_act, seed::derive(config.seed, "encoder"))?,
            decoder: MlpModel::new(&dec_dims, &dec_act, seed::derive(config.seed, "decoder"))?,
            taps: config.taps.clone().unwrap_or_else(|| vec![1.0]),
            normalization: config.normalization,
            loss_history: Vec::new(),
        })
    }

    pub fn m(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn n(&self) -> usize {
        self.encoder.output_dim()
    }

    /// Normalised transmit symbol of every message, `M × n`.
    pub fn constellation(&self) -> Result<Tensor2> {
        normalize(&self.encoder.predict(&Tensor2::identity(self.m()))?, self.normalization)
    }

    /// Mean transmitted energy per message.
    pub fn symbol_energy(&self) -> Result<f64> {
        let c = self.constellation()?;
        Ok(c.data().iter().map(|v| v * v).sum::<f64>() / c.rows() as f64)
    }

    /// Mean cross-entropy and the gradients of encoder and decoder for one
    /// batch of messages with the given channel noise realisation.
    pub fn loss_and_grads(&self, messages: &[usize], noise: &Tensor2) -> Result<(f64, Gradients, Gradients)> {
        let m = self.m();
        let enc_pass = self.encoder.forward(&Tensor2::identity(m), None)?;
        let raw = enc_pass.output();
        let cons = normalize(raw, self.normalization)?;
        let x = cons.select_rows(messages);
        let mut y = channel_layer(&x, &self.taps, 0.0, &mut seed::rng(0));
        y.data_mut().iter_mut().zip(noise.data()).for_each(|(v, e)| *v += e);
        let dec_pass = self.decoder.forward(&y, None)?;
        let p = dec_pass.output();
        let b = messages.len() as f64;
        let mut loss = 0.0;
        let mut dz = p.clone();
        for (i, &c) in messages.iter().enumerate() {
            loss -= p[(i, c)].max(crate::nn::PROB_FLOOR).ln();
            dz.row_mut(i)[c] -= 1.0;
        }
        dz.scale(1.0 / b);
        let (g_dec, dy) = self.decoder.backward_from_preactivation(&dec_pass, dz)?;
        let dx = channel_backward(&dy, &self.taps);
        let mut dcons = Tensor2::zeros(m, self.n());
        for (i, &c) in messages.iter().enumerate() {
            dcons.row_mut(c).iter_mut().zip(dx.row(i)).for_each(|(a, v)| *a += v);
        }
        let draw = normalize_backward(raw, &cons, &dcons, self.normalization);
        let (g_enc, _) = self.encoder.backward_from_output_grad(&enc_pass, &draw)?;
        Ok((loss / b, g_enc, g_dec))
    }

    /// Decoded message for each received row.
    pub fn decode(&self, received: &Tensor2) -> Result<Vec<usize>> {
        let p = self.decoder.predict(received)?;
        Ok(p.iter_rows()
            .map(|r| (0..r.len()).fold(0, |best, c| if r[c] > r[best] { c } else { best }))
            .collect())
    }

    /// `M` rows of `n` coordinates.
    pub fn constellation_csv(&self) -> Result<String> {
        let c = self.constellation()?;
        let mut out = (0..self.n()).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",");
        out = format!("message,{out}\n");
        for (i, r) in c.iter_rows().enumerate() {
            out.push_str(&format!("{i},{}\n", csv_row(r)));
        }
        Ok(out)
    }
}

/// Trains encoder and decoder jointly at `train_ebn0_db` with Adam.
pub fn ae_train(config: &AeConfig) -> Result<AeSystem> {
    let mut sys = AeSystem::new(config)?;
    let mut rng = seed::rng(seed::derive(config.seed, "ae-train"));
    let mut opt_e = Optimizer::adam(config.learning_rate, &sys.encoder);
    let mut opt_d = Optimizer::adam(config.learning_rate, &sys.decoder);
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for _ in 0..config.steps_per_epoch {
            let msgs: Vec<usize> = (0..config.batch_size).map(|_| rng.random_range(0..config.m)).collect();
            let std = noise_std_for(sys.symbol_energy()?, config.m, config.train_ebn0_db);
            let noise: Vec<f64> = (0..config.batch_size * config.n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
            let noise = Tensor2::from_vec(config.batch_size, config.n, noise)?;
            let (loss, ge, gd) = sys.loss_and_grads(&msgs, &noise)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, detail: format!("cross-entropy {loss}") });
            }
            total += loss;
            opt_e.step(&mut sys.encoder, &ge);
            opt_d.step(&mut sys.decoder, &gd);
        }
        sys.loss_history.push(total / config.steps_per_epoch.max(1) as f64);
    }
    Ok(sys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerCurve {
    pub ebn0_db: Vec<f64>,
    pub ser: Vec<f64>,
    pub trials: usize,
}

/// Monte-Carlo symbol error rate at each Eb/N0, points evaluated in parallel
/// with independent derived seeds. `f64::INFINITY` means a noiseless channel.
pub fn evaluate_ser(sys: &AeSystem, ebn0_db: &[f64], trials: usize, seed: u64) -> Result<SerCurve> {
    let cons = sys.constellation()?;
    let es = sys.symbol_energy()?;
    let m = sys.m();
    let ser = ebn0_db
        .par_iter()
        .enumerate()
        .map(|(k, &db)| -> Result<f64> {
            let mut rng = seed::rng(seed::derive_indexed(seed, "ser-point", k as u64));
            let std = if db.is_infinite() { 0.0 } else { noise_std_for(es, m, db) };
            let mut errors = 0usize;
            let chunk = 4096;
            let mut done = 0;
            while done < trials {
                let b = chunk.min(trials - done);
                let msgs: Vec<usize> = (0..b).map(|_| rng.random_range(0..m)).collect();
                let y = channel_layer(&cons.select_rows(&msgs), &sys.taps, std, &mut rng);
                errors += sys.decode(&y)?.iter().zip(&msgs).filter(|(a, b)| a != b).count();
                done += b;
            }
            Ok(errors as f64 / trials as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SerCurve { ebn0_db: ebn0_db.to_vec(), ser, trials })
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Matched-filter M-PAM symbol error rate on AWGN.
pub fn pam_ser_analytic(m: usize, ebn0_db: f64) -> f64 {
    let mf = m as f64;
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    2.0 * (mf - 1.0) / mf * q_function((6.0 * mf.log2() / (mf * mf - 1.0) * ebn0).sqrt())
}

/// Eb/N0 (dB) at which analytic M-PAM reaches `target` SER, by bisection.
pub fn pam_required_ebn0(m: usize, target: f64) -> f64 {
    let (mut lo, mut hi) = (-20.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pam_ser_analytic(m, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First crossing of `target` along the curve, interpolating log SER
/// linearly in dB; `None` when the curve never brackets it.
pub fn required_ebn0(curve: &SerCurve, target: f64) -> Option<f64> {
    let lt = target.ln();
    for k in 1..curve.ser.len() {
        let (s0, s1) = (curve.ser[k - 1], curve.ser[k]);
        if s0 >= target && s1 < target {
            let (x0, x1) = (curve.ebn0_db[k - 1], curve.ebn0_db[k]);
            if s1 <= 0.0 {
                return Some(x1);
            }
            let (l0, l1) = (s0.ln(), s1.ln());
            return Some(x0 + (lt - l0) * (x1 - x0) / (l1 - l0));
        }
    }
    None
}

impl SerCurve {
    /// `ebn0_db,ser_autoencoder,ser_pam_analytic,trials`.
    pub fn to_csv(&self, m: usize) -> String {
        let mut out = String::from("ebn0_db,ser_autoencoder,ser_pam_analytic,trials\n");
        for (db, s) in self.ebn0_db.iter().zip(&self.ser) {
            out.push_str(&format!("{},{},{},{}\n", fmt17(*db), fmt17(*s), fmt17(pam_ser_analytic(m, *db)), self.trials));
        }
        out
    }
}
