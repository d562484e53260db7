//! Generative adversarial network for channel magnitude responses.
//!
//! Responses live in dB. Training maps the corpus range affinely onto
//! `[−1, 1]`; the generator ends in `tanh`, so every generated value lies
//! inside the corpus range after the inverse map.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::{csv_row, fmt17};
use crate::medium::{random_multipath, topdown_channel, FrequencyGrid, MultipathConfig};
use crate::nn::{Activation, Gradients, MlpModel, Optimizer};
use crate::seed;
use crate::tensor::Tensor2;

/// Magnitude responses in dB, one channel per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCorpus {
    pub responses: Tensor2,
    pub grid: FrequencyGrid,
}

impl ChannelCorpus {
    pub fn len(&self) -> usize {
        self.responses.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.rows() == 0
    }

    /// `n` independent echo-model channels, draw `i` seeded by
    /// `derive_indexed(seed, "corpus", i)`.
    pub fn synthesize(n: usize, config: &MultipathConfig, seed: u64) -> Result<Self> {
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                let p = random_multipath(seed::derive_indexed(seed, "corpus", i as u64), config)?;
                Ok(topdown_channel(&p, &config.grid)?.magnitude_db())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self { responses: Tensor2::from_rows(&rows)?, grid: config.grid })
    }

    pub fn to_csv(&self) -> String {
        responses_csv(&self.responses, &self.grid)
    }

    /// Per-bin sample mean and standard deviation.
    pub fn bin_stats(&self) -> (Vec<f64>, Vec<f64>) {
        bin_stats(&self.responses)
    }
}

/// Header of bin centre frequencies, one row per channel.
pub fn responses_csv(rows: &Tensor2, grid: &FrequencyGrid) -> String {
    let header: Vec<String> = grid.freqs().into_iter().map(fmt17).collect();
    let mut out = header.join(",");
    out.push('\n');
    for r in rows.iter_rows() {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

pub fn bin_stats(rows: &Tensor2) -> (Vec<f64>, Vec<f64>) {
    let mean = rows.column_means();
    let n = rows.rows() as f64;
    let std = (0..rows.cols())
        .map(|j| (rows.iter_rows().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt())
        .collect();
    (mean, std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    /// Adam first-moment decay for both networks.
    pub beta1: f64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            generator_hidden: vec![64, 64],
            discriminator_hidden: vec![64],
            epochs: 1500,
            batch_size: 64,
            lr_generator: 2e-4,
            lr_discriminator: 2e-4,
            beta1: 0.5,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.batch_size == 0 {
            return invalid("latent_dim and batch_size must be positive");
        }
        if self.generator_hidden.contains(&0) || self.discriminator_hidden.contains(&0) {
            return invalid("hidden widths must be positive");
        }
        if !(self.lr_generator >= 0.0 && self.lr_discriminator >= 0.0) {
            return invalid("learning rates must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return invalid("beta1 must lie in [0,1)");
        }
        Ok(())
    }
}

/// Generator, discriminator and the dB range used for the affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct Gan {
    pub generator: MlpModel,
    pub discriminator: MlpModel,
    pub db_min: f64,
    pub db_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanHistory {
    pub d_loss: Vec<f64>,
    pub g_loss: Vec<f64>,
    /// Set when a final generated batch had almost no spread.
    pub mode_collapse: bool,
}

fn stack(dims_in: usize, hidden: &[usize], out: usize, head: Activation) -> (Vec<usize>, Vec<Activation>) {
    let mut dims = vec![dims_in];
    dims.extend(hidden);
    dims.push(out);
    let acts = (0..=hidden.len()).map(|l| if l < hidden.len() { Activation::Relu } else { head }).collect();
    (dims, acts)
}

impl Gan {
    pub fn new(n_bins: usize, db_min: f64, db_max: f64, config: &GanConfig) -> Result<Self> {
        config.validate()?;
        if !(db_min < db_max) {
            return invalid("dB range must be non-empty");
        }
        let (gd, ga) = stack(config.latent_dim, &config.generator_hidden, n_bins, Activation::Tanh);
        let (dd, da) = stack(n_bins, &config.discriminator_hidden, 1, Activation::Sigmoid);
        Ok(Self {
            generator: MlpModel::new(&gd, &ga, seed::derive(config.seed, "generator"))?,
            discriminator: MlpModel::new(&dd, &da, seed::derive(config.seed, "discriminator"))?,
            db_min,
            db_max,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.input_dim()
    }

    pub fn to_unit(&self, db: &Tensor2) -> Tensor2 {
        let (c, h) = (0.5 * (self.db_max + self.db_min), 0.5 * (self.db_max - self.db_min));
        db.map(|v| (v - c) / h)
    }

    pub fn to_db(&self, unit: &Tensor2) -> Tensor2 {
        let (c, h) = (0.5 * (self.db_max + self.db_min), 0.5 * (self.db_max - self.db_min));
        unit.map(|v| (c + h * v).clamp(self.db_min, self.db_max))
    }

    /// `n` generated responses in dB.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Tensor2> {
        let z = latent(n, self.latent_dim(), &mut seed::rng(seed));
        Ok(self.to_db(&self.generator.predict(&z)?))
    }

    /// Gradients of the non-saturating generator loss `−mean log D(G(z))`
    /// with the discriminator held fixed.
    pub fn generator_grads(&self, z: &Tensor2) -> Result<(f64, Gradients)> {
        let gp = self.generator.forward(z, None)?;
        let dp = self.discriminator.forward(gp.output(), None)?;
        let b = z.rows() as f64;
        let loss = -dp.output().data().iter().map(|p| p.max(crate::nn::PROB_FLOOR).ln()).sum::<f64>() / b;
        let dz = dp.output().map(|p| (p - 1.0) / b);
        let (_, dfake) = self.discriminator.backward_from_preactivation(&dp, dz)?;
        let (g, _) = self.generator.backward_from_output_grad(&gp, &dfake)?;
        Ok((loss, g))
    }

    /// Gradients of `−mean[log D(real)] − mean[log(1 − D(fake))]`.
    pub fn discriminator_grads(&self, real: &Tensor2, fake: &Tensor2) -> Result<(f64, Gradients)> {
        let pr = self.discriminator.forward(real, None)?;
        let pf = self.discriminator.forward(fake, None)?;
        let (br, bf) = (real.rows() as f64, fake.rows() as f64);
        let loss = -pr.output().data().iter().map(|p| p.max(crate::nn::PROB_FLOOR).ln()).sum::<f64>() / br
            - pf.output().data().iter().map(|p| (1.0 - p).max(crate::nn::PROB_FLOOR).ln()).sum::<f64>() / bf;
        let (mut g, _) = self.discriminator.backward_from_preactivation(&pr, pr.output().map(|p| (p - 1.0) / br))?;
        let (gf, _) = self.discriminator.backward_from_preactivation(&pf, pf.output().map(|p| p / bf))?;
        g.add_assign(&gf);
        Ok((loss, g))
    }
}

/// Adversarial value `mean log D(x) + mean log(1 − D(G(z)))` from the two
/// discriminator outputs.
pub fn value_function(d_real: &[f64], d_fake: &[f64]) -> f64 {
    d_real.iter().map(|p| p.ln()).sum::<f64>() / d_real.len() as f64
        + d_fake.iter().map(|p| (1.0 - p).ln()).sum::<f64>() / d_fake.len() as f64
}

fn latent(n: usize, dim: usize, rng: &mut seed::Rng) -> Tensor2 {
    Tensor2::from_vec(n, dim, (0..n * dim).map(|_| rng.sample(StandardNormal)).collect()).expect("sized above")
}


/// Alternating updates: one discriminator step on a real batch and a fresh
/// fake batch, then one generator step on new latent draws. The corpus is
/// only read.
pub fn gan_train(corpus: &ChannelCorpus, config: &GanConfig) -> Result<(Gan, GanHistory)> {
    config.validate()?;
    if corpus.len() < 10 * config.batch_size {
        return invalid(format!("corpus of {} is smaller than 10 batches of {}", corpus.len(), config.batch_size));
    }
    let data = corpus.responses.data();
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut gan = Gan::new(corpus.responses.cols(), lo, hi, config)?;
    let real_all = gan.to_unit(&corpus.responses);
    let mut rng = seed::rng(seed::derive(config.seed, "gan-train"));
    let mut opt_g = Optimizer::adam_with_betas(config.lr_generator, config.beta1, 0.999, &gan.generator);
    let mut opt_d = Optimizer::adam_with_betas(config.lr_discriminator, config.beta1, 0.999, &gan.discriminator);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut history = GanHistory { d_loss: Vec::new(), g_loss: Vec::new(), mode_collapse: false };
    let bs = config.batch_size;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut dl, mut gl, mut steps) = (0.0, 0.0, 0);
        for chunk in order.chunks_exact(bs) {
            let real = real_all.select_rows(chunk);
            let fake = gan.generator.predict(&latent(bs, config.latent_dim, &mut rng))?;
            let (ld, gd) = gan.discriminator_grads(&real, &fake)?;
            opt_d.step(&mut gan.discriminator, &gd);
            let (lg, gg) = gan.generator_grads(&latent(bs, config.latent_dim, &mut rng))?;
            opt_g.step(&mut gan.generator, &gg);
            if !(ld.is_finite() && lg.is_finite()) {
                return Err(Error::Diverged { epoch, detail: format!("losses D {ld}, G {lg}") });
            }
            dl += ld;
            gl += lg;
            steps += 1;
        }
        history.d_loss.push(dl / steps as f64);
        history.g_loss.push(gl / steps as f64);
    }
    let probe = gan.generate(256, seed::derive(config.seed, "collapse-probe"))?;
    let spread = bin_stats(&probe).1.iter().sum::<f64>();
    let corpus_spread = corpus.bin_stats().1.iter().sum::<f64>();
    history.mode_collapse = spread < 1e-3 * corpus_spread;
    Ok((gan, history))
}

/// Statistical agreement between generated and corpus responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanReport {
    /// `|mean_generated − mean_corpus|` per bin, dB.
    pub mean_error_db: Vec<f64>,
    /// `std_generated / std_corpus` per bin.
    pub std_ratio: Vec<f64>,
    /// Two-sample Kolmogorov–Smirnov statistic of the band-averaged gains.
    pub avg_gain_ks: f64,
    /// Bins whose mean error exceeds `tolerance_db`.
    pub flagged_bins: usize,
    pub tolerance_db: f64,
    /// Share of generated values inside the corpus dB range.
    pub in_range_fraction: f64,
}

/// `10·log10` of the mean linear power gain of a dB row.
pub fn average_gain_db(row: &[f64]) -> f64 {
    10.0 * (row.iter().map(|v| 10f64.powf(v / 10.0)).sum::<f64>() / row.len() as f64).log10()
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub fn compare_sets(generated: &Tensor2, corpus: &Tensor2, db_range: (f64, f64), tolerance_db: f64) -> GanReport {
    let (gm, gs) = bin_stats(generated);
    let (cm, cs) = bin_stats(corpus);
    let mean_error_db: Vec<f64> = gm.iter().zip(&cm).map(|(a, b)| (a - b).abs()).collect();
    let std_ratio = gs.iter().zip(&cs).map(|(a, b)| if *b > 0.0 { a / b } else { f64::NAN }).collect();
    let ga: Vec<f64> = generated.iter_rows().map(average_gain_db).collect();
    let ca: Vec<f64> = corpus.iter_rows().map(average_gain_db).collect();
    let inside = generated.data().iter().filter(|v| (db_range.0..=db_range.1).contains(*v)).count();
    GanReport {
        flagged_bins: mean_error_db.iter().filter(|e| **e > tolerance_db).count(),
        mean_error_db,
        std_ratio,
        avg_gain_ks: ks_statistic(&ga, &ca),
        tolerance_db,
        in_range_fraction: inside as f64 / generated.data().len() as f64,
    }
}

pub fn evaluate_gan(gan: &Gan, corpus: &ChannelCorpus, n_samples: usize, seed: u64) -> Result<GanReport> {
    let g = gan.generate(n_samples, seed)?;
    Ok(compare_sets(&g, &corpus.responses, (-90.0, -10.0), 5.0))
}
