//! The eighteen per-slot noise features and their CSV representation.

mod apen;
mod burg;
mod stats;

pub use apen::apen;
pub use burg::{burg_fit, burg_psd, psd_bin_centres, BurgFit};
pub use stats::{cross_correlation, distance, distance_correlation, moments, pearson, Moments};

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::csv_row;
use crate::tensor::Tensor2;
use crate::trace::Trace;

/// Column names in Table I order.
pub const FEATURE_NAMES: [&str; 18] = [
    "maxAbs", "sum", "sum2", "std", "skew", "kurt", "pears", "dist", "dCor", "ent", "diffEnt", "sumEnt", "fPeak", "fEnFr",
    "fdist", "corrStd", "corrSkew", "corrKurt",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub slot_len: usize,
    /// Volts; `fPeak` counts samples whose magnitude exceeds it.
    pub peak_threshold: f64,
    /// Hz; `fEnFr` integrates the PSD over this band.
    pub freq_range: (f64, f64),
    pub burg_order: usize,
    pub psd_bins: usize,
    pub apen_m: usize,
    /// ApEn tolerance as a multiple of the slot standard deviation.
    pub apen_r_factor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            slot_len: 2048,
            peak_threshold: 0.05,
            freq_range: (3e3, 150e3),
            burg_order: 16,
            psd_bins: 256,
            apen_m: 2,
            apen_r_factor: 0.2,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        let (lo, hi) = self.freq_range;
        if !(lo > 0.0 && lo < hi && hi <= sample_rate / 2.0) {
            return invalid(format!("freq_range ({lo}, {hi}) must satisfy 0 < lo < hi <= fs/2 = {}", sample_rate / 2.0));
        }
        if self.slot_len < 4 {
            return invalid("slot_len must be at least 4");
        }
        if 2 * self.burg_order >= self.slot_len {
            return invalid(format!("burg_order {} must be below slot_len/2", self.burg_order));
        }
        if self.slot_len <= self.apen_m + 1 {
            return invalid("slot_len must exceed apen_m + 1");
        }
        if !(self.apen_r_factor > 0.0) || self.psd_bins == 0 || !(self.peak_threshold >= 0.0) {
            return invalid("apen_r_factor, psd_bins must be positive and peak_threshold non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotPair {
    pub ch1: Vec<f64>,
    pub ch2: Vec<f64>,
}

/// Cuts both traces into `⌊len/slot_len⌋` consecutive slots, dropping the tail.
pub fn slot(trace1: &Trace, trace2: &Trace, slot_len: usize) -> Result<Vec<SlotPair>> {
    if trace1.len() != trace2.len() || trace1.sample_rate != trace2.sample_rate {
        return invalid("the two channels differ in length or sample rate");
    }
    if slot_len == 0 || slot_len > trace1.len() {
        return invalid(format!("slot_len {slot_len} does not fit a trace of {} samples", trace1.len()));
    }
    Ok(trace1
        .samples
        .chunks_exact(slot_len)
        .zip(trace2.samples.chunks_exact(slot_len))
        .map(|(a, b)| SlotPair { ch1: a.to_vec(), ch2: b.to_vec() })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub pears: f64,
    pub dist: f64,
    pub dcor: f64,
    pub diff_ent: f64,
    pub sum_ent: f64,
    pub corr_std: f64,
    pub corr_skew: f64,
    pub corr_kurt: f64,
    /// A channel had zero variance; `pears` is 0.
    pub degenerate: bool,
}

/// Two-channel features; ApEn of the difference and sum uses `r` equal to
/// `r_factor` times the standard deviation of that derived signal.
pub fn pair_stats(pair: &SlotPair, apen_m: usize, r_factor: f64) -> PairStats {
    let (x, y) = (&pair.ch1, &pair.ch2);
    let p = pearson(x, y);
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let corr = moments(&cross_correlation(x, y));
    PairStats {
        pears: p.unwrap_or(0.0),
        dist: distance(x, y),
        dcor: distance_correlation(x, y),
        diff_ent: scaled_apen(&diff, apen_m, r_factor),
        sum_ent: scaled_apen(&sum, apen_m, r_factor),
        corr_std: corr.std,
        corr_skew: corr.skew,
        corr_kurt: corr.kurt,
        degenerate: p.is_none(),
    }
}

/// ApEn with a tolerance relative to the signal's spread; 0 for a constant signal.
pub fn scaled_apen(s: &[f64], m: usize, r_factor: f64) -> f64 {
    let sd = moments(s).std;
    if sd > 0.0 {
        apen(s, m, r_factor * sd)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFeatures {
    pub f_peak: f64,
    /// Power in `freq_range`, V².
    pub f_en_fr: f64,
    pub f_dist: f64,
    pub order_reduced: bool,
}

/// Sample distance between the two largest local maxima of `|s|`; 0 when
/// fewer than two maxima exist. Ties favour the lower index.
pub fn peak_distance(s: &[f64]) -> usize {
    let a: Vec<f64> = s.iter().map(|v| v.abs()).collect();
    let n = a.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || a[i] > a[i - 1]) && (i + 1 == n || a[i] >= a[i + 1]))
        .collect();
    if peaks.len() < 2 {
        return 0;
    }
    peaks.sort_by(|&p, &q| a[q].total_cmp(&a[p]).then(p.cmp(&q)));
    peaks[0].abs_diff(peaks[1])
}

pub fn spectral_features(s: &[f64], sample_rate: f64, config: &FeatureConfig) -> SpectralFeatures {
    let f_peak = s.iter().filter(|v| v.abs() > config.peak_threshold).count() as f64;
    let (psd, reduced) = burg_psd(s, config.burg_order, config.psd_bins, sample_rate);
    let width = sample_rate / (2.0 * config.psd_bins as f64);
    let (lo, hi) = config.freq_range;
    let f_en_fr = psd_bin_centres(config.psd_bins, sample_rate)
        .iter()
        .zip(&psd)
        .filter(|(f, _)| (lo..=hi).contains(*f))
        .map(|(_, p)| p * width)
        .sum();
    SpectralFeatures { f_peak, f_en_fr, f_dist: peak_distance(s) as f64, order_reduced: reduced }
}

/// One feature row for a slot, Table I order.
pub fn slot_features(pair: &SlotPair, sample_rate: f64, config: &FeatureConfig) -> ([f64; 18], bool) {
    let m = moments(&pair.ch1);
    let ps = pair_stats(pair, config.apen_m, config.apen_r_factor);
    let ent = scaled_apen(&pair.ch1, config.apen_m, config.apen_r_factor);
    let sp = spectral_features(&pair.ch1, sample_rate, config);
    let row = [
        m.max_abs, m.sum, m.sum2, m.std, m.skew, m.kurt, ps.pears, ps.dist, ps.dcor, ent, ps.diff_ent, ps.sum_ent, sp.f_peak,
        sp.f_en_fr, sp.f_dist, ps.corr_std, ps.corr_skew, ps.corr_kurt,
    ];
    (row, m.degenerate || ps.degenerate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// One row per slot, 18 columns named by [`FEATURE_NAMES`].
    pub values: Tensor2,
    /// Per-slot degenerate-variance flag.
    pub degenerate: Vec<bool>,
}

impl FeatureMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = FEATURE_NAMES.join(",");
        out.push('\n');
        for row in self.values.iter_rows() {
            out.push_str(&csv_row(row));
            out.push('\n');
        }
        out
    }
}

/// Features of every slot, computed in parallel; the result does not depend
/// on the thread count.
pub fn feature_matrix(trace1: &Trace, trace2: &Trace, config: &FeatureConfig) -> Result<FeatureMatrix> {
    config.validate(trace1.sample_rate)?;
    let slots = slot(trace1, trace2, config.slot_len)?;
    let rows: Vec<([f64; 18], bool)> = slots.par_iter().map(|p| slot_features(p, trace1.sample_rate, config)).collect();
    let degenerate = rows.iter().map(|r| r.1).collect();
    let data = rows.iter().flat_map(|r| r.0).collect();
    Ok(FeatureMatrix { values: Tensor2::from_vec(rows.len(), 18, data)?, degenerate })
}

/// Per-column z-scores; constant columns map to 0.
pub fn standardize(m: &Tensor2) -> Tensor2 {
    let means = m.column_means();
    let n = m.rows() as f64;
    let sds: Vec<f64> = (0..m.cols())
        .map(|j| (m.iter_rows().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt())
        .collect();
    let mut out = m.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = if sds[j] > 0.0 { (*v - means[j]) / sds[j] } else { 0.0 };
        }
    }
    out
}

/// Sidecar metadata for binary traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMeta {
    pub sample_rate: f64,
    pub length: usize,
}

/// Two-column `ch1,ch2` CSV; a non-numeric first line is taken as a header.
pub fn read_trace_csv(path: &Path, sample_rate: f64) -> Result<(Trace, Trace)> {
    let text = fs::read_to_string(path)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let parsed = (it.next().map(str::parse::<f64>), it.next().map(str::parse::<f64>), it.next());
        match parsed {
            (Some(Ok(x)), Some(Ok(y)), None) => {
                a.push(x);
                b.push(y);
            }
            _ if k == 0 => {}
            _ => return Err(Error::Parse(format!("{}:{}: expected two numbers", path.display(), k + 1))),
        }
    }
    Ok((Trace::new(a, sample_rate)?, Trace::new(b, sample_rate)?))
}

/// Raw little-endian `f64` samples plus a JSON sidecar at `<path>.json`.
pub fn read_trace_binary(path: &Path) -> Result<Trace> {
    let meta: TraceMeta = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
    let bytes = fs::read(path)?;
    if bytes.len() != meta.length * 8 {
        return Err(Error::Parse(format!("{}: {} bytes for {} samples", path.display(), bytes.len(), meta.length)));
    }
    let samples = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Trace::new(samples, meta.sample_rate)
}

pub fn write_trace_binary(path: &Path, trace: &Trace) -> Result<()> {
    let bytes: Vec<u8> = trace.samples.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    let meta = TraceMeta { sample_rate: trace.sample_rate, length: trace.len() };
    fs::write(sidecar(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}
