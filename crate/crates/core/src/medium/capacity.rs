use super::grid::ChannelResponse;
use crate::error::{invalid, shape_err, Result};

/// Converts a PSD in dBm/Hz to W/Hz.
pub fn dbm_per_hz_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Shannon capacity `Σ Δf · log2(1 + |H|² P_tx / P_noise)` in bit/s.
pub fn capacity(h: &ChannelResponse, noise_psd: &[f64], tx_psd: &[f64]) -> Result<f64> {
    let n = h.h.len();
    if noise_psd.len() != n || tx_psd.len() != n {
        return shape_err(format!("{n} bins vs noise {} / tx {}", noise_psd.len(), tx_psd.len()));
    }
    if noise_psd.iter().any(|&p| !(p > 0.0)) {
        return invalid("noise PSD must be positive in every bin");
    }
    let df = h.grid.spacing();
    Ok(h.h.iter().zip(noise_psd).zip(tx_psd).map(|((h, &pn), &pt)| df * (1.0 + h.norm_sqr() * pt / pn).log2()).sum())
}

/// Capacity from per-bin power gains with flat PSDs; the hot path of link tables.
pub fn capacity_flat(power_gains: impl Iterator<Item = f64>, df: f64, snr_scale: f64) -> f64 {
    power_gains.map(|g| df * (1.0 + g * snr_scale).log2()).sum()
}

/// Water-filling: `pᵢ = max(0, μ − Nᵢ/gᵢ)` with the water level `μ` found by
/// bisection so that `Σ pᵢ Δf = total_power`. `gains` are power gains `|Hᵢ|²`.
pub fn waterfill(gains: &[f64], noise_psd: &[f64], total_power: f64, bin_width: f64) -> Result<Vec<f64>> {
    if gains.len() != noise_psd.len() {
        return shape_err(format!("{} gains vs {} noise bins", gains.len(), noise_psd.len()));
    }
    if !(total_power > 0.0) || !(bin_width > 0.0) {
        return invalid("total power and bin width must be positive");
    }
    if gains.iter().all(|&g| g <= 0.0) {
        return invalid("every channel gain is zero");
    }
    if noise_psd.iter().any(|&p| !(p >= 0.0)) {
        return invalid("noise PSD must be non-negative");
    }
    let floor: Vec<f64> = gains.iter().zip(noise_psd).map(|(&g, &n)| if g > 0.0 { n / g } else { f64::INFINITY }).collect();
    let spent = |mu: f64| floor.iter().map(|&t| (mu - t).max(0.0)).sum::<f64>() * bin_width;
    let budget = total_power;
    let mut lo = floor.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = lo + budget / bin_width;
    // the level sits between the best floor and that floor plus the whole budget
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if spent(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    let mu = 0.5 * (lo + hi);
    Ok(floor.iter().map(|&t| (mu - t).max(0.0)).collect())
}

/// `Σ Δf · log2(1 + gᵢ pᵢ / Nᵢ)` for an explicit allocation.
pub fn allocation_capacity(gains: &[f64], noise_psd: &[f64], power: &[f64], bin_width: f64) -> f64 {
    gains.iter().zip(noise_psd).zip(power).map(|((&g, &n), &p)| bin_width * (1.0 + g * p / n).log2()).sum()
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn waterfill_spends_the_budget_and_beats_flat_power(
            bins in prop::collection::vec((-8.0f64..-1.0, -15.0f64..-12.0), 1..48),
            log_total in -4.0f64..0.0,
            df in 1e3f64..1e5,
        ) {
            let gains: Vec<f64> = bins.iter().map(|b| 10f64.powf(b.0)).collect();
            let noise: Vec<f64> = bins.iter().map(|b| 10f64.powf(b.1)).collect();
            let total = 10f64.powf(log_total);
            let p = waterfill(&gains, &noise, total, df).unwrap();
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() * df - total).abs() <= 1e-9 * total);
            let flat = vec![total / (gains.len() as f64 * df); gains.len()];
            prop_assert!(allocation_capacity(&gains, &noise, &p, df) >= allocation_capacity(&gains, &noise, &flat, df) * (1.0 - 1e-12));
        }
    }
}
