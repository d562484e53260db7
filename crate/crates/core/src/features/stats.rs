use rustfft::{num_complex::Complex, FftPlanner};

/// Single-channel moments of one slot (Table I rows 1 to 6).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub max_abs: f64,
    pub sum: f64,
    pub sum2: f64,
    /// Sample standard deviation, `1/(N−1)` normalisation.
    pub std: f64,
    /// Third central moment over the population variance.
    pub skew: f64,
    /// Fourth central moment over the population variance.
    pub kurt: f64,
    /// Zero variance: `skew` and `kurt` are reported as 0.
    pub degenerate: bool,
}

/// Table I moments. Skewness and kurtosis divide the central moment by the
/// squared population standard deviation, i.e. by the variance itself.
pub fn moments(s: &[f64]) -> Moments {
    let n = s.len() as f64;
    let max_abs = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let sum: f64 = s.iter().sum();
    let sum2: f64 = s.iter().map(|v| v * v).sum();
    let mu = sum / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in s {
        let d = v - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let std = if s.len() > 1 { (m2 / (n - 1.0)).sqrt() } else { 0.0 };
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let degenerate = !(m2 > 1e-300) || std <= 1e-12 * max_abs;
    let (skew, kurt) = if degenerate { (0.0, 0.0) } else { (m3 / m2, m4 / m2) };
    Moments { max_abs, sum, sum2, std, skew, kurt, degenerate }
}

/// Pearson correlation; `None` when either channel has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let den = (sxx * syy).sqrt();
    if den > 0.0 && den.is_finite() {
        Some((sxy / den).clamp(-1.0, 1.0))
    } else {
        None
    }
}

/// Euclidean distance between the two channels.
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn row_means(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len();
    let rows: Vec<f64> = x.iter().map(|&a| x.iter().map(|&b| (a - b).abs()).sum::<f64>() / n as f64).collect();
    let grand = rows.iter().sum::<f64>() / n as f64;
    (rows, grand)
}

/// Squared distance covariance between two samples, streamed in O(N²) time
/// and O(N) memory.
fn dcov2(x: &[f64], rx: &[f64], gx: f64, y: &[f64], ry: &[f64], gy: f64) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let a = (x[i] - x[j]).abs() - rx[i] - rx[j] + gx;
            let b = (y[i] - y[j]).abs() - ry[i] - ry[j] + gy;
            row += a * b;
        }
        acc += row;
    }
    acc / (n * n) as f64
}

/// Distance correlation in `[0, 1]`; 0 when either sample is constant.
pub fn distance_correlation(x: &[f64], y: &[f64]) -> f64 {
    let (rx, gx) = row_means(x);
    let (ry, gy) = row_means(y);
    let vx = dcov2(x, &rx, gx, x, &rx, gx);
    let vy = dcov2(y, &ry, gy, y, &ry, gy);
    let den = (vx * vy).sqrt();
    if !(den > 0.0) {
        return 0.0;
    }
    let cxy = dcov2(x, &rx, gx, y, &ry, gy).max(0.0);
    (cxy / den).sqrt().clamp(0.0, 1.0)
}

/// Normalised cross-correlation of the mean-removed channels at every lag
/// `−(N−1) … N−1`. The zero-lag entry (index `N−1`) equals the Pearson
/// coefficient. All zeros when either channel is constant.
pub fn cross_correlation(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let len = 2 * n - 1;
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let den = (sxx * syy).sqrt();
    if !(den > 0.0) {
        return vec![0.0; len];
    }
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut a: Vec<Complex<f64>> = (0..size).map(|i| Complex::new(if i < n { x[i] - mx } else { 0.0 }, 0.0)).collect();
    let mut b: Vec<Complex<f64>> = (0..size).map(|i| Complex::new(if i < n { y[i] - my } else { 0.0 }, 0.0)).collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    // r[k] = Σ_t x[t]·y[t+k]
    let mut c: Vec<Complex<f64>> = a.iter().zip(&b).map(|(p, q)| p.conj() * q).collect();
    inv.process(&mut c);
    let scale = 1.0 / (size as f64 * den);
    (0..len)
        .map(|i| {
            let lag = i as isize - (n as isize - 1);
            let idx = if lag >= 0 { lag as usize } else { (size as isize + lag) as usize };
            c[idx].re * scale
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn gauss(n: usize, s: u64) -> Vec<f64> {
        let mut r = seed::rng(s);
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    }

    #[test]
    fn constant_slot_is_degenerate() {
        let m = moments(&[2.0; 10]);
        assert_eq!((m.sum, m.sum2, m.std), (20.0, 40.0, 0.0));
        assert!(m.degenerate);
        assert_eq!((m.skew, m.kurt), (0.0, 0.0));
    }

    #[test]
    fn two_point_moments() {
        let m = moments(&[-1.0, 1.0]);
        assert_eq!((m.max_abs, m.sum, m.sum2), (1.0, 0.0, 2.0));
    }

    #[test]
    fn gaussian_moments_match_direct_sums() {
        let s = gauss(100_000, 4);
        let m = moments(&s);
        assert!(m.skew.abs() < 0.05);
        let n = s.len() as f64;
        let mu = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        let m4 = s.iter().map(|v| (v - mu).powi(4)).sum::<f64>() / n;
        let kurt = m4 / var.sqrt().powi(2);
        assert!((m.kurt - kurt).abs() <= 1e-12 * kurt.abs());
        // the variance denominator puts a unit Gaussian's kurtosis near 3σ²
        assert!((m.kurt - 3.0).abs() < 0.1);
    }

    #[test]
    fn pearson_extremes() {
        let x = gauss(50, 1);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&x, &[3.0; 50]).is_none());
    }

    /// Explicit double-centred distance matrices.
    fn dcor_matrix_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let centred = |v: &[f64]| {
            let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (v[i] - v[j]).abs()).collect()).collect();
            let row: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
            let col: Vec<f64> = (0..n).map(|j| (0..n).map(|i| d[i][j]).sum::<f64>() / n as f64).collect();
            let all = row.iter().sum::<f64>() / n as f64;
            (0..n).map(|i| (0..n).map(|j| d[i][j] - row[i] - col[j] + all).collect::<Vec<_>>()).collect::<Vec<_>>()
        };
        let (a, b) = (centred(x), centred(y));
        let dot = |p: &Vec<Vec<f64>>, q: &Vec<Vec<f64>>| -> f64 {
            p.iter().zip(q).map(|(r, s)| r.iter().zip(s).map(|(u, v)| u * v).sum::<f64>()).sum::<f64>() / (n * n) as f64
        };
        (dot(&a, &b) / (dot(&a, &a) * dot(&b, &b)).sqrt()).sqrt()
    }

    #[test]
    fn dcor_matches_matrix_formula() {
        let x = gauss(120, 8);
        let y: Vec<f64> = gauss(120, 9).iter().zip(&x).map(|(e, v)| v * v + 0.5 * e).collect();
        let fast = distance_correlation(&x, &y);
        let slow = dcor_matrix_oracle(&x, &y);
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn dcor_limits() {
        let x = gauss(500, 2);
        let y = gauss(500, 3);
        assert!(distance_correlation(&x, &y) < 0.1);
        let aff: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        assert!((distance_correlation(&x, &aff) - 1.0).abs() < 1e-12);
        assert_eq!(distance_correlation(&x, &[1.0; 500]), 0.0);
    }

    #[test]
    fn cross_correlation_matches_direct_lags() {
        let x = gauss(37, 5);
        let y = gauss(37, 6);
        let r = cross_correlation(&x, &y);
        assert_eq!(r.len(), 73);
        let n = x.len();
        let mx = x.iter().sum::<f64>() / n as f64;
        let my = y.iter().sum::<f64>() / n as f64;
        let den = (x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() * y.iter().map(|v| (v - my).powi(2)).sum::<f64>()).sqrt();
        for (i, got) in r.iter().enumerate() {
            let lag = i as isize - (n as isize - 1);
            let mut acc = 0.0;
            for t in 0..n as isize {
                let u = t + lag;
                if (0..n as isize).contains(&u) {
                    acc += (x[t as usize] - mx) * (y[u as usize] - my);
                }
            }
            assert!((got - acc / den).abs() < 1e-12);
        }
        assert!((r[n - 1] - pearson(&x, &y).unwrap()).abs() < 1e-12);
    }
}
