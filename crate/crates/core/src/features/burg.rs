/// Autoregressive model fitted by Burg's recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgFit {
    /// `A(z) = 1 + a₁z⁻¹ + … + a_p z⁻ᵖ`; `coefficients[0] = 1`.
    pub coefficients: Vec<f64>,
    /// Driving-noise variance.
    pub noise_var: f64,
    /// Set when the recursion stopped early on a reflection coefficient with
    /// magnitude ≥ 1 (or a vanishing error power).
    pub order_reduced: bool,
}

impl BurgFit {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// One-sided PSD in V²/Hz at `f`.
    pub fn psd_at(&self, f: f64, sample_rate: f64) -> f64 {
        let w = -2.0 * std::f64::consts::PI * f / sample_rate;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, a) in self.coefficients.iter().enumerate() {
            let (s, c) = (w * k as f64).sin_cos();
            re += a * c;
            im += a * s;
        }
        2.0 * self.noise_var / (sample_rate * (re * re + im * im))
    }
}

pub fn burg_fit(x: &[f64], order: usize) -> BurgFit {
    let n = x.len();
    let mut f = x.to_vec();
    let mut b = x.to_vec();
    let mut a = vec![1.0];
    let mut e = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut reduced = false;
    for m in 1..=order {
        let (mut num, mut den) = (0.0, 0.0);
        for t in m..n {
            num += f[t] * b[t - 1];
            den += f[t] * f[t] + b[t - 1] * b[t - 1];
        }
        if !(den > 0.0) {
            reduced = true;
            break;
        }
        let k = -2.0 * num / den;
        if !(k.abs() < 1.0) {
            reduced = true;
            break;
        }
        let mut next = a.clone();
        next.push(0.0);
        for i in 1..=m {
            next[i] = a.get(i).copied().unwrap_or(0.0) + k * a[m - i];
        }
        a = next;
        for t in (m..n).rev() {
            let ft = f[t] + k * b[t - 1];
            let bt = b[t - 1] + k * f[t];
            f[t] = ft;
            b[t] = bt;
        }
        e *= 1.0 - k * k;
    }
    BurgFit { coefficients: a, noise_var: e, order_reduced: reduced }
}

/// Centres of `n_bins` equal-width bins spanning `[0, fs/2]`.
pub fn psd_bin_centres(n_bins: usize, sample_rate: f64) -> Vec<f64> {
    let w = sample_rate / (2.0 * n_bins as f64);
    (0..n_bins).map(|k| (k as f64 + 0.5) * w).collect()
}

/// Burg PSD on [`psd_bin_centres`]; the flag reports a reduced order.
pub fn burg_psd(x: &[f64], order: usize, n_bins: usize, sample_rate: f64) -> (Vec<f64>, bool) {
    let fit = burg_fit(x, order);
    let psd = psd_bin_centres(n_bins, sample_rate).into_iter().map(|f| fit.psd_at(f, sample_rate)).collect();
    (psd, fit.order_reduced)
}
