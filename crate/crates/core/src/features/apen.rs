/// Approximate entropy `ApEn(m, r) = Φᵐ(r) − Φᵐ⁺¹(r)`.
///
/// Templates are compared with the Chebyshev distance and a template always
/// matches itself, so every count is at least one and the logarithms are
/// finite.
pub fn apen(s: &[f64], m: usize, r: f64) -> f64 {
    phi(s, m, r) - phi(s, m + 1, r)
}

fn phi(s: &[f64], m: usize, r: f64) -> f64 {
    let count = s.len() + 1 - m;
    let mut total = 0.0;
    for i in 0..count {
        let a = &s[i..i + m];
        let matches = (0..count)
            .filter(|&j| {
                let b = &s[j..j + m];
                a.iter().zip(b).all(|(p, q)| (p - q).abs() <= r)
            })
            .count();
        total += (matches as f64 / count as f64).ln();
    }
    total / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_signal_has_zero_entropy() {
        assert_eq!(apen(&[1.5; 40], 2, 0.1), 0.0);
    }

    #[test]
    fn sinusoid_is_more_regular_than_noise() {
        let n = 500;
        let sine: Vec<f64> = (0..n).map(|t| (2.0_f64).sqrt() * (0.17 * t as f64).sin()).collect();
        let mut rng = seed::rng(3);
        let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let std = |v: &[f64]| super::super::stats::moments(v).std;
        let a_sine = apen(&sine, 2, 0.2 * std(&sine));
        let a_noise = apen(&noise, 2, 0.2 * std(&noise));
        assert!(a_sine < a_noise, "{a_sine} vs {a_noise}");
    }

    #[test]
    fn six_samples_by_hand() {
        // m = 1 templates: each value; m = 2 templates: consecutive pairs.
        let s = [0.0, 1.0, 0.0, 1.0, 0.0, 5.0];
        let r = 0.5;
        // m=1: values {0,1,0,1,0,5}: match counts 3,2,3,2,3,1 over 6
        let phi1 = [3.0, 2.0, 3.0, 2.0, 3.0, 1.0].iter().map(|c: &f64| (c / 6.0).ln()).sum::<f64>() / 6.0;
        // m=2: pairs (0,1),(1,0),(0,1),(1,0),(0,5): counts 2,2,2,2,1 over 5
        let phi2 = [2.0, 2.0, 2.0, 2.0, 1.0].iter().map(|c: &f64| (c / 5.0).ln()).sum::<f64>() / 5.0;
        assert!((apen(&s, 1, r) - (phi1 - phi2)).abs() < 1e-15);
    }
}
