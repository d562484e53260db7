use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Per-unit-length parameters of a two-conductor cable.
///
/// Resistance follows `R(f) = r0 · (f / 1 MHz)^r_exp` (skin effect with the
/// default exponent 0.5) and conductance `G(f) = g0 · (f / 1 MHz)^g_exp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CableParams {
    /// Ω/m at 1 MHz.
    pub r0: f64,
    /// H/m.
    pub l: f64,
    /// F/m.
    pub c: f64,
    /// S/m at 1 MHz.
    pub g0: f64,
    #[serde(default = "default_r_exp")]
    pub r_exp: f64,
    #[serde(default = "default_g_exp")]
    pub g_exp: f64,
}

fn default_r_exp() -> f64 {
    0.5
}

fn default_g_exp() -> f64 {
    1.0
}

impl Default for CableParams {
    fn default() -> Self {
        Self { r0: 1e-3, l: 0.5e-6, c: 50e-12, g0: 1e-9, r_exp: 0.5, g_exp: 1.0 }
    }
}

/// Characteristic impedance and propagation constant at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineConstants {
    pub zc: Complex64,
    pub gamma: Complex64,
}

impl CableParams {
    pub fn lossless(l: f64, c: f64) -> Self {
        Self { r0: 0.0, l, c, g0: 0.0, ..Self::default() }
    }

    pub fn is_valid(&self) -> bool {
        self.r0 >= 0.0 && self.g0 >= 0.0 && self.l > 0.0 && self.c > 0.0 && self.r_exp.is_finite() && self.g_exp.is_finite()
    }

    pub fn resistance(&self, f: f64) -> f64 {
        self.r0 * (f / 1e6).powf(self.r_exp)
    }

    pub fn conductance(&self, f: f64) -> f64 {
        self.g0 * (f / 1e6).powf(self.g_exp)
    }

    /// `Zc = √((R+jωL)/(G+jωC))`, `γ = √((R+jωL)(G+jωC))`.
    pub fn constants(&self, f: f64) -> LineConstants {
        let w = 2.0 * std::f64::consts::PI * f;
        let z = Complex64::new(self.resistance(f), w * self.l);
        let y = Complex64::new(self.conductance(f), w * self.c);
        let mut gamma = (z * y).sqrt();
        // principal root can land in the left half-plane only through rounding
        if gamma.re < 0.0 {
            gamma = -gamma;
        }
        LineConstants { zc: (z / y).sqrt(), gamma }
    }

    /// Phase velocity of the lossless approximation, `1/√(LC)`.
    pub fn velocity(&self) -> f64 {
        1.0 / (self.l * self.c).sqrt()
    }

    /// Copy with series resistance and shunt conductance multiplied by
    /// `factor`; inductance and capacitance too when `scale_lc` is set.
    pub fn degraded(&self, factor: f64, scale_lc: bool) -> Self {
        let mut c = *self;
        c.r0 *= factor;
        c.g0 *= factor;
        if scale_lc {
            c.l *= factor;
            c.c *= factor;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_line_has_real_impedance_and_pure_phase() {
        let c = CableParams::lossless(0.5e-6, 50e-12);
        let k = c.constants(10e6);
        assert!((k.zc.re - 100.0).abs() < 1e-9 && k.zc.im.abs() < 1e-9);
        assert!(k.gamma.re.abs() < 1e-15);
        let beta = 2.0 * std::f64::consts::PI * 10e6 / c.velocity();
        assert!((k.gamma.im - beta).abs() < 1e-12);
    }

    #[test]
    fn default_cable_attenuates() {
        let k = CableParams::default().constants(30e6);
        assert!(k.gamma.re > 0.0 && k.gamma.im > 0.0);
        assert!(k.zc.re > 0.0);
    }
}
