//! Log-gamma on the complex right half-plane via a Lanczos sum.
//!
//! Coefficients are for g = 607/128 with 15 terms; `scripts/lanczos_coefficients.py`
//! regenerates them (exact interpolation at z = 0..14 in 60-digit arithmetic).

use num_complex::Complex64;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 607.0 / 128.0;

#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 15] = [
    0.999_999_999_999_997_091_82,
    57.156_235_665_862_923_517,
    -59.597_960_355_475_491_248,
    14.136_097_974_741_747_174,
    -0.491_913_816_097_620_199_78,
    0.339_946_499_848_118_886_99e-4,
    0.465_236_289_270_485_756_65e-4,
    -0.983_744_753_048_795_646_77e-4,
    0.158_088_703_224_912_488_84e-3,
    -0.210_264_441_724_104_883_19e-3,
    0.217_439_618_115_212_643_2e-3,
    -0.164_318_106_536_763_890_22e-3,
    0.844_182_239_838_527_432_93e-4,
    -0.261_908_384_015_814_086_7e-4,
    0.368_991_826_595_316_227_04e-5,
];

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_741_78;

/// Real part of log Gamma(z) for Re z > 0.
fn re_ln_gamma_right(z: Complex64) -> f64 {
    if z.re < 0.5 {
        // Gamma(z) = Gamma(z + 1) / z
        return re_ln_gamma_right(z + 1.0) - z.norm().ln();
    }
    let w = z - 1.0;
    let mut acc = Complex64::new(LANCZOS_COEFFS[0], 0.0);
    for (k, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += *c / (w + k as f64);
    }
    let base = w + (LANCZOS_G + 0.5);
    let lead = (w + 0.5) * base.ln();
    HALF_LN_TWO_PI + lead.re - base.re + acc.norm().ln()
}

/// log Gamma(x) for real x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    re_ln_gamma_right(Complex64::new(x, 0.0))
}

/// log B(a, b) for a, b > 0.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// log |Gamma(t + ix)|^2.
pub fn ln_abs_gamma_sq(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::argument(format!("abs_gamma_sq needs t > 0, got {t}")));
    }
    Ok(2.0 * re_ln_gamma_right(Complex64::new(t, x)))
}

/// |Gamma(t + ix)|^2 for t > 0.
pub fn abs_gamma_sq(t: f64, x: f64) -> Result<f64> {
    ln_abs_gamma_sq(t, x).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn unit_and_half() {
        assert!(rel(abs_gamma_sq(1.0, 0.0).unwrap(), 1.0) < 1e-14);
        assert!(rel(abs_gamma_sq(0.5, 0.0).unwrap(), PI) < 1e-14);
    }

    #[test]
    fn reflection_identity_at_one() {
        // |Gamma(1 + ix)|^2 = pi x / sinh(pi x)
        for &x in &[1e-3, 0.1, 1.0, 2.5, 7.0, 20.0, 50.0] {
            let exact = PI * x / (PI * x).sinh();
            assert!(rel(abs_gamma_sq(1.0, x).unwrap(), exact) < 1e-10, "x = {x}");
        }
        assert!(rel(abs_gamma_sq(1.0, 1.0).unwrap(), 0.272_029_054_982_133) < 1e-12);
    }

    #[test]
    fn half_integer_identity() {
        // |Gamma(1/2 + ix)|^2 = pi / cosh(pi x)
        for &x in &[0.0, 0.3, 4.0, 30.0] {
            let exact = PI / (PI * x).cosh();
            assert!(rel(abs_gamma_sq(0.5, x).unwrap(), exact) < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn recurrence_over_box() {
        for &t in &[0.05, 0.3, 1.0, 3.7, 12.0, 49.0] {
            for &x in &[-50.0, -7.5, -1.0, 0.0, 0.25, 3.0, 18.0, 50.0] {
                let lhs = ln_abs_gamma_sq(t + 1.0, x).unwrap();
                let rhs = (t * t + x * x).ln() + ln_abs_gamma_sq(t, x).unwrap();
                assert!((lhs - rhs).abs() < 1e-10, "t = {t}, x = {x}");
            }
        }
    }

    #[test]
    fn real_ln_gamma_factorials() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12 * fact.ln().max(1.0));
            fact *= n as f64;
        }
        assert!((ln_beta(2.0, 3.0) - (1.0f64 / 12.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_t() {
        assert!(abs_gamma_sq(0.0, 1.0).is_err());
        assert!(abs_gamma_sq(-1.0, 1.0).is_err());
    }
}
