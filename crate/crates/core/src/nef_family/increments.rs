//! Laws of the tilted increments X_t^(theta).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Open01, Poisson};

use super::meixner::{meixner_series_sample, meixner_table};
use super::{FamilyKind, FamilySpec};
use crate::error::{Error, Result};
use crate::quadrature::{ln_abs_gamma_sq, ln_gamma};

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::argument(format!(
            "time length must be positive and finite, got {t}"
        )))
    }
}

fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<f64> {
    if lambda <= 0.0 {
        return Ok(0.0);
    }
    let d = Poisson::new(lambda).map_err(|e| Error::argument(format!("Poisson({lambda}): {e}")))?;
    Ok(d.sample(rng))
}

pub(crate) fn gamma_draw<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let d = Gamma::new(shape, scale).map_err(|e| Error::argument(format!("Gamma({shape}, {scale}): {e}")))?;
    Ok(d.sample(rng))
}

impl FamilySpec {
    /// One draw of X_t^(theta). Hyperbolic-secant draws invert a CDF table
    /// cached per (t, theta).
    pub fn increment_sample<R: Rng + ?Sized>(&self, theta: f64, t: f64, rng: &mut R) -> Result<f64> {
        self.check_theta(theta)?;
        check_time(t)?;
        if self.kind == FamilyKind::HyperbolicSecant {
            let table = meixner_table(t, theta)?;
            let u: f64 = rng.sample(Open01);
            return Ok(table.quantile(u));
        }
        self.sample_closed_form(theta, t, rng)
    }

    /// Like [`increment_sample`](Self::increment_sample) but never builds a
    /// table; hyperbolic-secant draws use the gamma-series mixture instead.
    /// Suited to loops where theta changes on every call.
    pub fn increment_sample_direct<R: Rng + ?Sized>(&self, theta: f64, t: f64, rng: &mut R) -> Result<f64> {
        self.check_theta(theta)?;
        check_time(t)?;
        if self.kind == FamilyKind::HyperbolicSecant {
            return meixner_series_sample(theta, t, rng);
        }
        self.sample_closed_form(theta, t, rng)
    }

    fn sample_closed_form<R: Rng + ?Sized>(&self, theta: f64, t: f64, rng: &mut R) -> Result<f64> {
        match self.kind {
            FamilyKind::Wiener => {
                let d = Normal::new(t * theta, t.sqrt()).map_err(|e| Error::argument(e.to_string()))?;
                Ok(d.sample(rng))
            }
            FamilyKind::Poisson => poisson_draw(t * theta.exp(), rng),
            FamilyKind::Gamma => gamma_draw(t, 1.0 / (1.0 - theta), rng),
            FamilyKind::NegativeBinomial => {
                // NB(q~, t) as Poisson(L), L ~ Gamma(shape t, scale q~/(1 - q~))
                let lq = theta + self.nb_q().ln();
                let odds = lq.exp() / -lq.exp_m1();
                let lambda = gamma_draw(t, odds, rng)?;
                poisson_draw(lambda, rng)
            }
            FamilyKind::HyperbolicSecant => unreachable!("handled by the callers"),
        }
    }

    /// Log density (continuous families) or log mass (discrete families) of
    /// X_t^(theta) at `x`; -inf off the support.
    pub fn ln_increment_density(&self, theta: f64, t: f64, x: f64) -> Result<f64> {
        self.check_theta(theta)?;
        check_time(t)?;
        if x.is_nan() {
            return Err(Error::argument("density at NaN"));
        }
        let lattice = x >= 0.0 && x.fract() == 0.0;
        let value = match self.kind {
            FamilyKind::Wiener => {
                let z = x - t * theta;
                -0.5 * z * z / t - 0.5 * (2.0 * PI * t).ln()
            }
            FamilyKind::Poisson => {
                if !lattice {
                    return Ok(f64::NEG_INFINITY);
                }
                let lambda = t * theta.exp();
                -lambda + x * (t.ln() + theta) - ln_gamma(x + 1.0)
            }
            FamilyKind::Gamma => {
                if x <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                let rate = 1.0 - theta;
                t * rate.ln() + (t - 1.0) * x.ln() - rate * x - ln_gamma(t)
            }
            FamilyKind::NegativeBinomial => {
                if !lattice {
                    return Ok(f64::NEG_INFINITY);
                }
                let lq = theta + self.nb_q().ln();
                ln_gamma(t + x) - ln_gamma(t) - ln_gamma(x + 1.0) + x * lq + t * (-lq.exp_m1()).ln()
            }
            FamilyKind::HyperbolicSecant => {
                2.0 * t * (2.0 * (0.5 * theta).cos()).ln() - (2.0 * PI).ln() - ln_gamma(2.0 * t)
                    + ln_abs_gamma_sq(t, x)?
                    + theta * x
            }
        };
        Ok(value)
    }

    /// Density or mass of X_t^(theta) at `x` (0 off the support).
    pub fn increment_density(&self, theta: f64, t: f64, x: f64) -> Result<f64> {
        self.ln_increment_density(theta, t, x).map(f64::exp)
    }
}
