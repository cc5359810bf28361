//! Samplers for the hyperbolic-secant (Meixner) increments.
//!
//! Two routes: a CDF table per (t, theta), built once and shared, and the
//! normal variance-mean mixture X = theta V + sqrt(V) N with
//! V = sum_k 2 G_k / (pi^2 (2k+1)^2 - theta^2), G_k ~ Gamma(2t, 1) i.i.d.
//! The series is cut after `SERIES_TERMS` terms and the remainder replaced by
//! one gamma variable with the same mean and variance.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::FamilySpec;
use crate::error::{Error, Result};
use crate::quadrature::{tabulate_inverse_cdf_with, InverseCdf, TabulationOptions};

const TABLE_TOL: f64 = 1e-10;

type TableCell = Arc<OnceLock<Result<Arc<InverseCdf>>>>;

fn table_cache() -> &'static Mutex<HashMap<(u64, u64), TableCell>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), TableCell>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Inverse-CDF table of X_t^(theta) for the hyperbolic-secant family, built
/// on first use and cached for the life of the process.
pub fn meixner_table(t: f64, theta: f64) -> Result<Arc<InverseCdf>> {
    let family = FamilySpec::hyperbolic_secant();
    family.check_theta(theta)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::argument(format!("time length must be positive, got {t}")));
    }
    let cell = {
        let mut map = table_cache().lock().unwrap_or_else(|e| e.into_inner());
        map.entry((t.to_bits(), theta.to_bits())).or_default().clone()
    };
    cell.get_or_init(|| {
        let c = family.cumulants(theta)?;
        let opts = TabulationOptions {
            center: t * c.kappa_prime,
            scale: (t * c.kappa_double_prime).sqrt(),
            ..TabulationOptions::new(TABLE_TOL)
        };
        let density = |x: f64| family.increment_density(theta, t, x).unwrap_or(0.0);
        tabulate_inverse_cdf_with(density, (f64::NEG_INFINITY, f64::INFINITY), &opts).map(Arc::new)
    })
    .clone()
}

const SERIES_TERMS: usize = 32;

/// sum_{k >= K} (2k+1)^{-n} by Euler-Maclaurin.
fn odd_power_tail(n: i32) -> f64 {
    let x = (2 * SERIES_TERMS + 1) as f64;
    let nf = n as f64;
    1.0 / (2.0 * (nf - 1.0) * x.powi(n - 1)) + 0.5 * x.powi(-n) + nf / 6.0 * x.powi(-n - 1)
        - nf * (nf + 1.0) * (nf + 2.0) / 90.0 * x.powi(-n - 3)
}

struct SeriesTail {
    /// sum_{k>=K} 2 / c_k^(j+1), c_k = pi^2 (2k+1)^2, for j = 0..4
    first: [f64; 5],
    /// sum_{k>=K} 4 / c_k^(j+2)
    second: [f64; 5],
}

fn series_tail() -> &'static SeriesTail {
    static TAIL: OnceLock<SeriesTail> = OnceLock::new();
    TAIL.get_or_init(|| {
        let pi2 = PI * PI;
        let mut first = [0.0; 5];
        let mut second = [0.0; 5];
        for j in 0..5 {
            let j32 = j as i32;
            first[j] = 2.0 * odd_power_tail(2 * j32 + 2) / pi2.powi(j32 + 1);
            second[j] = 4.0 * odd_power_tail(2 * j32 + 4) / pi2.powi(j32 + 2);
        }
        SeriesTail { first, second }
    })
}

/// Mean and variance of the truncated remainder of V for unit gamma shape.
fn remainder_moments(theta: f64) -> (f64, f64) {
    let tail = series_tail();
    let th2 = theta * theta;
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut pow = 1.0;
    for j in 0..5 {
        mean += pow * tail.first[j];
        var += (j as f64 + 1.0) * pow * tail.second[j];
        pow *= th2;
    }
    (mean, var)
}

/// One draw of X_t^(theta) (hyperbolic secant) from the mixture series.
pub fn meixner_series_sample<R: Rng + ?Sized>(theta: f64, t: f64, rng: &mut R) -> Result<f64> {
    FamilySpec::hyperbolic_secant().check_theta(theta)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::argument(format!("time length must be positive, got {t}")));
    }
    let shape = 2.0 * t;
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::argument(e.to_string()))?;
    let th2 = theta * theta;
    let mut v = 0.0;
    for k in 0..SERIES_TERMS {
        let odd = (2 * k + 1) as f64;
        let c = PI * PI * odd * odd;
        v += 2.0 * g.sample(rng) / (c - th2);
    }
    let (m1, m2) = remainder_moments(theta);
    let (mean, var) = (shape * m1, shape * m2);
    let tail = Gamma::new(mean * mean / var, var / mean).map_err(|e| Error::argument(e.to_string()))?;
    v += tail.sample(rng);
    let z: f64 = rng.sample(StandardNormal);
    Ok(theta * v + v.sqrt() * z)
}
