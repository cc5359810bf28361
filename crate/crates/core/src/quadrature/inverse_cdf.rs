//! Tabulated CDFs with monotone cubic Hermite interpolation and inversion.

use super::kronrod::{integrate_with, QuadratureOptions};
use crate::error::{Error, Result};

/// Settings for [`tabulate_inverse_cdf_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct TabulationOptions {
    /// Bound on |CDF(I(u)) - u| and on |total mass - 1|.
    pub tol: f64,
    /// A point near the bulk of the density (used to locate tails).
    pub center: f64,
    /// Typical spread of the density.
    pub scale: f64,
    pub max_nodes: usize,
}

impl TabulationOptions {
    pub fn new(tol: f64) -> Self {
        TabulationOptions {
            tol,
            center: 0.0,
            scale: 1.0,
            max_nodes: 1 << 16,
        }
    }
}

/// Piecewise-cubic CDF on a finite window and its inverse.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
    /// Fritsch-Carlson limited end slopes of each interval.
    slopes: Vec<(f64, f64)>,
}

impl InverseCdf {
    pub fn window(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn nodes(&self) -> usize {
        self.xs.len()
    }

    /// Interpolated CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.cdf[0];
        }
        if x >= self.xs[n - 1] {
            return self.cdf[n - 1];
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        self.hermite(i, x).0
    }

    fn hermite(&self, i: usize, x: f64) -> (f64, f64) {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let (m0, m1) = self.slopes[i];
        let h = x1 - x0;
        let s = (x - x0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * f0 + h10 * h * m0 + h01 * f1 + h11 * h * m1;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let deriv = d00 * f0 + d10 * m0 + d01 * f1 + d11 * m1;
        (value, deriv)
    }

    /// Inverse of the interpolated CDF; clamps to the tabulated window.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.xs.len();
        if u <= self.cdf[0] {
            return self.xs[0];
        }
        if u >= self.cdf[n - 1] {
            return self.xs[n - 1];
        }
        let i = (self.cdf.partition_point(|&c| c <= u) - 1).min(n - 2);
        let (mut lo, mut hi) = (self.xs[i], self.xs[i + 1]);
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        // Start from the linear guess, then safeguarded Newton.
        let mut x = if c1 > c0 {
            lo + (u - c0) / (c1 - c0) * (hi - lo)
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..60 {
            let (v, d) = self.hermite(i, x);
            let r = v - u;
            if r.abs() < 1e-16 {
                break;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - r / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        x
    }
}

fn fritsch_carlson(h: f64, f0: f64, f1: f64, m0: f64, m1: f64) -> (f64, f64) {
    let delta = (f1 - f0) / h;
    if delta <= 0.0 {
        return (0.0, 0.0);
    }
    let a = m0 / delta;
    let b = m1 / delta;
    let norm = a * a + b * b;
    if norm > 9.0 {
        let tau = 3.0 / norm.sqrt();
        (tau * a * delta, tau * b * delta)
    } else {
        (m0, m1)
    }
}

/// Tabulates the inverse CDF of `density` on `support` with default options.
pub fn tabulate_inverse_cdf<F: Fn(f64) -> f64>(density: F, support: (f64, f64), tol: f64) -> Result<InverseCdf> {
    let mut opts = TabulationOptions::new(tol);
    let (a, b) = support;
    opts.center = match (a.is_finite(), b.is_finite()) {
        (true, true) => 0.5 * (a + b),
        (true, false) => a + 1.0,
        (false, true) => b - 1.0,
        (false, false) => 0.0,
    };
    tabulate_inverse_cdf_with(density, support, &opts)
}

pub fn tabulate_inverse_cdf_with<F: Fn(f64) -> f64>(
    density: F,
    support: (f64, f64),
    opts: &TabulationOptions,
) -> Result<InverseCdf> {
    let (a, b) = support;
    if !(a < b) {
        return Err(Error::Tabulation(format!("empty support ({a}, {b})")));
    }
    if !(opts.tol > 0.0) || !(opts.scale > 0.0) {
        return Err(Error::argument("tabulation needs tol > 0 and scale > 0"));
    }
    let f = |x: f64| {
        let v = density(x);
        if v.is_finite() {
            v.max(0.0)
        } else {
            0.0
        }
    };
    let center = opts.center.clamp(
        if a.is_finite() { a } else { f64::MIN },
        if b.is_finite() { b } else { f64::MAX },
    );
    let mass_opts = QuadratureOptions {
        rel_tol: (opts.tol * 1e-2).max(1e-14),
        points: vec![center],
        scale: opts.scale,
        ..Default::default()
    };
    let total = integrate_with(f, a, b, &mass_opts)
        .map_err(|e| Error::Tabulation(format!("mass integral: {e}")))?
        .value;
    if (total - 1.0).abs() > opts.tol {
        return Err(Error::Tabulation(format!(
            "density integrates to {total:.12}, not 1 within {:e}",
            opts.tol
        )));
    }

    let tail_tol = opts.tol * 1e-2;
    let tail_opts = QuadratureOptions {
        rel_tol: 1e-6,
        abs_tol: tail_tol * 1e-2,
        scale: opts.scale,
        ..Default::default()
    };
    let lower = if a.is_finite() {
        (a, 0.0)
    } else {
        find_cut(center, -opts.scale, tail_tol, |x| {
            integrate_with(f, f64::NEG_INFINITY, x, &tail_opts).map(|r| r.value)
        })?
    };
    let upper = if b.is_finite() {
        (b, 0.0)
    } else {
        find_cut(center, opts.scale, tail_tol, |x| {
            integrate_with(f, x, f64::INFINITY, &tail_opts).map(|r| r.value)
        })?
    };
    let (lo, lower_tail) = lower;
    let (hi, _) = upper;

    build_table(&f, lo, hi, lower_tail, opts)
}

fn find_cut<T>(center: f64, step: f64, tail_tol: f64, tail: T) -> Result<(f64, f64)>
where
    T: Fn(f64) -> Result<f64>,
{
    let mut width = step;
    for _ in 0..200 {
        let x = center + width;
        let m = tail(x).map_err(|e| Error::Tabulation(format!("tail integral: {e}")))?;
        if m.abs() <= tail_tol {
            return Ok((x, m.max(0.0)));
        }
        width *= 1.5;
    }
    Err(Error::Tabulation("could not locate a tail cut".into()))
}

fn build_table<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    lower_tail: f64,
    opts: &TabulationOptions,
) -> Result<InverseCdf> {
    let local_tol = opts.tol * 0.1;
    let piece_opts = QuadratureOptions {
        rel_tol: 1e-12,
        abs_tol: local_tol * 1e-3,
        ..Default::default()
    };
    let mass = |x0: f64, x1: f64| -> Result<f64> {
        integrate_with(f, x0, x1, &piece_opts)
            .map(|r| r.value)
            .map_err(|e| Error::Tabulation(format!("piece mass: {e}")))
    };
    let slope_at = |x: f64, fallback: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            fallback
        }
    };

    const INITIAL: usize = 64;
    let h0 = (hi - lo) / INITIAL as f64;
    // Work stack of intervals still to be accepted, processed left to right.
    let mut stack: Vec<(f64, f64, f64)> = Vec::new();
    for k in (0..INITIAL).rev() {
        let x0 = lo + h0 * k as f64;
        let x1 = if k + 1 == INITIAL { hi } else { lo + h0 * (k + 1) as f64 };
        stack.push((x0, x1, mass(x0, x1)?));
    }

    let mut xs = vec![lo];
    let mut cdf = vec![lower_tail];
    let mut slopes = Vec::new();
    let mut fx0 = slope_at(lo, 0.0);
    while let Some((x0, x1, m)) = stack.pop() {
        let mid = 0.5 * (x0 + x1);
        let left = mass(x0, mid)?;
        let right = mass(mid, x1)?;
        let h = x1 - x0;
        let c0 = *cdf.last().unwrap();
        let fx1 = slope_at(x1, m / h);
        let (m0, m1) = fritsch_carlson(h, c0, c0 + left + right, slope_at(x0, fx0), fx1);
        let hermite_mid = 0.5 * (c0 + c0 + left + right) + h * (m0 - m1) / 8.0;
        let err = (hermite_mid - (c0 + left)).abs() + (m - left - right).abs();
        let splittable = mid > x0 && mid < x1 && xs.len() + stack.len() < opts.max_nodes;
        if err > local_tol && splittable {
            stack.push((mid, x1, right));
            stack.push((x0, mid, left));
            continue;
        }
        xs.push(x1);
        cdf.push(c0 + left + right);
        slopes.push((m0, m1));
        fx0 = fx1;
    }

    let top = *cdf.last().unwrap();
    if (top - 1.0).abs() > opts.tol {
        return Err(Error::Tabulation(format!(
            "tabulated mass {top:.12} differs from 1 by more than {:e}",
            opts.tol
        )));
    }
    Ok(InverseCdf { xs, cdf, slopes })
}
