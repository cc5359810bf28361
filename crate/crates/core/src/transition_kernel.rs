//! Transition densities of the randomized process Y: the function H, forward
//! kernels H(t, y) / H(s, x) g_{t-s}(y - x), reversed-time (bridge) kernels
//! of the untilted process, and goodness-of-fit tests of simulated paths
//! against them.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::nef_family::{FamilyKind, FamilySpec};
use crate::process_sim::PathBatch;
use crate::quadrature::{integrate_with, QuadratureOptions};
use crate::randomization::{ln_tilted_integral, normalizing_constant, RandomizationLaw};

/// Densities below this are treated as out of support in Bayes ratios.
const UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct KernelContext {
    law: RandomizationLaw,
    tol: f64,
}

/// A kernel value plus whether the conditioning density underflowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub out_of_support: bool,
}

impl KernelContext {
    pub fn new(law: RandomizationLaw, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol <= 1e-4) {
            return Err(Error::argument(format!(
                "kernel tolerance must lie in (0, 1e-4], got {tol}"
            )));
        }
        Ok(KernelContext { law, tol })
    }

    pub fn law(&self) -> &RandomizationLaw {
        &self.law
    }

    pub fn family(&self) -> &FamilySpec {
        self.law.family()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    fn check_point(&self, t: f64, x: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() || !x.is_finite() {
            return Err(Error::argument(format!("H needs t >= 0 and finite x, got ({t}, {x})")));
        }
        Ok(())
    }

    /// ln H(t, x). Closed forms through the normalizing constants, except
    /// for the hyperbolic secant which goes through quadrature.
    pub fn ln_h_function(&self, t: f64, x: f64) -> Result<f64> {
        self.check_point(t, x)?;
        if t == 0.0 && x == 0.0 {
            return Ok(0.0);
        }
        if self.family().kind() == FamilyKind::HyperbolicSecant {
            return self.ln_h_function_by_quadrature(t, x);
        }
        let (p, r) = (self.law.p(), self.law.r());
        Ok(self.law.log_c() - normalizing_constant(self.family(), p + x, r + t)?)
    }

    pub fn ln_h_function_by_quadrature(&self, t: f64, x: f64) -> Result<f64> {
        self.check_point(t, x)?;
        let (p, r) = (self.law.p(), self.law.r());
        let rel_tol = self.tol.clamp(1e-14, 1e-4);
        Ok(self.law.log_c() + ln_tilted_integral(self.family(), p + x, r + t, rel_tol)?)
    }

    /// H(t, x) = E exp(x Theta - t kappa(Theta)).
    pub fn h_function(&self, t: f64, x: f64) -> Result<f64> {
        self.ln_h_function(t, x).map(f64::exp)
    }

    pub fn h_function_by_quadrature(&self, t: f64, x: f64) -> Result<f64> {
        self.ln_h_function_by_quadrature(t, x).map(f64::exp)
    }

    /// Density (or mass) of Y_t = y given Y_s = x.
    pub fn forward_transition_density(&self, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        if !(s >= 0.0 && s < t) {
            return Err(Error::argument(format!(
                "forward kernel needs 0 <= s < t, got s={s}, t={t}"
            )));
        }
        let g = self.family().ln_increment_density(0.0, t - s, y - x)?;
        if g == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        Ok((self.ln_h_function(t, y)? - self.ln_h_function(s, x)? + g).exp())
    }

    /// Conditional CDF of Y_t at y given Y_s = x, by quadrature (continuous
    /// families) or summation (discrete ones).
    pub fn forward_cdf(&self, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        let family = *self.family();
        if family.is_discrete() {
            let mut total = 0.0;
            let mut k = x.max(0.0).ceil();
            while k <= y {
                total += self.forward_transition_density(s, x, t, k)?;
                k += 1.0;
            }
            return Ok(total.min(1.0));
        }
        let lower = if family.kind() == FamilyKind::Gamma {
            x
        } else {
            f64::NEG_INFINITY
        };
        if y <= lower {
            return Ok(0.0);
        }
        let (p, r) = (self.law.p(), self.law.r());
        let m = (x + p) / (s + r);
        let mean = x + (t - s) * m;
        let v = family.variance_function(m).max(1e-3);
        let scale = ((t - s) * v * (1.0 + (t - s) / (s + r))).sqrt();
        let f = |z: f64| self.forward_transition_density(s, x, t, z).unwrap_or(0.0);
        tail_cdf(f, lower, f64::INFINITY, mean, scale, y)
    }

    /// Same as [`reversed_transition_density`]; the randomization plays no
    /// part.
    pub fn reversed_transition_density(&self, t: f64, y: f64, s: f64, x: f64) -> Result<KernelValue> {
        reversed_transition_density(self.family(), t, y, s, x)
    }
}

/// Density (or mass) of Y_s = x given Y_t = y for s < t: the bridge
/// g_s(x) g_{t-s}(y - x) / g_t(y) of the untilted process.
pub fn reversed_transition_density(family: &FamilySpec, t: f64, y: f64, s: f64, x: f64) -> Result<KernelValue> {
    if !(s > 0.0 && s < t) {
        return Err(Error::argument(format!(
            "reversed kernel needs 0 < s < t, got s={s}, t={t}"
        )));
    }
    let denom = family.ln_increment_density(0.0, t, y)?;
    if denom < UNDERFLOW.ln() {
        return Ok(KernelValue {
            value: 0.0,
            out_of_support: true,
        });
    }
    let num = family.ln_increment_density(0.0, s, x)? + family.ln_increment_density(0.0, t - s, y - x)?;
    Ok(KernelValue {
        value: (num - denom).exp(),
        out_of_support: false,
    })
}

/// CDF of the bridge law of Y_s given Y_t = y, at x.
pub fn reversed_cdf(family: &FamilySpec, t: f64, y: f64, s: f64, x: f64) -> Result<f64> {
    if family.is_discrete() {
        let mut total = 0.0;
        let mut k = 0.0;
        while k <= x.min(y) {
            total += reversed_transition_density(family, t, y, s, k)?.value;
            k += 1.0;
        }
        return Ok(total.min(1.0));
    }
    let (lower, upper) = if family.kind() == FamilyKind::Gamma {
        (0.0, y)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    if x <= lower {
        return Ok(0.0);
    }
    if x >= upper {
        return Ok(1.0);
    }
    let scale = (s * (t - s) / t).sqrt() * family.variance_function(y / t).max(1e-3).sqrt();
    let centre = s / t * y;
    let f = |z: f64| {
        reversed_transition_density(family, t, y, s, z)
            .map(|k| k.value)
            .unwrap_or(0.0)
    };
    tail_cdf(f, lower, upper, centre, scale, x)
}

/// CDF at `at` of a unit-mass density on (lower, upper), integrating
/// whichever side of `centre` holds `at`.
fn tail_cdf<F: Fn(f64) -> f64>(f: F, lower: f64, upper: f64, centre: f64, scale: f64, at: f64) -> Result<f64> {
    let opts = QuadratureOptions {
        rel_tol: 1e-9,
        abs_tol: 1e-13,
        scale,
        ..Default::default()
    };
    let value = if at <= centre {
        integrate_with(f, lower, at, &opts)?.value
    } else {
        1.0 - integrate_with(f, at, upper, &opts)?.value
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Outcome of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub pass: bool,
}

impl GoodnessOfFit {
    fn from_statistic(statistic: f64, dof: usize, alpha: f64) -> Result<Self> {
        if dof == 0 {
            return Err(Error::argument("goodness-of-fit test with no degrees of freedom"));
        }
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::argument(e.to_string()))?;
        let p_value = dist.sf(statistic);
        Ok(GoodnessOfFit {
            statistic,
            dof,
            p_value,
            alpha,
            pass: p_value >= alpha,
        })
    }
}

/// Pearson statistic and bin count after merging neighbouring bins until
/// each expected count is at least `min_expected`.
pub fn pooled_chi_square(observed: &[f64], expected: &[f64], min_expected: f64) -> (f64, usize) {
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= min_expected {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    let stat = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, pooled.len())
}

/// Chi-square test of uniformity of probability-integral-transform values
/// on `bins` equiprobable bins.
pub fn pit_uniformity(us: &[f64], bins: usize, alpha: f64) -> Result<GoodnessOfFit> {
    let mut counts = vec![0.0; bins];
    for &u in us {
        let b = ((u * bins as f64) as usize).min(bins - 1);
        counts[b] += 1.0;
    }
    let e = us.len() as f64 / bins as f64;
    let stat = counts.iter().map(|o| (o - e) * (o - e) / e).sum();
    GoodnessOfFit::from_statistic(stat, bins - 1, alpha)
}

/// Discrete families: paths grouped by the exact value of the conditioning
/// column; each group with at least `min_group` paths contributes a pooled
/// chi-square. `kernel(c, v)` is the conditional mass at v given c.
fn discrete_groups<K>(cond: &[f64], target: &[f64], min_group: usize, kernel: K) -> Result<(f64, usize)>
where
    K: Fn(f64, f64) -> Result<f64>,
{
    let mut groups: std::collections::BTreeMap<i64, Vec<i64>> = std::collections::BTreeMap::new();
    for (&c, &v) in cond.iter().zip(target) {
        groups.entry(c as i64).or_default().push(v as i64);
    }
    let (mut stat, mut dof) = (0.0, 0);
    for (c, vs) in groups {
        if vs.len() < min_group {
            continue;
        }
        let lo = *vs.iter().min().unwrap();
        let hi = *vs.iter().max().unwrap();
        let n = vs.len() as f64;
        let mut observed = vec![0.0; (hi - lo + 1) as usize];
        for v in &vs {
            observed[(v - lo) as usize] += 1.0;
        }
        let mut expected: Vec<f64> = (lo..=hi)
            .map(|v| kernel(c as f64, v as f64).map(|p| n * p))
            .collect::<Result<_>>()?;
        // fold the mass outside [lo, hi] into the end bins
        let inside: f64 = expected.iter().sum();
        let below: f64 = (0..lo)
            .map(|v| kernel(c as f64, v as f64).map(|p| n * p))
            .sum::<Result<f64>>()?;
        expected[0] += below;
        let last = expected.len() - 1;
        expected[last] += (n - inside - below).max(0.0);
        let (s, bins) = pooled_chi_square(&observed, &expected, 5.0);
        if bins > 1 {
            stat += s;
            dof += bins - 1;
        }
    }
    Ok((stat, dof))
}

/// Tests simulated transitions Y_s -> Y_t of a Y batch against the forward
/// kernel. Discrete families are binned exactly per value of Y_s; continuous
/// ones use the transform u = F(Y_t | Y_s) on 30 equiprobable bins.
pub fn forward_goodness_of_fit(
    ctx: &KernelContext,
    batch: &PathBatch,
    s: f64,
    t: f64,
    alpha: f64,
) -> Result<GoodnessOfFit> {
    let xs = batch.column(s)?;
    let ys = batch.column(t)?;
    if ctx.family().is_discrete() {
        let (stat, dof) = discrete_groups(xs, ys, 200, |x, y| ctx.forward_transition_density(s, x, t, y))?;
        return GoodnessOfFit::from_statistic(stat, dof, alpha);
    }
    let us: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| ctx.forward_cdf(s, x, t, y))
        .collect::<Result<_>>()?;
    pit_uniformity(&us, 30, alpha)
}

/// Tests simulated pairs (Y_s, Y_t) against the bridge law of Y_s given Y_t.
pub fn reversed_goodness_of_fit(
    family: &FamilySpec,
    batch: &PathBatch,
    s: f64,
    t: f64,
    alpha: f64,
) -> Result<GoodnessOfFit> {
    let xs = batch.column(s)?;
    let ys = batch.column(t)?;
    if family.is_discrete() {
        let (stat, dof) = discrete_groups(ys, xs, 200, |y, x| {
            reversed_transition_density(family, t, y, s, x).map(|k| k.value)
        })?;
        return GoodnessOfFit::from_statistic(stat, dof, alpha);
    }
    let us: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| reversed_cdf(family, t, y, s, x))
        .collect::<Result<_>>()?;
    pit_uniformity(&us, 30, alpha)
}
