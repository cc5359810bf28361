//! Moment identities behind the quadratic-variance formula.

use rayon::prelude::*;
use serde::Serialize;

use super::regression::mean_and_se;
use super::MomentCheckReport;
use crate::error::{Error, Result};
use crate::nef_family::FamilySpec;
use crate::process_sim::path_rng;
use crate::randomization::RandomizationLaw;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactCheck {
    pub value: f64,
    pub reference: f64,
    /// Relative error, or absolute error where the reference is 0.
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ExactCheck {
    pub fn new(value: f64, reference: f64, tolerance: f64) -> Self {
        let error = relative_error(value, reference);
        ExactCheck {
            value,
            reference,
            error,
            tolerance,
            pass: error <= tolerance,
        }
    }
}

fn relative_error(value: f64, reference: f64) -> f64 {
    let d = (value - reference).abs();
    if reference == 0.0 {
        d
    } else {
        d / reference.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmazingReport {
    /// Sample mean of s kappa''(Theta) against s r v^2.
    pub monte_carlo: MomentCheckReport,
    /// Quadrature of kappa'' against the randomization law, against r v^2.
    pub exact: ExactCheck,
    pub pass: bool,
}

/// E[Var(Y_s | Theta)] = E[s kappa''(Theta)] equals s r Var(kappa'(Theta)).
pub fn identity_amazing(
    family: &FamilySpec,
    p: f64,
    r: f64,
    s: f64,
    n_paths: usize,
    seed: u64,
) -> Result<AmazingReport> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::argument(format!("time must be positive, got {s}")));
    }
    if n_paths < 2 {
        return Err(Error::argument("need at least two draws"));
    }
    let law = RandomizationLaw::new(*family, p, r)?;
    let v2 = law.kprime_moments().variance;
    let kpp: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let theta = law.sample_theta(&mut path_rng(seed, i as u64));
            family.cumulants(theta).map(|c| c.kappa_double_prime)
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_se(n_paths, |i| s * kpp[i]);
    let monte_carlo = MomentCheckReport::new(mean, s * r * v2, se, n_paths);
    let integral = law.expectation(|th| family.cumulants(th).map_or(0.0, |c| c.kappa_double_prime), 1e-12)?;
    let exact = ExactCheck::new(integral, r * v2, 1e-8);
    let pass = monte_carlo.pass && exact.pass;
    Ok(AmazingReport {
        monte_carlo,
        exact,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinivvReport {
    /// Worst case over xi_u = 0..=`ENUMERATION_MAX` (discrete families).
    pub exact: Option<ExactCheck>,
    /// Per-bin mean of e^2 - formula(xi_u), against 0 (continuous families).
    pub bins: Vec<MomentCheckReport>,
    pub pass: bool,
}

pub const ENUMERATION_MAX: usize = 50;
const BINS: usize = 10;

/// Var(xi_t | xi_u) = t (u - t) / (u + a) V(xi_u / u) for the Lévy process at
/// fixed theta. Discrete families are enumerated exactly; continuous ones are
/// checked on `n_paths` simulated pairs binned by deciles of xi_u.
pub fn identity_minivv(
    family: &FamilySpec,
    theta: f64,
    t: f64,
    u: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MinivvReport> {
    if !(0.0 < t && t < u && u.is_finite()) {
        return Err(Error::argument(format!("need 0 < t < u, got ({t}, {u})")));
    }
    family.check_theta(theta)?;
    let vc = family.variance_coeffs();
    let formula = |xu: f64| t * (u - t) / (u + vc.a) * vc.eval(xu / u);

    if family.is_discrete() {
        let mut worst = ExactCheck::new(0.0, 0.0, 1e-10);
        for n in 0..=ENUMERATION_MAX {
            let mut w = Vec::with_capacity(n + 1);
            for k in 0..=n {
                let a = family.ln_increment_density(theta, t, k as f64)?;
                let b = family.ln_increment_density(theta, u - t, (n - k) as f64)?;
                w.push(a + b);
            }
            let top = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let probs: Vec<f64> = w.iter().map(|l| (l - top).exp()).collect();
            let total: f64 = probs.iter().sum();
            let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum::<f64>() / total;
            let var: f64 = probs
                .iter()
                .enumerate()
                .map(|(k, p)| (k as f64 - mean).powi(2) * p)
                .sum::<f64>()
                / total;
            let check = ExactCheck::new(var, formula(n as f64), 1e-10);
            if check.error > worst.error || n == 0 {
                worst = check;
            }
        }
        let pass = worst.pass;
        return Ok(MinivvReport {
            exact: Some(worst),
            bins: Vec::new(),
            pass,
        });
    }

    if n_paths < 2 * BINS {
        return Err(Error::argument(format!("need at least {} draws", 2 * BINS)));
    }
    let pairs: Vec<(f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let a = family.increment_sample(theta, t, &mut rng)?;
            let b = family.increment_sample(theta, u - t, &mut rng)?;
            let xu = a + b;
            let e = a - t / u * xu;
            Ok((xu, e * e - formula(xu)))
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n_paths).collect();
    order.sort_by(|&i, &j| pairs[i].0.total_cmp(&pairs[j].0).then(i.cmp(&j)));
    let bins: Vec<MomentCheckReport> = (0..BINS)
        .map(|b| {
            let idx = &order[b * n_paths / BINS..(b + 1) * n_paths / BINS];
            let (mean, se) = mean_and_se(idx.len(), |k| pairs[idx[k]].1);
            MomentCheckReport::new(mean, 0.0, se, idx.len())
        })
        .collect();
    let pass = bins.iter().all(|b| b.pass);
    Ok(MinivvReport {
        exact: None,
        bins,
        pass,
    })
}
