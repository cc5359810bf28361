//! Check suites behind the subcommands.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::CheckEntry;
use crate::error::Result;
use crate::nef_family::{FamilyKind, FamilySpec};
use crate::process_sim::{path_rng, simulate_y, simulate_z, PathBatch, StitchConfig, TimeGrid};
use crate::qh_verify::regression::mean_and_se;
use crate::qh_verify::{
    covariance_check, harness_regression, identity_amazing, identity_minivv, martingale_check, qh_params_closed_form,
    qh_params_from_theorem, qvar_regression, theta_given_y_check, theta_posterior_check, ExactCheck, MomentCheckReport,
};
use crate::quadrature::{abs_gamma_sq, integrate_with, QuadratureOptions};
use crate::randomization::{check_assumptions, default_support_points, DecayCondition, RandomizationLaw};

fn moment(name: String, m: MomentCheckReport, threshold: f64) -> CheckEntry {
    CheckEntry::moment(name, &m.with_threshold(threshold))
}

fn fmt_times(ts: &[f64]) -> String {
    ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

/// Theorem formula against the per-family closed forms.
pub fn params(cfg: &ExperimentConfig) -> Result<Vec<CheckEntry>> {
    let a = qh_params_from_theorem(&cfg.spec, cfg.p, cfg.r)?;
    let b = qh_params_closed_form(&cfg.spec, cfg.p, cfg.r)?;
    Ok([
        ("alpha", a.alpha, b.alpha),
        ("beta", a.beta, b.beta),
        ("sigma", a.sigma, b.sigma),
        ("tau", a.tau, b.tau),
        ("gamma", a.gamma, b.gamma),
    ]
    .into_iter()
    .map(|(name, theorem, closed)| {
        CheckEntry::exact(format!("params.{name}"), &ExactCheck::new(theorem, closed, 1e-12))
    })
    .collect())
}

/// Mean and variance of kappa'(Theta): sampled and by quadrature.
pub fn moments(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<CheckEntry>> {
    let law = RandomizationLaw::new(cfg.spec, cfg.p, cfg.r)?;
    let exact = law.kprime_moments();
    let n = cfg.paths;
    let km: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let theta = law.sample_theta(&mut path_rng(seed, i as u64));
            cfg.spec.kappa_prime(theta)
        })
        .collect::<Result<_>>()?;
    let (mean, mean_se) = mean_and_se(n, |i| km[i]);
    let (var, var_se) = mean_and_se(n, |i| (km[i] - mean).powi(2));
    let var = var * n as f64 / (n as f64 - 1.0);
    let quad = law.kprime_moments_by_quadrature()?;
    Ok(vec![
        moment(
            "moments.mean.monte_carlo".into(),
            MomentCheckReport::new(mean, exact.mean, mean_se, n),
            cfg.threshold,
        ),
        moment(
            "moments.variance.monte_carlo".into(),
            MomentCheckReport::new(var, exact.variance, var_se, n),
            cfg.threshold,
        ),
        CheckEntry::exact("moments.mean.quadrature", &ExactCheck::new(quad.mean, exact.mean, 1e-8)),
        CheckEntry::exact(
            "moments.variance.quadrature",
            &ExactCheck::new(quad.variance, exact.variance, 1e-8),
        ),
    ])
}

pub fn simulate_z_batch(cfg: &ExperimentConfig, seed: u64) -> Result<PathBatch> {
    let stitch = StitchConfig::new(cfg.spec, cfg.p, cfg.r)?;
    simulate_z(&stitch, &TimeGrid::new(cfg.grid.clone())?, cfg.paths, seed)
}

pub fn covariance(cfg: &ExperimentConfig, batch: &PathBatch) -> Result<Vec<CheckEntry>> {
    let pairs: Vec<(f64, f64)> = cfg.pairs.iter().map(|&[s, u]| (s, u)).collect();
    Ok(covariance_check(batch, &pairs)?
        .into_iter()
        .zip(&pairs)
        .map(|(m, &(s, u))| moment(format!("covariance[{}]", fmt_times(&[s, u])), m, cfg.threshold))
        .collect())
}

pub fn harness(cfg: &ExperimentConfig, batch: &PathBatch) -> Result<Vec<CheckEntry>> {
    let mut out = Vec::new();
    for &[s, t, u] in &cfg.triples {
        let rep = harness_regression(batch, s, t, u)?.with_threshold(cfg.threshold);
        out.extend(CheckEntry::regression(
            &format!("harness[{}]", fmt_times(&[s, t, u])),
            &rep,
        ));
    }
    Ok(out)
}

pub fn qvar(cfg: &ExperimentConfig, batch: &PathBatch) -> Result<Vec<CheckEntry>> {
    let params = qh_params_from_theorem(&cfg.spec, cfg.p, cfg.r)?;
    let mut out = Vec::new();
    for &[s, t, u] in &cfg.triples {
        let rep = qvar_regression(batch, s, t, u, &params)?.with_threshold(cfg.threshold);
        out.extend(CheckEntry::regression(
            &format!("qvar[{}]", fmt_times(&[s, t, u])),
            &rep,
        ));
    }
    Ok(out)
}

/// Moment identities, the martingale property of Y and the posterior mean
/// of kappa'(Theta).
pub fn identities(cfg: &ExperimentConfig, seed: u64, z_batch: &PathBatch) -> Result<Vec<CheckEntry>> {
    let th = cfg.threshold;
    let mut out = Vec::new();
    let amazing = identity_amazing(&cfg.spec, cfg.p, cfg.r, 1.0, cfg.paths, seed)?;
    out.push(moment("amazing[s=1].monte_carlo".into(), amazing.monte_carlo, th));
    out.push(CheckEntry::exact("amazing[s=1].quadrature", &amazing.exact));

    let theta = cfg.spec.kappa_prime_inverse(cfg.p / cfg.r)?;
    let minivv = identity_minivv(&cfg.spec, theta, 1.0, 2.0, cfg.paths, seed)?;
    if let Some(e) = &minivv.exact {
        out.push(CheckEntry::exact("minivv[t=1,u=2].enumeration", e));
    }
    for (b, m) in minivv.bins.into_iter().enumerate() {
        out.push(moment(format!("minivv[t=1,u=2].bin{b}"), m, th));
    }

    let law = RandomizationLaw::new(cfg.spec, cfg.p, cfg.r)?;
    let y = simulate_y(&law, &TimeGrid::new(vec![0.5, 1.0, 2.0])?, cfg.paths, seed)?;
    for (s, t) in [(0.5, 1.0), (1.0, 2.0)] {
        let rep = martingale_check(&y, s, t, cfg.p, cfg.r)?.with_threshold(th);
        out.extend(CheckEntry::regression(
            &format!("martingale[{}]", fmt_times(&[s, t])),
            &rep,
        ));
    }
    let rep = theta_given_y_check(&y, &law, 1.0)?.with_threshold(th);
    out.extend(CheckEntry::regression("theta_given_y[1]", &rep));

    let times = z_batch.grid().times();
    let s = times.iter().copied().filter(|&t| t < 1.0).fold(f64::NAN, f64::max);
    let u = times.iter().copied().find(|&t| t > 1.0);
    if let (false, Some(u)) = (s.is_nan(), u) {
        let rep = theta_posterior_check(z_batch, &law, s, u)?.with_threshold(th);
        out.extend(CheckEntry::regression(
            &format!("theta_posterior[{}]", fmt_times(&[s, u])),
            &rep,
        ));
    }
    Ok(out)
}

/// Decay of the randomization integrand at both ends of the theta domain.
pub fn assumptions(cfg: &ExperimentConfig) -> Result<Vec<CheckEntry>> {
    let pts = default_support_points(&cfg.spec)?;
    let rep = check_assumptions(&cfg.spec, cfg.p, cfg.r, &pts);
    let threshold = crate::randomization::AssumptionOptions::default().threshold;
    Ok(rep
        .checks
        .iter()
        .map(|c| {
            let cond = match c.condition {
                DecayCondition::Integrand => "integrand",
                DecayCondition::WeightedIntegrand => "weighted",
            };
            CheckEntry {
                name: format!("assumption[x={},endpoint={}].{cond}", c.support_point, c.endpoint),
                theory: threshold,
                estimate: 10f64.powf(c.final_log10),
                std_error: 0.0,
                z: None,
                pass: c.pass,
            }
        })
        .collect())
}

fn density_total<F: Fn(f64) -> f64>(family: &FamilySpec, f: F, center: f64, scale: f64) -> Result<f64> {
    if family.is_discrete() {
        let mut total = 0.0;
        let kmax = (center + 60.0 * scale + 100.0).ceil() as usize;
        for k in 0..=kmax {
            total += f(k as f64);
        }
        return Ok(total);
    }
    let lo = if family.kind() == FamilyKind::Gamma {
        0.0
    } else {
        f64::NEG_INFINITY
    };
    let opts = QuadratureOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        points: if lo < center { vec![center] } else { vec![] },
        scale,
        ..Default::default()
    };
    Ok(integrate_with(f, lo, f64::INFINITY, &opts)?.value)
}

/// Total mass, mean and variance of the increment density at each time; for
/// the hyperbolic secant also |Gamma(1 + ix)|^2 against pi x / sinh(pi x).
pub fn density(family: &FamilySpec, theta: f64, times: &[f64]) -> Result<Vec<CheckEntry>> {
    let mut out = Vec::new();
    for &t in times {
        let c = family.cumulants(theta)?;
        let (m, v) = (t * c.kappa_prime, t * c.kappa_double_prime);
        let scale = v.sqrt();
        let dens = |x: f64| family.increment_density(theta, t, x).unwrap_or(0.0);
        let mass = density_total(family, dens, m, scale)?;
        let mean = density_total(family, |x| x * dens(x), m, scale)?;
        let var = density_total(family, |x| (x - m).powi(2) * dens(x), m, scale)?;
        let tag = format!("density[t={t},theta={theta}]");
        out.push(CheckEntry::exact(
            format!("{tag}.mass"),
            &ExactCheck::new(mass, 1.0, 1e-8),
        ));
        out.push(CheckEntry::exact(
            format!("{tag}.mean"),
            &ExactCheck::new(mean, m, 1e-8),
        ));
        out.push(CheckEntry::exact(
            format!("{tag}.variance"),
            &ExactCheck::new(var, v, 1e-8),
        ));
    }
    if family.kind() == FamilyKind::HyperbolicSecant {
        for x in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let px = std::f64::consts::PI * x;
            out.push(CheckEntry::exact(
                format!("abs_gamma_sq[t=1,x={x}]"),
                &ExactCheck::new(abs_gamma_sq(1.0, x)?, px / px.sinh(), 1e-10),
            ));
        }
    }
    Ok(out)
}
