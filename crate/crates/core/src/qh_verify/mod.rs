//! Quadratic-harness parameters of the stitched process and the statistical
//! checks run against simulated batches.
//!
//! Every Monte Carlo check reports estimate, theory and a standard error and
//! passes when |z| <= threshold (4 by default, per coefficient; no
//! multiplicity correction is applied).

mod identities;
pub mod regression;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nef_family::{FamilyKind, FamilySpec};
use crate::process_sim::{PathBatch, ProcessTag};
use crate::randomization::{check_admissible, RandomizationLaw};
use regression::{mean_and_se, ols_hc0, OlsFit};

pub use identities::{identity_amazing, identity_minivv, AmazingReport, ExactCheck, MinivvReport};

pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

/// Constants of the conditional variance of a quadratic harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QHParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub tau: f64,
    pub gamma: f64,
}

impl QHParams {
    /// Coefficients of (1, tilde_delta, delta, tilde_delta^2, delta^2,
    /// tilde_delta*delta) in the conditional variance, before the F factor.
    pub fn variance_vector(&self) -> [f64; 6] {
        [1.0, self.alpha, self.beta, self.sigma, self.tau, -(1.0 - self.gamma)]
    }
}

/// Parameters of the stitched process from the variance function:
/// alpha = beta = V'(m) / sqrt(V(m) (r - a)), sigma = tau = a / (r - a).
pub fn qh_params_from_theorem(family: &FamilySpec, p: f64, r: f64) -> Result<QHParams> {
    check_admissible(family, p, r)?;
    let vc = family.variance_coeffs();
    if !(r > vc.a) {
        return Err(Error::argument(format!("need r > {}, got r = {r}", vc.a)));
    }
    let m = p / r;
    let vm = vc.eval(m);
    if !(vm > 0.0) {
        return Err(Error::argument(format!("V(p/r) = {vm} is not positive")));
    }
    let alpha = vc.derivative(m) / (vm * (r - vc.a)).sqrt();
    let sigma = vc.a / (r - vc.a);
    Ok(QHParams {
        alpha,
        beta: alpha,
        sigma,
        tau: sigma,
        gamma: 1.0 + 2.0 * (sigma * sigma).sqrt(),
    })
}

/// The same parameters from the per-family closed forms.
pub fn qh_params_closed_form(family: &FamilySpec, p: f64, r: f64) -> Result<QHParams> {
    check_admissible(family, p, r)?;
    let (alpha, sigma) = match family.kind() {
        FamilyKind::Wiener => (0.0, 0.0),
        FamilyKind::Poisson => (1.0 / p.sqrt(), 0.0),
        FamilyKind::Gamma => (2.0 / (r - 1.0).sqrt(), 1.0 / (r - 1.0)),
        FamilyKind::NegativeBinomial => ((r + 2.0 * p) / (p * (p + r) * (r - 1.0)).sqrt(), 1.0 / (r - 1.0)),
        FamilyKind::HyperbolicSecant => (
            2.0 * p / ((p * p + r * r) * (2.0 * r - 1.0)).sqrt(),
            1.0 / (2.0 * r - 1.0),
        ),
    };
    Ok(QHParams {
        alpha,
        beta: alpha,
        sigma,
        tau: sigma,
        gamma: 1.0 + 2.0 * sigma,
    })
}

fn check_triple(s: f64, t: f64, u: f64) -> Result<()> {
    if !(0.0 < s && s < t && t < u && u.is_finite()) {
        return Err(Error::argument(format!("need 0 < s < t < u, got ({s}, {t}, {u})")));
    }
    Ok(())
}

/// F_{t,s,u} = (u - t)(t - s) / (u (1 + s sigma) + tau - s gamma).
pub fn f_coefficient(params: &QHParams, s: f64, t: f64, u: f64) -> Result<f64> {
    check_triple(s, t, u)?;
    let den = u * (1.0 + s * params.sigma) + params.tau - s * params.gamma;
    if !(den > 0.0) {
        return Err(Error::argument(format!("F denominator {den} is not positive")));
    }
    Ok((u - t) * (t - s) / den)
}

fn z_score(estimate: f64, theory: f64, std_error: f64) -> f64 {
    let d = estimate - theory;
    if d == 0.0 {
        0.0
    } else {
        d / std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheckReport {
    pub estimate: f64,
    pub theory: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub n: usize,
    pub threshold: f64,
    pub pass: bool,
}

impl MomentCheckReport {
    pub fn new(estimate: f64, theory: f64, std_error: f64, n: usize) -> Self {
        let z_score = z_score(estimate, theory, std_error);
        MomentCheckReport {
            estimate,
            theory,
            std_error,
            z_score,
            n,
            threshold: DEFAULT_Z_THRESHOLD,
            pass: z_score.abs() <= DEFAULT_Z_THRESHOLD,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.pass = self.z_score.abs() <= threshold;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    /// Names of the fitted features.
    pub features: Vec<String>,
    pub coefficients: Vec<f64>,
    pub theory_coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance_of_estimates: Vec<Vec<f64>>,
    pub z_scores: Vec<f64>,
    /// Features removed because the design was numerically singular.
    pub dropped: Vec<String>,
    pub n: usize,
    pub threshold: f64,
    pub pass: bool,
}

impl RegressionReport {
    fn from_fit(fit: OlsFit, names: &[&str], theory: &[f64]) -> Self {
        let std_errors: Vec<f64> = (0..fit.kept.len())
            .map(|a| fit.covariance[a][a].max(0.0).sqrt())
            .collect();
        let theory_coefficients: Vec<f64> = fit.kept.iter().map(|&j| theory[j]).collect();
        let z_scores: Vec<f64> = fit
            .coefficients
            .iter()
            .zip(&theory_coefficients)
            .zip(&std_errors)
            .map(|((&b, &th), &se)| z_score(b, th, se))
            .collect();
        let dropped = (0..names.len())
            .filter(|j| !fit.kept.contains(j))
            .map(|j| names[j].to_string())
            .collect();
        let report = RegressionReport {
            features: fit.kept.iter().map(|&j| names[j].to_string()).collect(),
            coefficients: fit.coefficients,
            theory_coefficients,
            std_errors,
            covariance_of_estimates: fit.covariance,
            z_scores,
            dropped,
            n: fit.n,
            threshold: DEFAULT_Z_THRESHOLD,
            pass: false,
        };
        report.with_threshold(DEFAULT_Z_THRESHOLD)
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.pass = self.z_scores.iter().all(|z| z.abs() <= threshold);
        self
    }
}

fn require_tag(batch: &PathBatch, tag: ProcessTag) -> Result<()> {
    if batch.tag() != tag {
        return Err(Error::argument(format!(
            "expected a {tag:?} batch, got {:?}",
            batch.tag()
        )));
    }
    Ok(())
}

/// Sample covariance of (Z_s, Z_u) against min(s, u), one report per pair.
pub fn covariance_check(batch: &PathBatch, pairs: &[(f64, f64)]) -> Result<Vec<MomentCheckReport>> {
    let n = batch.n_paths();
    if n < 2 {
        return Err(Error::argument("need at least two paths"));
    }
    pairs
        .iter()
        .map(|&(s, u)| {
            let (zs, zu) = (batch.column(s)?, batch.column(u)?);
            let (ms, _) = mean_and_se(n, |i| zs[i]);
            let (mu, _) = mean_and_se(n, |i| zu[i]);
            let (c, se) = mean_and_se(n, |i| (zs[i] - ms) * (zu[i] - mu));
            let est = c * n as f64 / (n as f64 - 1.0);
            Ok(MomentCheckReport::new(est, s.min(u), se, n))
        })
        .collect()
}

/// Regression of Z_t on (1, Z_s, Z_u); theory (0, (u-t)/(u-s), (t-s)/(u-s)).
pub fn harness_regression(batch: &PathBatch, s: f64, t: f64, u: f64) -> Result<RegressionReport> {
    check_triple(s, t, u)?;
    require_tag(batch, ProcessTag::Z)?;
    let (zs, zt, zu) = (batch.column(s)?, batch.column(t)?, batch.column(u)?);
    let fit = ols_hc0(batch.n_paths(), 3, |i, x| {
        x.copy_from_slice(&[1.0, zs[i], zu[i]]);
        zt[i]
    })?;
    let theory = [0.0, (u - t) / (u - s), (t - s) / (u - s)];
    Ok(RegressionReport::from_fit(fit, &["1", "z_s", "z_u"], &theory))
}

pub const QVAR_FEATURES: [&str; 6] = [
    "1",
    "tilde_delta",
    "delta",
    "tilde_delta^2",
    "delta^2",
    "tilde_delta*delta",
];

/// Regression of the squared interpolation residual of Z_t on the quadratic
/// features of (Z_s, Z_u); theory F_{t,s,u} (1, alpha, beta, sigma, tau, -(1-gamma)).
pub fn qvar_regression(batch: &PathBatch, s: f64, t: f64, u: f64, params: &QHParams) -> Result<RegressionReport> {
    check_triple(s, t, u)?;
    require_tag(batch, ProcessTag::Z)?;
    let f = f_coefficient(params, s, t, u)?;
    let (zs, zt, zu) = (batch.column(s)?, batch.column(t)?, batch.column(u)?);
    let (ws, wu) = ((u - t) / (u - s), (t - s) / (u - s));
    let fit = ols_hc0(batch.n_paths(), 6, |i, x| {
        let delta = (zu[i] - zs[i]) / (u - s);
        let tilde = (u * zs[i] - s * zu[i]) / (u - s);
        x.copy_from_slice(&[1.0, tilde, delta, tilde * tilde, delta * delta, tilde * delta]);
        let e = zt[i] - ws * zs[i] - wu * zu[i];
        e * e
    })?;
    let theory = params.variance_vector().map(|c| f * c);
    Ok(RegressionReport::from_fit(fit, &QVAR_FEATURES, &theory))
}

/// Regression of Y_t - Y_s on (1, Y_s); theory ((t-s) p/(s+r), (t-s)/(s+r)).
pub fn martingale_check(batch: &PathBatch, s: f64, t: f64, p: f64, r: f64) -> Result<RegressionReport> {
    require_tag(batch, ProcessTag::Y)?;
    if !(0.0 < s && s < t) {
        return Err(Error::argument(format!("need 0 < s < t, got ({s}, {t})")));
    }
    let (ys, yt) = (batch.column(s)?, batch.column(t)?);
    let fit = ols_hc0(batch.n_paths(), 2, |i, x| {
        x.copy_from_slice(&[1.0, ys[i]]);
        yt[i] - ys[i]
    })?;
    let theory = [(t - s) * p / (s + r), (t - s) / (s + r)];
    Ok(RegressionReport::from_fit(fit, &["1", "y_s"], &theory))
}

/// Regression of kappa'(Theta) on (1, Y_s); theory (p/(s+r), 1/(s+r)).
pub fn theta_given_y_check(batch: &PathBatch, law: &RandomizationLaw, s: f64) -> Result<RegressionReport> {
    require_tag(batch, ProcessTag::Y)?;
    let ys = batch.column(s)?;
    let km = kprime_of_thetas(batch, law)?;
    let fit = ols_hc0(batch.n_paths(), 2, |i, x| {
        x.copy_from_slice(&[1.0, ys[i]]);
        km[i]
    })?;
    let (p, r) = (law.p(), law.r());
    Ok(RegressionReport::from_fit(
        fit,
        &["1", "y_s"],
        &[p / (s + r), 1.0 / (s + r)],
    ))
}

fn kprime_of_thetas(batch: &PathBatch, law: &RandomizationLaw) -> Result<Vec<f64>> {
    let family = law.family();
    batch.thetas().iter().map(|&th| family.kappa_prime(th)).collect()
}

/// Regression of kappa'(Theta) on (1, Y_{s'}, Y'_{u'}) using the ingredient
/// paths of a Z batch; theory (p, 1, 1) / (s' + u' + r).
pub fn theta_posterior_check(batch: &PathBatch, law: &RandomizationLaw, s: f64, u: f64) -> Result<RegressionReport> {
    require_tag(batch, ProcessTag::Z)?;
    if !(0.0 < s && s < 1.0 && u > 1.0) {
        return Err(Error::argument(format!("need 0 < s < 1 < u, got ({s}, {u})")));
    }
    let (sp, ys) = batch.ingredient_column(s)?;
    let (up, yu) = batch.ingredient_column(u)?;
    let (sp, up) = (sp.ok_or(Error::Grid(s))?, up.ok_or(Error::Grid(u))?);
    let km = kprime_of_thetas(batch, law)?;
    let fit = ols_hc0(batch.n_paths(), 3, |i, x| {
        x.copy_from_slice(&[1.0, ys[i], yu[i]]);
        km[i]
    })?;
    let d = sp + up + law.r();
    let theory = [law.p() / d, 1.0 / d, 1.0 / d];
    Ok(RegressionReport::from_fit(fit, &["1", "y_s'", "y'_u'"], &theory))
}

/// Warning text when r sits close enough to the lower end of its admissible
/// range that higher moments used by the variance regression may not exist.
pub fn moment_warning(family: &FamilySpec, r: f64) -> Option<String> {
    let boundary = match family.kind() {
        FamilyKind::Gamma | FamilyKind::NegativeBinomial => 1.0,
        FamilyKind::HyperbolicSecant => 0.5,
        FamilyKind::Wiener | FamilyKind::Poisson => return None,
    };
    (r < boundary + 1.0).then(|| {
        format!(
            "r = {r} is within 1 of the boundary r > {boundary}; variance-regression standard errors may be unreliable"
        )
    })
}
