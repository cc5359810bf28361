//! Randomization laws h(dtheta) = C exp(p theta - r kappa(theta)) over the
//! natural parameter, their normalizing constants and kappa' moments, and a
//! numerical check of the endpoint-decay conditions.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Open01};

use crate::error::{Error, Result};
use crate::nef_family::{meixner_table, FamilyKind, FamilySpec};
use crate::quadrature::{
    integrate_with, ln_beta, ln_gamma, tabulate_inverse_cdf_with, InverseCdf, QuadratureOptions, TabulationOptions,
};

/// Checks (p, r) against the admissible region of the family.
pub fn check_admissible(family: &FamilySpec, p: f64, r: f64) -> Result<()> {
    if !p.is_finite() || !r.is_finite() {
        return Err(Error::argument(format!("p and r must be finite, got p={p}, r={r}")));
    }
    let (r_min, p_positive) = match family.kind() {
        FamilyKind::Wiener => (0.0, false),
        FamilyKind::Poisson => (0.0, true),
        FamilyKind::Gamma | FamilyKind::NegativeBinomial => (1.0, true),
        FamilyKind::HyperbolicSecant => (0.5, false),
    };
    if !(r > r_min) {
        return Err(Error::argument(format!("{family} needs r > {r_min}, got r={r}")));
    }
    if p_positive && !(p > 0.0) {
        return Err(Error::argument(format!("{family} needs p > 0, got p={p}")));
    }
    Ok(())
}

/// Integral of `f` over (lo, hi), split at `center`. Halves ending at a
/// finite endpoint e use theta = e -/+ L w^4, which flattens the integrable
/// power singularities these integrands have there.
pub(crate) fn integrate_domain<F: Fn(f64) -> f64>(
    f: F,
    (lo, hi): (f64, f64),
    center: f64,
    scale: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (end, sign) in [(lo, -1.0), (hi, 1.0)] {
        let part = if end.is_finite() {
            let len = (end - center).abs();
            let g = |w: f64| {
                let w3 = w * w * w;
                4.0 * len * w3 * f(end - sign * len * w3 * w)
            };
            integrate_with(g, 0.0, 1.0, &QuadratureOptions::with_rel_tol(rel_tol))?.value
        } else {
            let opts = QuadratureOptions {
                rel_tol,
                scale,
                ..Default::default()
            };
            sign * integrate_with(&f, center, end, &opts)?.value
        };
        total += part;
    }
    Ok(total)
}

/// ln of the integral of exp(a theta - b kappa(theta)) over the open domain,
/// by quadrature about the maximizer of the exponent.
pub fn ln_tilted_integral(family: &FamilySpec, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::argument(format!("tilted integral needs b > 0, got {b}")));
    }
    // maximizer solves kappa'(theta) = a / b
    let mode = family
        .kappa_prime_inverse(a / b)
        .map_err(|_| Error::argument(format!("integral of exp({a} theta - {b} kappa) diverges for {family}")))?;
    let c = family.cumulants(mode)?;
    let peak = a * mode - b * c.kappa;
    let scale = 1.0 / (b * c.kappa_double_prime).sqrt();
    let integrand = |theta: f64| match family.kappa(theta) {
        Ok(k) => (a * theta - b * k - peak).exp(),
        Err(_) => 0.0,
    };
    let value = integrate_domain(integrand, family.theta_domain(), mode, scale, rel_tol)?;
    Ok(peak + value.ln())
}

/// ln C from the closed-form transformed laws (secant: quadrature).
pub fn normalizing_constant(family: &FamilySpec, p: f64, r: f64) -> Result<f64> {
    check_admissible(family, p, r)?;
    Ok(match family.kind() {
        FamilyKind::Wiener => 0.5 * (r / (2.0 * PI)).ln() - 0.5 * p * p / r,
        FamilyKind::Poisson => p * r.ln() - r - ln_gamma(p),
        FamilyKind::Gamma => (r + 1.0) * p.ln() - p - ln_gamma(r + 1.0),
        FamilyKind::NegativeBinomial => {
            let q = family.q().unwrap();
            p * q.ln() + r * (-q).ln_1p() - ln_beta(p, r + 1.0)
        }
        FamilyKind::HyperbolicSecant => -ln_tilted_integral(family, p, r, 1e-12)?,
    })
}

/// ln C by quadrature for every family.
pub fn normalizing_constant_by_quadrature(family: &FamilySpec, p: f64, r: f64) -> Result<f64> {
    check_admissible(family, p, r)?;
    Ok(-ln_tilted_integral(family, p, r, 1e-12)?)
}

/// Mean and variance of kappa'(Theta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPrimeMoments {
    pub mean: f64,
    pub variance: f64,
}

pub fn kprime_moments(family: &FamilySpec, p: f64, r: f64) -> Result<KPrimeMoments> {
    check_admissible(family, p, r)?;
    let variance = match family.kind() {
        FamilyKind::Wiener => 1.0 / r,
        FamilyKind::Poisson => p / (r * r),
        FamilyKind::Gamma => p * p / (r * r * (r - 1.0)),
        FamilyKind::NegativeBinomial => p * (p + r) / (r * r * (r - 1.0)),
        FamilyKind::HyperbolicSecant => (p * p + r * r) / (r * r * (2.0 * r - 1.0)),
    };
    Ok(KPrimeMoments { mean: p / r, variance })
}

type SecantCell = Arc<OnceLock<Result<Arc<InverseCdf>>>>;

fn secant_theta_table(p: f64, r: f64, log_c: f64) -> Result<Arc<InverseCdf>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), SecantCell>>> = OnceLock::new();
    let cell = {
        let mut map = CACHE
            .get_or_init(|| Mutex::new(HashMap::new()))
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        map.entry((p.to_bits(), r.to_bits())).or_default().clone()
    };
    cell.get_or_init(|| {
        let family = FamilySpec::hyperbolic_secant();
        let mode = family.kappa_prime_inverse(p / r)?;
        let kpp = family.cumulants(mode)?.kappa_double_prime;
        let opts = TabulationOptions {
            center: mode,
            scale: (1.0 / (r * kpp).sqrt()).min(1.0),
            ..TabulationOptions::new(1e-10)
        };
        let density = |theta: f64| match family.kappa(theta) {
            Ok(k) => (log_c + p * theta - r * k).exp(),
            Err(_) => 0.0,
        };
        tabulate_inverse_cdf_with(density, (-PI, PI), &opts).map(Arc::new)
    })
    .clone()
}

/// The randomization law of Theta for one family and admissible (p, r).
#[derive(Debug, Clone)]
pub struct RandomizationLaw {
    family: FamilySpec,
    p: f64,
    r: f64,
    log_c: f64,
    secant_table: Option<Arc<InverseCdf>>,
}

/// ln of a Gamma(shape, 1) draw, accurate for small shapes.
fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    let bad = |e: rand_distr::GammaError| Error::argument(format!("Gamma({shape}): {e}"));
    if shape >= 1.0 {
        return Ok(Gamma::new(shape, 1.0).map_err(bad)?.sample(rng).ln());
    }
    // G_a = G_{a+1} U^{1/a}
    let g = Gamma::new(shape + 1.0, 1.0).map_err(bad)?.sample(rng);
    let u: f64 = rng.sample(Open01);
    Ok(g.ln() + u.ln() / shape)
}

impl RandomizationLaw {
    pub fn new(family: FamilySpec, p: f64, r: f64) -> Result<Self> {
        let log_c = normalizing_constant(&family, p, r)?;
        let secant_table = if family.kind() == FamilyKind::HyperbolicSecant {
            Some(secant_theta_table(p, r, log_c)?)
        } else {
            None
        };
        Ok(RandomizationLaw {
            family,
            p,
            r,
            log_c,
            secant_table,
        })
    }

    pub fn family(&self) -> &FamilySpec {
        &self.family
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    pub fn kprime_moments(&self) -> KPrimeMoments {
        kprime_moments(&self.family, self.p, self.r).expect("validated at construction")
    }

    /// ln of the density of Theta; `Domain` error outside the open domain.
    pub fn theta_log_density(&self, theta: f64) -> Result<f64> {
        let k = self.family.kappa(theta)?;
        Ok(self.log_c + self.p * theta - self.r * k)
    }

    /// Density of Theta, 0 outside the domain.
    pub fn theta_density(&self, theta: f64) -> f64 {
        self.theta_log_density(theta).map(f64::exp).unwrap_or(0.0)
    }

    /// One draw of Theta, always strictly inside the domain.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let theta = self.propose(rng).expect("parameters validated at construction");
            if self.family.contains(theta) {
                return theta;
            }
        }
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let (p, r) = (self.p, self.r);
        Ok(match self.family.kind() {
            FamilyKind::Wiener => Normal::new(p / r, 1.0 / r.sqrt())
                .map_err(|e| Error::argument(e.to_string()))?
                .sample(rng),
            // Lambda = e^Theta ~ Gamma(p, rate r)
            FamilyKind::Poisson => ln_gamma_variate(p, rng)? - r.ln(),
            // 1 - Theta ~ Gamma(r + 1, rate p)
            FamilyKind::Gamma => {
                let w = Gamma::new(r + 1.0, 1.0 / p)
                    .map_err(|e| Error::argument(e.to_string()))?
                    .sample(rng);
                1.0 - w
            }
            // q e^Theta ~ Beta(p, r + 1)
            FamilyKind::NegativeBinomial => {
                let q = self.family.q().unwrap();
                let ln_a = ln_gamma_variate(p, rng)?;
                let ln_b = ln_gamma_variate(r + 1.0, rng)?;
                let ln_pi = ln_a - ln_b - (ln_a - ln_b).exp().ln_1p();
                ln_pi - q.ln()
            }
            FamilyKind::HyperbolicSecant => {
                let u: f64 = rng.sample(Open01);
                self.secant_table.as_ref().unwrap().quantile(u)
            }
        })
    }

    /// E f(Theta) by quadrature against the normalized density.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F, rel_tol: f64) -> Result<f64> {
        let mode = self.family.kappa_prime_inverse(self.p / self.r)?;
        let kpp = self.family.cumulants(mode)?.kappa_double_prime;
        let integrand = |theta: f64| match self.theta_log_density(theta) {
            Ok(l) => {
                let d = l.exp();
                if d == 0.0 {
                    0.0
                } else {
                    f(theta) * d
                }
            }
            Err(_) => 0.0,
        };
        let scale = 1.0 / (self.r * kpp).sqrt();
        integrate_domain(integrand, self.family.theta_domain(), mode, scale, rel_tol)
    }

    /// kappa' moments by quadrature, for cross-checking the closed forms.
    pub fn kprime_moments_by_quadrature(&self) -> Result<KPrimeMoments> {
        let kp = |theta: f64| self.family.kappa_prime(theta).unwrap_or(0.0);
        let m = self.expectation(kp, 1e-10)?;
        let centered = self.expectation(|theta| (kp(theta) - m).powi(2), 1e-10)?;
        Ok(KPrimeMoments {
            mean: m,
            variance: centered,
        })
    }
}

/// Which of the two decay conditions a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayCondition {
    /// exp((p + x) theta - r kappa(theta)) -> 0
    Integrand,
    /// kappa'(theta) exp((p + x) theta - r kappa(theta)) -> 0
    WeightedIntegrand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointCheck {
    pub support_point: f64,
    pub endpoint: f64,
    pub condition: DecayCondition,
    /// log10 of the value at the grid point closest to the endpoint.
    pub final_log10: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<EndpointCheck>,
    pub pass: bool,
}

impl AssumptionReport {
    pub fn failures(&self) -> impl Iterator<Item = &EndpointCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Grid and threshold settings for [`check_assumptions_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionOptions {
    pub threshold: f64,
    pub grid_points: usize,
    /// Values at this many grid points nearest the endpoint must be below
    /// the threshold.
    pub tail_points: usize,
    /// Geometric range of distances to a finite endpoint.
    pub finite_offsets: (f64, f64),
    /// Geometric range of |theta| towards an infinite endpoint.
    pub infinite_magnitudes: (f64, f64),
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        AssumptionOptions {
            threshold: 1e-12,
            grid_points: 40,
            tail_points: 10,
            finite_offsets: (1.0, 1e-60),
            infinite_magnitudes: (1.0, 1e8),
        }
    }
}

/// theta, kappa(theta) and ln|kappa'(theta)| at distance `s` from a finite
/// endpoint or at |theta| = `s` towards an infinite one, written so that
/// tiny offsets do not round onto the endpoint.
fn edge_point(family: &FamilySpec, upper: bool, s: f64) -> (f64, f64, f64) {
    match (family.kind(), upper) {
        (FamilyKind::Wiener, _) => {
            let theta = if upper { s } else { -s };
            (theta, 0.5 * s * s, s.ln())
        }
        (FamilyKind::Poisson, _) => {
            let theta = if upper { s } else { -s };
            (theta, theta.exp_m1(), theta)
        }
        (FamilyKind::Gamma, true) => (1.0 - s, -s.ln(), -s.ln()),
        (FamilyKind::Gamma, false) => (-s, -s.ln_1p(), -s.ln_1p()),
        (FamilyKind::NegativeBinomial, true) => {
            let q = family.q().unwrap();
            let w = -(-s).exp_m1();
            (-q.ln() - s, (-q).ln_1p() - w.ln(), -s - w.ln())
        }
        (FamilyKind::NegativeBinomial, false) => {
            let q = family.q().unwrap();
            let lq = q.ln() - s;
            let w = -lq.exp_m1();
            (-s, (-q).ln_1p() - w.ln(), lq - w.ln())
        }
        (FamilyKind::HyperbolicSecant, _) => {
            let half = 0.5 * s;
            let theta = if upper { PI - s } else { s - PI };
            // cos(theta/2) = sin(s/2), |tan(theta/2)| = cot(s/2)
            (theta, -2.0 * half.sin().ln(), -half.tan().ln())
        }
    }
}

pub fn check_assumptions(family: &FamilySpec, p: f64, r: f64, support_points: &[f64]) -> AssumptionReport {
    check_assumptions_with(family, p, r, support_points, &AssumptionOptions::default())
}

pub fn check_assumptions_with(
    family: &FamilySpec,
    p: f64,
    r: f64,
    support_points: &[f64],
    opts: &AssumptionOptions,
) -> AssumptionReport {
    let (lo, hi) = family.theta_domain();
    let ln_threshold = opts.threshold.ln();
    let n = opts.grid_points.max(2);
    let tail = opts.tail_points.clamp(1, n);
    let mut checks = Vec::new();
    for &x in support_points {
        for (endpoint, upper) in [(lo, false), (hi, true)] {
            let (s0, s1) = if endpoint.is_finite() {
                opts.finite_offsets
            } else {
                opts.infinite_magnitudes
            };
            let ratio = (s1 / s0).powf(1.0 / (n - 1) as f64);
            let mut plain = Vec::with_capacity(n);
            let mut weighted = Vec::with_capacity(n);
            for i in 0..n {
                let s = s0 * ratio.powi(i as i32);
                let (theta, kappa, ln_kp) = edge_point(family, upper, s);
                let mut v = (p + x) * theta - r * kappa;
                if v.is_nan() {
                    v = f64::NEG_INFINITY;
                }
                let mut w = v + ln_kp;
                if w.is_nan() {
                    w = f64::NEG_INFINITY;
                }
                plain.push(v);
                weighted.push(w);
            }
            for (condition, seq) in [
                (DecayCondition::Integrand, &plain),
                (DecayCondition::WeightedIntegrand, &weighted),
            ] {
                let pass = seq[n - tail..].iter().all(|&v| v < ln_threshold);
                checks.push(EndpointCheck {
                    support_point: x,
                    endpoint,
                    condition,
                    final_log10: seq[n - 1] / std::f64::consts::LN_10,
                    pass,
                });
            }
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    AssumptionReport { checks, pass }
}

/// {0, median, 0.999 quantile} of the base law at unit time, deduplicated.
pub fn default_support_points(family: &FamilySpec) -> Result<Vec<f64>> {
    let mut pts = match family.kind() {
        FamilyKind::Wiener => vec![0.0, 0.0, 3.090_232_306_167_813],
        FamilyKind::Poisson => vec![0.0, 1.0, 5.0],
        FamilyKind::Gamma => vec![0.0, 2f64.ln(), 1000f64.ln()],
        FamilyKind::NegativeBinomial => {
            // geometric: P(X > n) = q^(n+1)
            let q = family.q().unwrap();
            let quantile = |u: f64| ((1.0 - u).ln() / q.ln() - 1.0).ceil().max(0.0);
            vec![0.0, quantile(0.5), quantile(0.999)]
        }
        FamilyKind::HyperbolicSecant => vec![0.0, 0.0, meixner_table(1.0, 0.0)?.quantile(0.999)],
    };
    pts.dedup();
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::ln_abs_gamma_sq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nb(q: f64) -> FamilySpec {
        FamilySpec::negative_binomial(q).unwrap()
    }

    fn configs() -> Vec<(FamilySpec, f64, f64)> {
        vec![
            (FamilySpec::wiener(), 2.0, 4.0),
            (FamilySpec::wiener(), -1.0, 0.5),
            (FamilySpec::poisson(), 3.0, 2.0),
            (FamilySpec::poisson(), 0.4, 1.5),
            (FamilySpec::gamma(), 3.0, 10.0),
            (FamilySpec::gamma(), 1.0, 2.5),
            (nb(0.5), 2.0, 3.0),
            (nb(0.2), 0.7, 6.0),
            (FamilySpec::hyperbolic_secant(), 0.0, 1.0),
            (FamilySpec::hyperbolic_secant(), 1.0, 5.0),
            (FamilySpec::hyperbolic_secant(), -2.0, 0.8),
        ]
    }

    #[test]
    fn admissible_region() {
        assert!(check_admissible(&FamilySpec::wiener(), -3.0, 0.1).is_ok());
        assert!(check_admissible(&FamilySpec::wiener(), 0.0, 0.0).is_err());
        assert!(check_admissible(&FamilySpec::poisson(), 0.0, 1.0).is_err());
        assert!(check_admissible(&FamilySpec::gamma(), 1.0, 1.0).is_err());
        assert!(check_admissible(&nb(0.5), 1.0, 1.5).is_ok());
        assert!(check_admissible(&FamilySpec::hyperbolic_secant(), -1.0, 0.5).is_err());
        assert!(check_admissible(&FamilySpec::hyperbolic_secant(), -1.0, 0.51).is_ok());
        assert!(RandomizationLaw::new(FamilySpec::gamma(), 1.0, 0.5).is_err());
    }

    #[test]
    fn printed_constants() {
        let s = RandomizationLaw::new(FamilySpec::hyperbolic_secant(), 0.0, 1.0).unwrap();
        assert!((s.log_c() + PI.ln()).abs() < 1e-12);
        assert!((s.theta_density(0.0) - 1.0 / PI).abs() < 1e-12);
        let w = RandomizationLaw::new(FamilySpec::wiener(), 0.0, 1.0).unwrap();
        assert!((w.theta_log_density(0.0).unwrap() + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        let p = normalizing_constant(&FamilySpec::poisson(), 1.0, 1.0).unwrap();
        assert!((p + 1.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_density() {
        let g = RandomizationLaw::new(FamilySpec::gamma(), 2.0, 3.0).unwrap();
        assert!(matches!(g.theta_log_density(1.0), Err(Error::Domain { .. })));
        assert_eq!(g.theta_density(1.0), 0.0);
    }

    #[test]
    fn closed_form_constants_match_quadrature() {
        for (f, p, r) in configs() {
            let closed = normalizing_constant(&f, p, r).unwrap();
            let quad = normalizing_constant_by_quadrature(&f, p, r).unwrap();
            assert!((closed - quad).abs() < 1e-9, "{f} p={p} r={r}: {closed} vs {quad}");
        }
    }

    #[test]
    fn secant_constant_matches_gamma_product() {
        // int e^{p theta} cos^{2r}(theta/2) = 2 pi Gamma(2r+1) / (4^r |Gamma(r+1+ip)|^2)
        for &(p, r) in &[(0.0, 1.0), (1.0, 5.0), (-2.0, 0.8), (3.5, 2.0)] {
            let ln_integral =
                (2.0 * PI).ln() + ln_gamma(2.0 * r + 1.0) - r * 4f64.ln() - ln_abs_gamma_sq(r + 1.0, p).unwrap();
            let c = normalizing_constant(&FamilySpec::hyperbolic_secant(), p, r).unwrap();
            assert!((c + ln_integral).abs() < 1e-10, "p={p} r={r}");
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for (f, p, r) in configs() {
            let law = RandomizationLaw::new(f, p, r).unwrap();
            let total = law.expectation(|_| 1.0, 1e-12).unwrap();
            assert!((total - 1.0).abs() < 1e-8, "{f}: {total}");
        }
    }

    #[test]
    fn printed_moments() {
        let m = kprime_moments(&FamilySpec::wiener(), 2.0, 4.0).unwrap();
        assert_eq!((m.mean, m.variance), (0.5, 0.25));
        let m = kprime_moments(&nb(0.5), 2.0, 3.0).unwrap();
        assert!((m.mean - 2.0 / 3.0).abs() < 1e-15 && (m.variance - 5.0 / 9.0).abs() < 1e-15);
        let m = kprime_moments(&FamilySpec::hyperbolic_secant(), 0.0, 1.0).unwrap();
        assert_eq!((m.mean, m.variance), (0.0, 1.0));
    }

    #[test]
    fn moments_match_quadrature() {
        for (f, p, r) in configs() {
            let law = RandomizationLaw::new(f, p, r).unwrap();
            let closed = law.kprime_moments();
            let quad = law.kprime_moments_by_quadrature().unwrap();
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            assert!(
                closed.mean == 0.0 && quad.mean.abs() < 1e-10 || rel(quad.mean, closed.mean) < 1e-8,
                "{f} mean"
            );
            assert!(
                rel(quad.variance, closed.variance) < 1e-8,
                "{f} p={p} r={r}: {quad:?} vs {closed:?}"
            );
        }
    }

    #[test]
    fn sampled_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (f, p, r) in configs() {
            let law = RandomizationLaw::new(f, p, r).unwrap();
            let n = 200_000;
            let xs: Vec<f64> = (0..n)
                .map(|_| {
                    let theta = law.sample_theta(&mut rng);
                    assert!(f.contains(theta));
                    f.kappa_prime(theta).unwrap()
                })
                .collect();
            let nf = n as f64;
            let mean = xs.iter().sum::<f64>() / nf;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
            let k = law.kprime_moments();
            assert!(
                (mean - k.mean).abs() < 4.0 * (var / nf).sqrt(),
                "{f} p={p} r={r}: mean {mean}"
            );
            assert!(
                (var - k.variance).abs() < 4.0 * ((m4 - var * var) / nf).sqrt(),
                "{f} p={p} r={r}: var {var} vs {}",
                k.variance
            );
        }
    }

    #[test]
    fn tiny_shape_stays_inside() {
        // p << 1 makes Lambda and Pi underflow without the log-gamma route
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for law in [
            RandomizationLaw::new(FamilySpec::poisson(), 1e-3, 1.0).unwrap(),
            RandomizationLaw::new(nb(0.5), 1e-3, 2.0).unwrap(),
        ] {
            for _ in 0..10_000 {
                let theta = law.sample_theta(&mut rng);
                assert!(theta.is_finite() && law.family().contains(theta));
            }
        }
    }

    #[test]
    fn assumption_examples() {
        let g = FamilySpec::gamma();
        assert!(check_assumptions(&g, 1.0, 2.0, &[0.0]).pass);
        let bad = check_assumptions(&g, 1.0, 0.5, &[0.0]);
        assert!(!bad.pass);
        let failed: Vec<_> = bad.failures().collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].endpoint, 1.0);
        assert_eq!(failed[0].condition, DecayCondition::WeightedIntegrand);
        assert!(check_assumptions(&FamilySpec::wiener(), -3.0, 0.1, &[0.0]).pass);
    }

    #[test]
    fn default_points_pass_inside_region() {
        for (f, p, r) in configs() {
            let pts = default_support_points(&f).unwrap();
            let rep = check_assumptions(&f, p, r, &pts);
            assert!(rep.pass, "{f} p={p} r={r}: {:?}", rep.failures().collect::<Vec<_>>());
        }
        let pts = default_support_points(&nb(0.5)).unwrap();
        assert_eq!(pts, vec![0.0, 9.0]);
        let s = default_support_points(&FamilySpec::hyperbolic_secant()).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn secant_fails_below_half() {
        // cos^{2r} kappa' ~ (pi - theta)^{2r - 1}
        let f = FamilySpec::hyperbolic_secant();
        assert!(!check_assumptions(&f, 0.0, 0.4, &[0.0]).pass);
        assert!(check_assumptions(&f, 0.0, 0.8, &[0.0]).pass);
    }

    proptest! {
        #[test]
        fn law_samples_inside_domain(p in 0.05f64..5.0, r in 1.05f64..12.0, seed in 0u64..1000, idx in 0usize..5) {
            let f = [FamilySpec::wiener(), FamilySpec::poisson(), FamilySpec::gamma(), nb(0.3), FamilySpec::hyperbolic_secant()][idx];
            let law = RandomizationLaw::new(f, p, r).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let theta = law.sample_theta(&mut rng);
                prop_assert!(f.contains(theta));
                prop_assert!(law.theta_log_density(theta).unwrap().is_finite());
            }
        }
    }
}
