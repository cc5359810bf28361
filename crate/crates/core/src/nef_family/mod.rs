//! The five Lévy-Meixner families: cumulant functions, variance functions,
//! natural-parameter domains, and laws of the tilted increments.

mod increments;
mod meixner;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use meixner::{meixner_series_sample, meixner_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyKind {
    Wiener,
    Poisson,
    Gamma,
    NegativeBinomial,
    HyperbolicSecant,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 5] = [
        FamilyKind::Wiener,
        FamilyKind::Poisson,
        FamilyKind::Gamma,
        FamilyKind::NegativeBinomial,
        FamilyKind::HyperbolicSecant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Wiener => "wiener",
            FamilyKind::Poisson => "poisson",
            FamilyKind::Gamma => "gamma",
            FamilyKind::NegativeBinomial => "negative-binomial",
            FamilyKind::HyperbolicSecant => "hyperbolic-secant",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "wiener" | "normal" | "brownian" => Ok(FamilyKind::Wiener),
            "poisson" => Ok(FamilyKind::Poisson),
            "gamma" => Ok(FamilyKind::Gamma),
            "negative-binomial" | "negbin" | "nb" => Ok(FamilyKind::NegativeBinomial),
            "hyperbolic-secant" | "secant" | "meixner" => Ok(FamilyKind::HyperbolicSecant),
            other => Err(Error::argument(format!("unknown family '{other}'"))),
        }
    }
}

/// A Lévy-Meixner family. The Poisson rate is fixed at 1; only the negative
/// binomial family carries a base parameter `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilySpec {
    kind: FamilyKind,
    q: Option<f64>,
}

/// kappa and its first two derivatives at one theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantValues {
    pub kappa: f64,
    pub kappa_prime: f64,
    pub kappa_double_prime: f64,
}

/// Coefficients of the quadratic variance function V(m) = a m^2 + b m + c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl VarianceCoeffs {
    pub fn eval(&self, m: f64) -> f64 {
        (self.a * m + self.b) * m + self.c
    }

    pub fn derivative(&self, m: f64) -> f64 {
        2.0 * self.a * m + self.b
    }
}

impl FamilySpec {
    /// Builds a family; `q` must be given (in (0, 1)) exactly when `kind` is
    /// the negative binomial.
    pub fn new(kind: FamilyKind, q: Option<f64>) -> Result<Self> {
        match (kind, q) {
            (FamilyKind::NegativeBinomial, Some(q)) => {
                if q > 0.0 && q < 1.0 {
                    Ok(FamilySpec { kind, q: Some(q) })
                } else {
                    Err(Error::argument(format!("negative binomial needs 0 < q < 1, got {q}")))
                }
            }
            (FamilyKind::NegativeBinomial, None) => Err(Error::argument("negative binomial needs q")),
            (_, Some(_)) => Err(Error::argument(format!(
                "q is only meaningful for the negative binomial, not {kind}"
            ))),
            (_, None) => Ok(FamilySpec { kind, q: None }),
        }
    }

    pub fn wiener() -> Self {
        FamilySpec {
            kind: FamilyKind::Wiener,
            q: None,
        }
    }

    pub fn poisson() -> Self {
        FamilySpec {
            kind: FamilyKind::Poisson,
            q: None,
        }
    }

    pub fn gamma() -> Self {
        FamilySpec {
            kind: FamilyKind::Gamma,
            q: None,
        }
    }

    pub fn negative_binomial(q: f64) -> Result<Self> {
        FamilySpec::new(FamilyKind::NegativeBinomial, Some(q))
    }

    pub fn hyperbolic_secant() -> Self {
        FamilySpec {
            kind: FamilyKind::HyperbolicSecant,
            q: None,
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn q(&self) -> Option<f64> {
        self.q
    }

    fn nb_q(&self) -> f64 {
        self.q.expect("negative binomial without q")
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, FamilyKind::Poisson | FamilyKind::NegativeBinomial)
    }

    /// Open interval (theta0, theta1) on which kappa is finite.
    pub fn theta_domain(&self) -> (f64, f64) {
        match self.kind {
            FamilyKind::Wiener | FamilyKind::Poisson => (f64::NEG_INFINITY, f64::INFINITY),
            FamilyKind::Gamma => (f64::NEG_INFINITY, 1.0),
            FamilyKind::NegativeBinomial => (f64::NEG_INFINITY, -self.nb_q().ln()),
            FamilyKind::HyperbolicSecant => (-PI, PI),
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        let (lo, hi) = self.theta_domain();
        theta > lo && theta < hi
    }

    pub(crate) fn check_theta(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            let (lower, upper) = self.theta_domain();
            Err(Error::Domain { theta, lower, upper })
        }
    }

    pub fn cumulants(&self, theta: f64) -> Result<CumulantValues> {
        self.check_theta(theta)?;
        let (kappa, kappa_prime, kappa_double_prime) = match self.kind {
            FamilyKind::Wiener => (0.5 * theta * theta, theta, 1.0),
            FamilyKind::Poisson => {
                let e = theta.exp();
                (theta.exp_m1(), e, e)
            }
            FamilyKind::Gamma => {
                let w = 1.0 - theta;
                (-(-theta).ln_1p(), 1.0 / w, 1.0 / (w * w))
            }
            FamilyKind::NegativeBinomial => {
                let q = self.nb_q();
                let x = q * theta.exp();
                // 1 - q e^theta without cancellation near the upper endpoint
                let w = -(theta + q.ln()).exp_m1();
                ((-q).ln_1p() - w.ln(), x / w, x / (w * w))
            }
            FamilyKind::HyperbolicSecant => {
                let half = 0.5 * theta;
                let c = half.cos();
                let tan = half.tan();
                (-2.0 * c.ln(), tan, 0.5 * (1.0 + tan * tan))
            }
        };
        Ok(CumulantValues {
            kappa,
            kappa_prime,
            kappa_double_prime,
        })
    }

    pub fn kappa(&self, theta: f64) -> Result<f64> {
        self.cumulants(theta).map(|c| c.kappa)
    }

    pub fn kappa_prime(&self, theta: f64) -> Result<f64> {
        self.cumulants(theta).map(|c| c.kappa_prime)
    }

    /// The theta whose tilted mean is `m`, i.e. the inverse of kappa'.
    pub fn kappa_prime_inverse(&self, m: f64) -> Result<f64> {
        let positive = |m: f64| {
            if m > 0.0 {
                Ok(())
            } else {
                Err(Error::argument(format!("{} means are positive, got {m}", self.kind)))
            }
        };
        match self.kind {
            FamilyKind::Wiener => Ok(m),
            FamilyKind::Poisson => positive(m).map(|_| m.ln()),
            FamilyKind::Gamma => positive(m).map(|_| 1.0 - 1.0 / m),
            FamilyKind::NegativeBinomial => positive(m).map(|_| (m / (1.0 + m)).ln() - self.nb_q().ln()),
            FamilyKind::HyperbolicSecant => Ok(2.0 * m.atan()),
        }
    }

    pub fn variance_coeffs(&self) -> VarianceCoeffs {
        let (a, b, c) = match self.kind {
            FamilyKind::Wiener => (0.0, 0.0, 1.0),
            FamilyKind::Poisson => (0.0, 1.0, 0.0),
            FamilyKind::Gamma => (1.0, 0.0, 0.0),
            FamilyKind::NegativeBinomial => (1.0, 1.0, 0.0),
            FamilyKind::HyperbolicSecant => (0.5, 0.0, 0.5),
        };
        VarianceCoeffs { a, b, c }
    }

    pub fn variance_function(&self, m: f64) -> f64 {
        self.variance_coeffs().eval(m)
    }

    /// A theta in the middle of the domain (0 for the unbounded-above ones
    /// shifted towards the finite endpoint).
    pub fn domain_midpoint(&self) -> f64 {
        match self.kind {
            FamilyKind::Wiener | FamilyKind::Poisson | FamilyKind::HyperbolicSecant => 0.0,
            FamilyKind::Gamma => 0.0,
            FamilyKind::NegativeBinomial => 0.5 * (-self.nb_q().ln()) - 0.5,
        }
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.q {
            Some(q) => write!(f, "{}(q={q})", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}
