//! Numerical backbone: adaptive quadrature, complex-argument gamma
//! magnitudes, and tabulated inverse CDFs.

mod gamma;
mod inverse_cdf;
mod kronrod;

pub use gamma::{abs_gamma_sq, ln_abs_gamma_sq, ln_beta, ln_gamma};
pub use inverse_cdf::{tabulate_inverse_cdf, tabulate_inverse_cdf_with, InverseCdf, TabulationOptions};
pub use kronrod::{integrate, integrate_raw, integrate_with, QuadratureOptions, QuadratureResult};
