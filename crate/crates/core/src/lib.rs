//! Randomized Lévy-Meixner processes and their stitching into quadratic
//! harnesses on (0, ∞), with exact, quadrature and Monte Carlo checks of the
//! resulting harness parameters.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod error;
pub mod nef_family;
pub mod process_sim;
pub mod qh_verify;
pub mod quadrature;
pub mod randomization;
pub mod transition_kernel;

pub use error::{Error, Result};
pub use nef_family::{CumulantValues, FamilyKind, FamilySpec, VarianceCoeffs};
pub use process_sim::{PathBatch, StitchConfig, TimeGrid};
pub use qh_verify::{MomentCheckReport, QHParams, RegressionReport};
pub use randomization::{KPrimeMoments, RandomizationLaw};
