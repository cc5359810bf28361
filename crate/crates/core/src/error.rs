use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A tilting parameter lies outside (or on the boundary of) the open
    /// natural-parameter interval of a family.
    #[error("theta = {theta} is outside the open domain ({lower}, {upper})")]
    Domain { theta: f64, lower: f64, upper: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("quadrature did not converge: {0}")]
    Integration(String),

    #[error("inverse-CDF tabulation failed: {0}")]
    Tabulation(String),

    /// A requested time is not a point of the batch grid.
    #[error("time {0} is not on the grid")]
    Grid(f64),

    #[error("design matrix is numerically singular: {0}")]
    SingularDesign(String),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for failures of the numerical machinery (quadrature, tabulation)
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Integration(_) | Error::Tabulation(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
