use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A value left the representable range of `f64`.
    #[error("{what} out of range ({context})")]
    OutOfRange { what: &'static str, context: String },

    /// Adaptive quadrature used its panel budget without meeting the tolerance.
    #[error("quadrature did not reach tolerance: best estimate {best:e}, error estimate {err_estimate:e}")]
    QuadratureNotConverged { best: f64, err_estimate: f64 },

    #[error("finite-difference stencil for derivative order {order} leaves the sample grid")]
    StencilOutOfGrid { order: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_finite(what: &'static str, value: f64, context: impl FnOnce() -> String) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::OutOfRange { what, context: context() })
    }
}
