pub mod error;
pub mod experiments;
pub mod kernels;
pub mod profile;
pub mod quad;
pub mod series;
pub mod series_cartesian;
pub mod series_polar;
pub mod specfun;

pub use error::{Error, Result};
