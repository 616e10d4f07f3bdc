//! Radial (rho, n)-harmonic deformations between annuli in `R^n`, `n >= 3`.

pub mod characteristic;
pub mod cli;
pub mod energy;
pub mod error;
pub mod io;
mod interp;
pub mod metric;
pub mod quad;
pub mod radial;
pub mod roots;
pub mod spherical;
mod special;
pub mod variational;

pub use error::{Error, Result};
