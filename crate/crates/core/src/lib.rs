#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN
pub mod cauchy1;
pub mod cauchyn;
pub mod covariant;
pub mod densities;
pub mod error;
pub mod expansion;
pub mod identities;
pub mod oracle;
pub mod quad;
pub mod walks;

pub use cauchy1::HalfPlaneSign;
pub use cauchyn::{EnergyVector, MultiIndex, SignVector};
pub use densities::{AnalyticDensity, StripFunction};
pub use error::{Error, Result};
pub use num_complex::Complex64;
