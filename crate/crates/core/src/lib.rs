//! Adaptive local polynomial regression at a point, for random designs
//! whose density may vanish or blow up there.
//!
//! * [`rvdesign`]: design densities, limit constants and rate evaluators.
//! * [`locpoly`]: the regularised local polynomial fit on one window.
//! * [`bandwidth`]: symmetric and interval window selectors.
//! * [`testbed`]: benchmark signals and dataset synthesis.
//! * [`experiments`]: Monte Carlo drivers and reports.

pub mod bandwidth;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod locpoly;
pub mod rng;
pub mod rvdesign;
pub mod testbed;

pub use error::{Error, Result};
