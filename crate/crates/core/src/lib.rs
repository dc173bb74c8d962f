//! Residual stress analysis for electroformed metal films.
//!
//! The crate covers the full path from raw diffractometer profiles to a
//! stress value:
//!
//! * [`xrd`]: Bragg geometry, lattice strain and X-ray elastic constants.
//! * [`peakfit`]: peak position estimators for a single 2θ profile.
//! * [`sin2psi`]: strain vs. sin²ψ regression, ψ-splitting diagnostics and
//!   release-relaxation verdicts.
//! * [`strip`]: deposit stress analyzer (two-leg test strip) calibration.
//! * [`stretch`]: stress → stretch linear model and additive dosing trends.
//! * [`io`]: file formats, session orchestration, reports and SVG plots.
//!
//! Conventions used throughout: angles are in degrees at the API boundary,
//! lattice spacings and wavelengths in ångström, stresses in MPa with
//! compressive stress negative.

pub mod error;
pub mod io;
pub mod peakfit;
pub mod sin2psi;
pub mod stats;
pub mod stretch;
pub mod strip;
pub mod synthetic;
pub mod xrd;

pub use error::{Error, Result};
