use thiserror::Error;

use crate::peakfit::PseudoVoigtParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// All variants describe bad or unusable input; none of them indicate a bug
/// in the library itself.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no diffraction angle exists: n·λ = {n_lambda} Å ≥ 2d = {two_d} Å")]
    NoDiffraction { n_lambda: f64, two_d: f64 },

    #[error("implausible lattice strain {strain:e} (|ε| must stay below {bound}); check d0 or peak indexing")]
    ImplausibleStrain { strain: f64, bound: f64 },

    #[error("no peak found: {0}")]
    NoPeak(String),

    #[error("maximum intensity at 2θ = {two_theta}° is too close to the profile edge for the fit window")]
    EdgePeak { two_theta: f64 },

    #[error("pseudo-Voigt fit did not converge in {iterations} iterations (last step norm {step_norm:e})")]
    Convergence {
        best: PseudoVoigtParams,
        step_norm: f64,
        iterations: usize,
    },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("peaks were recorded at different azimuths: φ = {first}° and {other}°")]
    MixedAzimuth { first: f64, other: f64 },

    #[error("d0 policy requires a ψ = 0 measurement (|ψ| < 0.5°) but none was supplied")]
    MissingReference,

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("no ±ψ pairs with matching |ψ| found")]
    NoPairs,

    #[error("deflection {deflection} is outside the calibrated range [0, {max}]")]
    Extrapolation { deflection: f64, max: f64 },

    #[error("inconsistent calibration: {0}")]
    InconsistentCalibration(String),

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("missing metadata key `{key}`")]
    MissingMetadata { key: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{path}: {source}")]
    InFile { path: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Attaches the file the error was found in.
    pub fn in_file(self, path: impl Into<String>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: msg.into(),
        }
    }
}
