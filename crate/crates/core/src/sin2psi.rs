//! Stress from the linear dependence of lattice strain on sin²ψ.
//!
//! For a biaxial stress state the strain measured at tilt ψ is
//! `ε = ½S₂·σ_φ·sin²ψ + s₁·(σ₁ + σ₂)`, so the slope of ε against sin²ψ
//! divided by ½S₂ gives σ_φ.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::peakfit::PeakEstimate;
use crate::stats::fit_line;
use crate::xrd::{lattice_spacing, strain_from_spacing, ElasticConstants, Reflection, StrainValue};

/// |ψ| below this counts as the untilted reference, and ±ψ pairs must agree
/// in |ψ| to within it.
pub const PSI_MATCH_TOLERANCE: f64 = 0.5;

/// Azimuths closer than this are treated as the same φ.
const PHI_MATCH_TOLERANCE: f64 = 1e-6;

/// One point of the ε vs. sin²ψ regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltMeasurement {
    psi: f64,
    sin2psi: f64,
    strain: StrainValue,
    weight: f64,
}

impl TiltMeasurement {
    pub fn new(psi: f64, strain: StrainValue) -> Result<Self> {
        Self::weighted(psi, strain, 1.0)
    }

    pub fn weighted(psi: f64, strain: StrainValue, weight: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&psi) {
            return Err(Error::domain(format!(
                "ψ must lie in [-90°, 90°], got {psi}°"
            )));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::domain(format!(
                "weight must be positive, got {weight}"
            )));
        }
        let s = psi.to_radians().sin();
        Ok(Self {
            psi,
            sin2psi: s * s,
            strain,
            weight,
        })
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn sin2psi(&self) -> f64 {
        self.sin2psi
    }

    pub fn strain(&self) -> StrainValue {
        self.strain
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// Sampling volume of the measurement, carried along with each fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementMetadata {
    pub penetration_depth_um: f64,
    pub measured_area_mm2: f64,
}

impl Default for MeasurementMetadata {
    /// Average penetration depth and irradiated area of the reference
    /// ψ-diffractometer setup for nickel.
    fn default() -> Self {
        Self {
            penetration_depth_um: 3.5,
            measured_area_mm2: 0.126,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressFit {
    /// σ_φ in MPa, compressive negative.
    pub sigma_phi: f64,
    pub sigma_phi_stderr: f64,
    /// Strain intercept: s₁(σ₁ + σ₂) plus any offset from the choice of d0.
    pub intercept: f64,
    pub intercept_stderr: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub phi: f64,
    pub metadata: MeasurementMetadata,
}

impl StressFit {
    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_metadata(mut self, metadata: MeasurementMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    /// Two-sided confidence interval for σ_φ at `level` (e.g. 0.95), using
    /// the Student t quantile with n − 2 degrees of freedom.
    pub fn confidence_interval(&self, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::domain(format!(
                "confidence level must lie in (0, 1), got {level}"
            )));
        }
        let dof = (self.n_points - 2) as f64;
        let t = StudentsT::new(0.0, 1.0, dof)
            .map_err(|e| Error::domain(e.to_string()))?
            .inverse_cdf(0.5 + level / 2.0);
        let half = t * self.sigma_phi_stderr;
        Ok((self.sigma_phi - half, self.sigma_phi + half))
    }
}

/// Where the strain-free spacing d0 comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum D0Policy {
    Explicit(f64),
    /// Use the spacing measured at ψ = 0 (mean of replicates).
    PsiZero,
}

/// A fitted peak together with the tilt and azimuth it was recorded at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltPeak {
    pub peak: PeakEstimate,
    pub psi: f64,
    pub phi: f64,
}

/// Converts peak positions into strain points.
///
/// Weights are 1/u² from the peak center uncertainties when every one is
/// positive, otherwise all 1.
pub fn build_strain_points(
    peaks: &[TiltPeak],
    refl: &Reflection,
    d0_policy: D0Policy,
) -> Result<Vec<TiltMeasurement>> {
    if peaks.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: peaks.len(),
        });
    }
    let phi = peaks[0].phi;
    if let Some(p) = peaks
        .iter()
        .find(|p| (p.phi - phi).abs() > PHI_MATCH_TOLERANCE)
    {
        return Err(Error::MixedAzimuth {
            first: phi,
            other: p.phi,
        });
    }

    let spacings = peaks
        .iter()
        .map(|p| lattice_spacing(p.peak.center_two_theta / 2.0, refl))
        .collect::<Result<Vec<_>>>()?;

    let d0 = match d0_policy {
        D0Policy::Explicit(d0) => d0,
        D0Policy::PsiZero => {
            let refs: Vec<f64> = peaks
                .iter()
                .zip(&spacings)
                .filter(|(p, _)| p.psi.abs() < PSI_MATCH_TOLERANCE)
                .map(|(_, &d)| d)
                .collect();
            if refs.is_empty() {
                return Err(Error::MissingReference);
            }
            refs.iter().sum::<f64>() / refs.len() as f64
        }
    };

    let use_weights = peaks.iter().all(|p| p.peak.center_uncertainty > 0.0);
    peaks
        .iter()
        .zip(&spacings)
        .map(|(p, &d)| {
            let weight = if use_weights {
                1.0 / (p.peak.center_uncertainty * p.peak.center_uncertainty)
            } else {
                1.0
            };
            TiltMeasurement::weighted(p.psi, strain_from_spacing(d, d0)?, weight)
        })
        .collect()
}

/// Weighted least squares of strain on sin²ψ.
///
/// The returned fit carries φ = 0 and default metadata; attach the real
/// values with [`StressFit::with_phi`] and [`StressFit::with_metadata`].
pub fn fit_sin2psi(points: &[TiltMeasurement], xec: &ElasticConstants) -> Result<StressFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: points.len(),
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.sin2psi).collect();
    let y: Vec<f64> = points.iter().map(|p| p.strain.value()).collect();
    let w: Vec<f64> = points.iter().map(|p| p.weight).collect();
    let line = fit_line(&x, &y, Some(&w)).map_err(|e| match e {
        Error::SingularDesign(_) => Error::SingularDesign("all tilts have the same sin²ψ".into()),
        other => other,
    })?;

    Ok(StressFit {
        sigma_phi: line.slope / xec.half_s2(),
        sigma_phi_stderr: line.slope_stderr / xec.half_s2(),
        intercept: line.intercept,
        intercept_stderr: line.intercept_stderr,
        r_squared: line.r_squared,
        n_points: points.len(),
        phi: 0.0,
        metadata: MeasurementMetadata::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitReport {
    pub max_branch_gap: f64,
    pub split_detected: bool,
    pub gap_threshold: f64,
    pub pairs: usize,
}

/// Largest strain difference between +ψ and −ψ measurements of equal |ψ|.
pub fn detect_psi_splitting(points: &[TiltMeasurement], gap_threshold: f64) -> Result<SplitReport> {
    if !(gap_threshold.is_finite() && gap_threshold >= 0.0) {
        return Err(Error::domain("gap threshold must be non-negative"));
    }
    let mut max_gap: Option<f64> = None;
    let mut pairs = 0;
    for pos in points.iter().filter(|p| p.psi > 0.0) {
        for neg in points.iter().filter(|p| p.psi < 0.0) {
            if (pos.psi + neg.psi).abs() <= PSI_MATCH_TOLERANCE {
                let gap = (pos.strain.value() - neg.strain.value()).abs();
                max_gap = Some(max_gap.map_or(gap, |g: f64| g.max(gap)));
                pairs += 1;
            }
        }
    }
    let max_branch_gap = max_gap.ok_or(Error::NoPairs)?;
    Ok(SplitReport {
        max_branch_gap,
        split_detected: max_branch_gap > gap_threshold,
        gap_threshold,
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxationVerdict {
    RelaxedTowardZero,
    Unchanged,
    Anomalous,
}

impl RelaxationVerdict {
    pub fn tag(self) -> &'static str {
        match self {
            RelaxationVerdict::RelaxedTowardZero => "relaxed_toward_zero",
            RelaxationVerdict::Unchanged => "unchanged",
            RelaxationVerdict::Anomalous => "anomalous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub verdict: RelaxationVerdict,
    /// σ_free − σ_mandrel, MPa.
    pub delta: f64,
    /// Tolerance used for the verdict, MPa.
    pub tolerance: f64,
}

/// Smallest tolerance applied by [`relaxation_check`], MPa.
pub const RELAXATION_TOLERANCE_FLOOR: f64 = 1.0;

/// Compares the stress magnitude before and after release from the mandrel.
///
/// The tolerance is the two standard errors combined in quadrature, never
/// less than [`RELAXATION_TOLERANCE_FLOOR`].
pub fn relaxation_check(on_mandrel: &StressFit, free_standing: &StressFit) -> Relaxation {
    relaxation_check_values(
        (on_mandrel.sigma_phi, on_mandrel.sigma_phi_stderr),
        (free_standing.sigma_phi, free_standing.sigma_phi_stderr),
    )
}

/// [`relaxation_check`] on bare (stress, standard error) pairs.
pub fn relaxation_check_values(on_mandrel: (f64, f64), free_standing: (f64, f64)) -> Relaxation {
    let tolerance = on_mandrel
        .1
        .hypot(free_standing.1)
        .max(RELAXATION_TOLERANCE_FLOOR);
    let (before, after) = (on_mandrel.0.abs(), free_standing.0.abs());
    let verdict = if after < before - tolerance {
        RelaxationVerdict::RelaxedTowardZero
    } else if after > before + tolerance {
        RelaxationVerdict::Anomalous
    } else {
        RelaxationVerdict::Unchanged
    };
    Relaxation {
        verdict,
        delta: free_standing.0 - on_mandrel.0,
        tolerance,
    }
}
