//! Forward models that generate noise-free synthetic measurements.
//!
//! Used by the test suites, by the committed example fixtures, and handy
//! for checking an analysis chain end to end before pointing it at real
//! instrument data.

use crate::error::{Error, Result};
use crate::peakfit::{DiffractionProfile, PseudoVoigtParams, Sample};
use crate::xrd::{bragg_angle, ElasticConstants, Reflection};

fn angle_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && end > start) {
        return Err(Error::domain("grid needs end > start and a positive step"));
    }
    let n = ((end - start) / step).round() as usize + 1;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

/// Gaussian peak of the given FWHM and height on a regular 2θ grid.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_profile(
    center: f64,
    fwhm: f64,
    height: f64,
    start: f64,
    end: f64,
    step: f64,
    psi: f64,
    phi: f64,
) -> Result<DiffractionProfile> {
    pseudo_voigt_profile(
        &PseudoVoigtParams {
            center,
            fwhm,
            height,
            eta: 0.0,
            background: 0.0,
        },
        start,
        end,
        step,
        psi,
        phi,
    )
}

/// Pseudo-Voigt peak on a regular 2θ grid.
pub fn pseudo_voigt_profile(
    params: &PseudoVoigtParams,
    start: f64,
    end: f64,
    step: f64,
    psi: f64,
    phi: f64,
) -> Result<DiffractionProfile> {
    let samples = angle_grid(start, end, step)?
        .into_iter()
        .map(|two_theta| Sample {
            two_theta,
            intensity: params.eval(two_theta),
        })
        .collect();
    DiffractionProfile::new(samples, psi, phi)
}

/// Biaxial stress state used to generate tilt series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressState {
    /// Stress component along the measurement azimuth, MPa.
    pub sigma_phi: f64,
    /// Sum of the in-plane principal stresses σ₁ + σ₂, MPa.
    pub principal_sum: f64,
}

impl StressState {
    /// Equal-biaxial state: σ₁ = σ₂ = σ_φ.
    pub fn equibiaxial(sigma: f64) -> Self {
        Self {
            sigma_phi: sigma,
            principal_sum: 2.0 * sigma,
        }
    }

    /// Lattice strain ε = ½S₂·σ_φ·sin²ψ + s₁·(σ₁ + σ₂) at tilt `psi` (degrees).
    pub fn strain_at(&self, psi: f64, xec: &ElasticConstants) -> f64 {
        let s = psi.to_radians().sin();
        xec.half_s2() * self.sigma_phi * s * s + xec.s1() * self.principal_sum
    }

    /// Lattice spacing at tilt `psi` for strain-free spacing `d0`.
    pub fn spacing_at(&self, psi: f64, xec: &ElasticConstants, d0: f64) -> f64 {
        d0 * (1.0 + self.strain_at(psi, xec))
    }

    /// Diffraction angle 2θ (degrees) at tilt `psi`.
    pub fn two_theta_at(
        &self,
        psi: f64,
        xec: &ElasticConstants,
        d0: f64,
        refl: &Reflection,
    ) -> Result<f64> {
        Ok(2.0 * bragg_angle(self.spacing_at(psi, xec, d0), refl)?)
    }
}

/// The nine-tilt grid ψ ∈ {0, ±15, ±25, ±35, ±45}°.
pub const NINE_TILTS: [f64; 9] = [-45.0, -35.0, -25.0, -15.0, 0.0, 15.0, 25.0, 35.0, 45.0];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        let g = angle_grid(90.5, 94.5, 0.02).unwrap();
        assert_eq!(g.len(), 201);
        assert!((g[200] - 94.5).abs() < 1e-12);
    }

    #[test]
    fn strain_formula() {
        let xec = ElasticConstants::new(6.55e-6, -1.55e-6).unwrap();
        let state = StressState {
            sigma_phi: -120.0,
            principal_sum: -240.0,
        };
        assert!((state.strain_at(0.0, &xec) - 3.72e-4).abs() < 1e-15);
        let e90 = state.strain_at(90.0, &xec);
        assert!((e90 - (6.55e-6 * -120.0 + 3.72e-4)).abs() < 1e-15);
    }

    #[test]
    fn compressive_stress_shrinks_tilted_spacing() {
        let xec = ElasticConstants::from_isotropic(200_000.0, 0.31).unwrap();
        let state = StressState::equibiaxial(-100.0);
        assert!(state.spacing_at(45.0, &xec, 1.0) < state.spacing_at(0.0, &xec, 1.0));
    }
}
