//! Bragg geometry, lattice strain and X-ray elastic constants.
//!
//! Angles are given in degrees; Bragg angles θ are half of the measured
//! diffraction angle 2θ.

use crate::error::{Error, Result};

/// Largest lattice strain magnitude accepted as elastic.
pub const STRAIN_BOUND: f64 = 0.05;

/// A diffracting reflection: wavelength, diffraction order and {hkl} tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    wavelength: f64,
    order: u32,
    hkl: String,
}

impl Reflection {
    pub fn new(wavelength: f64, order: u32, hkl: impl Into<String>) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::domain(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if order == 0 {
            return Err(Error::domain("diffraction order must be at least 1"));
        }
        Ok(Self {
            wavelength,
            order,
            hkl: hkl.into(),
        })
    }

    /// Wavelength in Å.
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn hkl(&self) -> &str {
        &self.hkl
    }

    /// n·λ in Å.
    pub fn path_difference(&self) -> f64 {
        f64::from(self.order) * self.wavelength
    }
}

/// X-ray elastic constants ½S₂{hkl} and s₁{hkl}, in MPa⁻¹.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticConstants {
    half_s2: f64,
    s1: f64,
}

impl ElasticConstants {
    pub fn new(half_s2: f64, s1: f64) -> Result<Self> {
        if !(half_s2.is_finite() && s1.is_finite()) {
            return Err(Error::domain("elastic constants must be finite"));
        }
        if half_s2 <= 0.0 {
            return Err(Error::domain(format!(
                "½S₂ must be positive, got {half_s2:e}"
            )));
        }
        if half_s2 + 2.0 * s1 <= 0.0 {
            return Err(Error::domain(format!(
                "½S₂ + 2·s₁ must be positive, got {:e}",
                half_s2 + 2.0 * s1
            )));
        }
        Ok(Self { half_s2, s1 })
    }

    /// Constants of an elastically isotropic material:
    /// ½S₂ = (1 + ν)/E and s₁ = −ν/E.
    pub fn from_isotropic(young_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        if !(young_modulus.is_finite() && young_modulus > 0.0) {
            return Err(Error::domain(format!(
                "Young's modulus must be positive, got {young_modulus}"
            )));
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(Error::domain(format!(
                "Poisson ratio must lie in (-1, 0.5), got {poisson_ratio}"
            )));
        }
        Self::new(
            (1.0 + poisson_ratio) / young_modulus,
            -poisson_ratio / young_modulus,
        )
    }

    pub fn half_s2(&self) -> f64 {
        self.half_s2
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }
}

/// Dimensionless lattice strain, bounded by [`STRAIN_BOUND`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct StrainValue(f64);

impl StrainValue {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon.abs() >= STRAIN_BOUND {
            return Err(Error::ImplausibleStrain {
                strain: epsilon,
                bound: STRAIN_BOUND,
            });
        }
        Ok(Self(epsilon))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Lattice spacing d = n·λ / (2 sin θ) for Bragg angle `theta` (degrees).
pub fn lattice_spacing(theta: f64, refl: &Reflection) -> Result<f64> {
    if !(theta > 0.0 && theta < 90.0) {
        return Err(Error::domain(format!(
            "Bragg angle must lie in (0°, 90°), got {theta}°"
        )));
    }
    Ok(refl.path_difference() / (2.0 * theta.to_radians().sin()))
}

/// Bragg angle θ (degrees) at which spacing `d` diffracts.
pub fn bragg_angle(d: f64, refl: &Reflection) -> Result<f64> {
    let n_lambda = refl.path_difference();
    if !(d.is_finite() && n_lambda < 2.0 * d) {
        return Err(Error::NoDiffraction {
            n_lambda,
            two_d: 2.0 * d,
        });
    }
    Ok((n_lambda / (2.0 * d)).asin().to_degrees())
}

/// ε = (d − d0)/d0.
pub fn strain_from_spacing(d: f64, d0: f64) -> Result<StrainValue> {
    if !(d0.is_finite() && d0 > 0.0) {
        return Err(Error::domain(format!("d0 must be positive, got {d0}")));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::domain(format!("d must be positive, got {d}")));
    }
    StrainValue::new((d - d0) / d0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn refl(lambda: f64, n: u32) -> Reflection {
        Reflection::new(lambda, n, "311").unwrap()
    }

    #[test]
    fn spacing_at_thirty_degrees() {
        let d = lattice_spacing(30.0, &refl(2.0, 1)).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spacing_near_grazing_limit() {
        let d = lattice_spacing(90.0 - 1e-9, &refl(3.0, 1)).unwrap();
        assert!((d - 1.5).abs() < 1e-12);
    }

    #[test]
    fn spacing_cu_kalpha_fixture() {
        // 1.5406 / (2 sin 46.24°), evaluated with mpmath at 30 digits.
        let d = lattice_spacing(46.24, &refl(1.5406, 1)).unwrap();
        assert!((d - 1.066_538_164_423_200_8).abs() < 1e-14, "{d}");
    }

    #[test]
    fn spacing_rejects_out_of_range_angles() {
        for theta in [0.0, -1.0, 90.0, 120.0, f64::NAN] {
            assert!(matches!(
                lattice_spacing(theta, &refl(1.0, 1)),
                Err(Error::Domain(_))
            ));
        }
    }

    #[test]
    fn bragg_angle_inverse_of_thirty_degrees() {
        let theta = bragg_angle(2.0, &refl(2.0, 1)).unwrap();
        assert!((theta - 30.0).abs() < 1e-12);
    }

    #[test]
    fn bragg_angle_boundary_has_no_diffraction() {
        assert!(matches!(
            bragg_angle(1.0, &refl(2.0, 1)),
            Err(Error::NoDiffraction { .. })
        ));
        assert!(matches!(
            bragg_angle(1.5, &refl(1.0, 3)),
            Err(Error::NoDiffraction { .. })
        ));
    }

    #[test]
    fn strain_examples() {
        assert_eq!(strain_from_spacing(2.034, 2.034).unwrap().value(), 0.0);
        let e = strain_from_spacing(1.001 * 2.5, 2.5).unwrap().value();
        assert!((e - 1.0e-3).abs() < 1e-15);
        // (2.0338 − 2.034)/2.034 = −9.832841691248770894788593903638e-5
        let e = strain_from_spacing(2.0338, 2.034).unwrap().value();
        // Decimal inputs carry ~1e-16 representation error; the difference amplifies it.
        assert!((e - -9.832_841_691_248_771e-5).abs() < 1e-16, "{e:e}");
    }

    #[test]
    fn implausible_strain_is_an_error() {
        assert!(matches!(
            strain_from_spacing(2.2, 2.0),
            Err(Error::ImplausibleStrain { .. })
        ));
        assert!(matches!(
            strain_from_spacing(1.0, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn isotropic_constants() {
        let xec = ElasticConstants::from_isotropic(100_000.0, 0.0).unwrap();
        assert_eq!(xec.half_s2(), 1e-5);
        assert_eq!(xec.s1(), 0.0);

        let xec = ElasticConstants::from_isotropic(200_000.0, 0.31).unwrap();
        assert!((xec.half_s2() - 6.55e-6).abs() < 1e-20);
        assert!((xec.s1() - -1.55e-6).abs() < 1e-20);

        let doubled = ElasticConstants::from_isotropic(400_000.0, 0.31).unwrap();
        assert!((doubled.half_s2() - xec.half_s2() / 2.0).abs() < 1e-21);
        assert!((doubled.s1() - xec.s1() / 2.0).abs() < 1e-21);
    }

    #[test]
    fn isotropic_constants_reject_bad_inputs() {
        for (e, nu) in [(0.0, 0.3), (-1.0, 0.3), (2e5, 0.5), (2e5, -1.0), (2e5, 0.7)] {
            assert!(ElasticConstants::from_isotropic(e, nu).is_err(), "{e} {nu}");
        }
        assert!(ElasticConstants::new(0.0, 0.0).is_err());
        assert!(ElasticConstants::new(1e-5, -0.6e-5).is_err());
    }

    #[test]
    fn reflection_validation() {
        assert!(Reflection::new(0.0, 1, "").is_err());
        assert!(Reflection::new(1.5, 0, "").is_err());
    }

    proptest! {
        #[test]
        fn bragg_round_trip(lambda in 0.5f64..2.5, n in 1u32..4, s in 0.02f64..0.9999) {
            let r = refl(lambda, n);
            let d = r.path_difference() / (2.0 * s);
            let theta = bragg_angle(d, &r).unwrap();
            let back = lattice_spacing(theta, &r).unwrap();
            prop_assert!(((back - d) / d).abs() < 1e-12);
        }

        #[test]
        fn spacing_strictly_decreasing(a in 0.1f64..89.8, gap in 0.01f64..0.1) {
            let r = refl(1.5406, 1);
            prop_assert!(lattice_spacing(a, &r).unwrap() > lattice_spacing(a + gap, &r).unwrap());
        }

        #[test]
        fn zero_strain_at_reference(d0 in 0.1f64..10.0) {
            prop_assert_eq!(strain_from_spacing(d0, d0).unwrap().value(), 0.0);
        }

        #[test]
        fn isotropic_constants_always_valid(e in 1.0f64..1e6, nu in -0.999f64..0.499) {
            let xec = ElasticConstants::from_isotropic(e, nu).unwrap();
            prop_assert!(xec.half_s2() > 0.0);
            prop_assert!(xec.half_s2() + 2.0 * xec.s1() > 0.0);
        }
    }
}
