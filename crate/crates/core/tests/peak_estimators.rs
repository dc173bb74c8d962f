use nistress::peakfit::{
    estimate_peak, fit_pseudo_voigt, DiffractionProfile, PeakEstimate, PeakMethod, PeakSettings,
    PseudoVoigtOptions, PseudoVoigtParams,
};
use nistress::synthetic::{gaussian_profile, pseudo_voigt_profile};
use proptest::prelude::*;

const METHODS: [PeakMethod; 3] = [
    PeakMethod::Centroid,
    PeakMethod::Parabolic,
    PeakMethod::PseudoVoigt,
];

fn run(profile: &DiffractionProfile, method: PeakMethod) -> PeakEstimate {
    let settings = PeakSettings {
        method,
        ..PeakSettings::default()
    };
    estimate_peak(profile, &settings).unwrap()
}

#[test]
fn gaussian_center_recovered_by_every_estimator() {
    for center in [92.5f64, 92.513, 92.5371, 98.04] {
        // Grid anchored on whole degrees so the peak sits between samples.
        let start = center.floor() - 2.0;
        let p = gaussian_profile(center, 0.5, 1000.0, start, start + 5.0, 0.02, 0.0, 0.0).unwrap();
        for m in METHODS {
            let est = run(&p, m);
            assert!(
                (est.center_two_theta - center).abs() < 0.002,
                "{m:?} at {center}: {}",
                est.center_two_theta
            );
        }
    }
}

#[test]
fn pseudo_voigt_recovers_its_own_parameters() {
    let truth = PseudoVoigtParams {
        center: 98.3127,
        fwhm: 0.62,
        height: 4200.0,
        eta: 0.35,
        background: 120.0,
    };
    let p = pseudo_voigt_profile(&truth, 96.0, 100.5, 0.02, 15.0, 0.0).unwrap();
    let init = PeakEstimate {
        center_two_theta: 98.25,
        center_uncertainty: 0.0,
        height: 4000.0,
        fwhm: 0.0,
        method: PeakMethod::Centroid,
    };
    let fit = fit_pseudo_voigt(&p, &init, &PseudoVoigtOptions::default()).unwrap();
    assert!((fit.params.center - truth.center).abs() < 1e-4);
    assert!((fit.params.fwhm - truth.fwhm).abs() < 1e-6);
    assert!((fit.params.eta - truth.eta).abs() < 1e-6);
    assert!((fit.params.background - truth.background).abs() < 1e-4);
}

#[test]
fn poisson_weighting_keeps_noise_free_center() {
    let truth = PseudoVoigtParams {
        center: 92.47,
        fwhm: 0.45,
        height: 900.0,
        eta: 0.6,
        background: 30.0,
    };
    let p = pseudo_voigt_profile(&truth, 90.5, 94.5, 0.02, 0.0, 0.0).unwrap();
    let settings = PeakSettings {
        pseudo_voigt: PseudoVoigtOptions {
            poisson_weighting: true,
            ..PseudoVoigtOptions::default()
        },
        ..PeakSettings::default()
    };
    let est = estimate_peak(&p, &settings).unwrap();
    assert!((est.center_two_theta - truth.center).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn estimators_agree_on_symmetric_peaks(
        center in 80.0f64..110.0,
        fwhm in 0.3f64..0.8,
        height in 200.0f64..5e4,
    ) {
        let start = center.floor() - 2.5;
        let p = gaussian_profile(center, fwhm, height, start, start + 6.0, 0.02, 0.0, 0.0).unwrap();
        let c: Vec<f64> = METHODS.iter().map(|&m| run(&p, m).center_two_theta).collect();
        for a in &c {
            for b in &c {
                prop_assert!((a - b).abs() < 0.005, "{c:?}");
            }
        }
    }

    #[test]
    fn constant_offset_leaves_center_unchanged(
        center in 85.0f64..105.0,
        offset in 0.0f64..2000.0,
    ) {
        let start = center.floor() - 2.0;
        let p = gaussian_profile(center, 0.5, 1000.0, start, start + 5.0, 0.02, 0.0, 0.0).unwrap();
        let lifted = p.map_intensity(|i| i + offset).unwrap();
        for m in METHODS {
            let (a, b) = (run(&p, m).center_two_theta, run(&lifted, m).center_two_theta);
            prop_assert!((a - b).abs() < 1e-6, "{m:?}: {a} vs {b}");
        }
    }
}
