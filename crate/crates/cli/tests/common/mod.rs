//! Synthetic fixture set shared by the CLI tests.
//!
//! Every file under `tests/fixtures` is produced by [`fixture_files`]; the
//! `fixtures` test checks that the committed copies match byte for byte.
//! Set `NISTRESS_BLESS=1` to rewrite them (and the golden outputs).

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nistress::io::{
    write_calibration_csv, write_dose_csv, write_profile_csv, write_stress_stretch_csv,
};
use nistress::peakfit::PseudoVoigtParams;
use nistress::stretch::{DoseSeries, StressSource, StressStretchPair};
use nistress::strip::{CalibrationPoint, CalibrationTable, SignConvention};
use nistress::synthetic::{pseudo_voigt_profile, StressState, NINE_TILTS};
use nistress::xrd::{ElasticConstants, Reflection};

pub const WAVELENGTH: f64 = 1.5406;
pub const D0: f64 = 1.0625;
pub const HALF_S2: f64 = 6.55e-6;
pub const S1: f64 = -1.55e-6;

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixtures_dir() -> PathBuf {
    manifest_dir().join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    manifest_dir().join("tests/golden")
}

pub fn blessing() -> bool {
    std::env::var_os("NISTRESS_BLESS").is_some_and(|v| v == "1")
}

fn psi_tag(psi: f64) -> String {
    let sign = if psi < 0.0 { 'm' } else { 'p' };
    format!("psi_{sign}{:02}.csv", psi.abs() as u32)
}

/// Session plus nine pseudo-Voigt profiles for an equibiaxial stress.
fn session_files(dir: &str, sample_id: &str, sigma: f64) -> Vec<(PathBuf, String)> {
    let xec = ElasticConstants::new(HALF_S2, S1).unwrap();
    let refl = Reflection::new(WAVELENGTH, 1, "311").unwrap();
    let state = StressState::equibiaxial(sigma);
    let mut session = format!(
        "# Synthetic nickel (311) tilt series, equibiaxial {sigma} MPa.\n\
         sample_id = {sample_id}\n\
         wavelength_angstrom = {WAVELENGTH}\n\
         order = 1\n\
         hkl = 311\n\
         half_s2 = {HALF_S2:e}\n\
         s1 = {S1:e}\n\
         d0_policy = explicit\n\
         d0_angstrom = {D0}\n\
         peak_method = pseudo_voigt\n"
    );
    let mut files = Vec::new();
    for psi in NINE_TILTS {
        let params = PseudoVoigtParams {
            center: state.two_theta_at(psi, &xec, D0, &refl).unwrap(),
            fwhm: 0.5,
            height: 2000.0,
            eta: 0.4,
            background: 50.0,
        };
        let profile = pseudo_voigt_profile(&params, 90.5, 95.5, 0.02, psi, 0.0).unwrap();
        let name = psi_tag(psi);
        session.push_str(&format!("\n[tilt]\npsi_deg = {psi}\nprofile = {name}\n"));
        files.push((PathBuf::from(dir).join(&name), write_profile_csv(&profile)));
    }
    files.push((PathBuf::from(dir).join("session.txt"), session));
    files
}

pub fn fixture_files() -> Vec<(PathBuf, String)> {
    let mut files = session_files("st57_mandrel", "St57-mandrel", -120.0);
    files.extend(session_files("st57_free", "St57-free", -21.0));

    let cal = CalibrationTable::new(
        [
            (0.0, 0.0),
            (5.0, 600.0),
            (10.0, 1250.0),
            (20.0, 2600.0),
            (40.0, 5400.0),
        ]
        .into_iter()
        .map(|(deflection, stress_thickness)| CalibrationPoint {
            deflection,
            stress_thickness,
        })
        .collect(),
        SignConvention::SpreadMeansTensile,
    )
    .unwrap();
    files.push(("strip_calibration.csv".into(), write_calibration_csv(&cal)));

    let pairs: Vec<StressStretchPair> = [
        (-120.0, 231.0, StressSource::Xrd),
        (-75.0, 152.0, StressSource::StripAnalyzer),
        (-50.0, 93.0, StressSource::StripAnalyzer),
        (-37.0, 80.0, StressSource::Xrd),
        (-21.0, 38.0, StressSource::Xrd),
        (1.0, 4.0, StressSource::StripAnalyzer),
    ]
    .into_iter()
    .map(|(s, e, src)| StressStretchPair::new(s, e, src).unwrap())
    .collect();
    files.push((
        "stress_stretch.csv".into(),
        write_stress_stretch_csv(&pairs),
    ));

    let hardener = DoseSeries::new(
        "hardener",
        vec![(1, -18.0), (2, -31.0), (3, -47.0), (4, -66.0), (5, -80.0)],
    )
    .unwrap();
    let chloride = DoseSeries::new(
        "nickel_chloride",
        vec![(1, -64.0), (2, -52.0), (3, -40.0), (4, -29.0), (5, -15.0)],
    )
    .unwrap();
    files.push(("dose_hardener.csv".into(), write_dose_csv(&hardener)));
    files.push(("dose_chloride.csv".into(), write_dose_csv(&chloride)));
    files
}

pub fn nistress(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nistress"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("failed to launch nistress")
}

/// Compares `actual` with a golden file, rewriting it when blessing.
pub fn check_golden(name: &str, actual: &[u8]) -> Result<(), String> {
    let path = golden_dir().join(name);
    if blessing() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{} differs from the golden copy", path.display()))
    }
}
