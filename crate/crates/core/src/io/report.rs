//! Canonical text reports.
//!
//! Reports are `key = value` lines grouped under `[section]` headers with a
//! fixed key order and fixed number formatting: stresses in MPa to one
//! decimal, strains in scientific notation with four significant digits.
//! Apart from the optional `generated_at` line, identical inputs always
//! produce identical bytes.

use std::fmt::Write as _;

use crate::io::session::{combined_digest, ElasticInput, InputDigest, SessionAnalysis};
use crate::peakfit::{DiffractionProfile, PeakEstimate};
use crate::sin2psi::{D0Policy, Relaxation, SplitReport, StressFit};
use crate::stretch::{LinearModel, TrendReport};
use crate::strip::{SignConvention, StripReading};
use crate::xrd::{ElasticConstants, Reflection};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_FORMAT: u32 = 1;

/// Confidence level of the interval printed with every stress fit.
const REPORTED_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMethod {
    XrdSin2psi,
    StripAnalyzer,
}

impl ReportMethod {
    pub fn tag(self) -> &'static str {
        match self {
            ReportMethod::XrdSin2psi => "xrd_sin2psi",
            ReportMethod::StripAnalyzer => "strip_analyzer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRow {
    pub psi: f64,
    pub sin2psi: f64,
    pub two_theta: f64,
    pub strain: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XrdResult {
    pub reflection: Reflection,
    pub elastic_input: ElasticInput,
    pub elastic_constants: ElasticConstants,
    pub d0_policy: D0Policy,
    pub peak_method: &'static str,
    pub fit: StressFit,
    pub split: Option<SplitReport>,
    pub points: Vec<PointRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripResult {
    pub reading: StripReading,
    pub sign_convention: SignConvention,
    pub stress_thickness: f64,
    pub stress_mpa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportResult {
    Xrd(Box<XrdResult>),
    Strip(StripResult),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub sample_id: String,
    pub result: ReportResult,
    pub inputs: Vec<InputDigest>,
    pub toolkit_version: String,
    /// RFC 3339 timestamp; `None` suppresses the line.
    pub generated_at: Option<String>,
}

impl SessionReport {
    pub fn method(&self) -> ReportMethod {
        match self.result {
            ReportResult::Xrd(_) => ReportMethod::XrdSin2psi,
            ReportResult::Strip(_) => ReportMethod::StripAnalyzer,
        }
    }

    pub fn from_analysis(analysis: &SessionAnalysis, generated_at: Option<String>) -> Self {
        let d = &analysis.descriptor;
        let points = analysis
            .points
            .iter()
            .zip(&analysis.peaks)
            .map(|(p, peak)| PointRow {
                psi: p.psi(),
                sin2psi: p.sin2psi(),
                two_theta: peak.peak.center_two_theta,
                strain: p.strain().value(),
                weight: p.weight(),
            })
            .collect();
        Self {
            sample_id: d.sample_id.clone(),
            result: ReportResult::Xrd(Box::new(XrdResult {
                reflection: d.reflection.clone(),
                elastic_input: d.elastic,
                elastic_constants: analysis.elastic_constants,
                d0_policy: d.d0_policy,
                peak_method: d.peak.method.tag(),
                fit: analysis.fit,
                split: analysis.split,
                points,
            })),
            inputs: analysis.inputs.clone(),
            toolkit_version: TOOLKIT_VERSION.to_string(),
            generated_at,
        }
    }
}

/// Stress in MPa, one decimal, never `-0.0`.
pub fn fmt_stress(v: f64) -> String {
    let s = format!("{v:.1}");
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

/// Scientific notation with four significant digits, never negative zero.
pub fn fmt_sci(v: f64) -> String {
    let s = format!("{v:.3e}");
    match s.strip_prefix('-') {
        Some(rest) if rest == "0.000e0" => rest.to_string(),
        _ => s,
    }
}

fn fmt_fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

struct Doc(String);

impl Doc {
    fn new(title: &str) -> Self {
        Doc(format!("# {title}\n"))
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }

    fn section(&mut self, name: &str) {
        let _ = write!(self.0, "\n[{name}]\n");
    }

    fn line(&mut self, text: &str) {
        self.0.push_str(text);
        self.0.push('\n');
    }

    fn preamble(&mut self, version: &str, generated_at: &Option<String>) {
        self.kv("format", REPORT_FORMAT);
        self.kv("toolkit_version", version);
        if let Some(ts) = generated_at {
            self.kv("generated_at", ts);
        }
    }

    fn inputs(&mut self, inputs: &[InputDigest]) {
        if inputs.is_empty() {
            return;
        }
        self.section("inputs");
        self.kv("combined_sha256", combined_digest(inputs));
        for d in inputs {
            self.kv(&format!("sha256[{}]", d.name), &d.sha256);
        }
    }

    fn stress_fit(&mut self, fit: &StressFit) {
        self.kv("sigma_phi_mpa", fmt_stress(fit.sigma_phi));
        self.kv("sigma_phi_stderr_mpa", fmt_stress(fit.sigma_phi_stderr));
        if let Ok((lo, hi)) = fit.confidence_interval(REPORTED_CONFIDENCE) {
            self.kv("ci95_low_mpa", fmt_stress(lo));
            self.kv("ci95_high_mpa", fmt_stress(hi));
        }
        self.kv("intercept_strain", fmt_sci(fit.intercept));
        self.kv("intercept_stderr", fmt_sci(fit.intercept_stderr));
        self.kv("r_squared", fmt_fixed(fit.r_squared, 4));
        self.kv("n_points", fit.n_points);
        self.kv("phi_deg", fmt_fixed(fit.phi, 1));
        self.kv("penetration_depth_um", fit.metadata.penetration_depth_um);
        self.kv("measured_area_mm2", fit.metadata.measured_area_mm2);
    }
}

/// Renders a session report.
pub fn emit_report(report: &SessionReport) -> Vec<u8> {
    let mut doc = Doc::new("nistress report");
    doc.preamble(&report.toolkit_version, &report.generated_at);
    doc.kv("sample_id", &report.sample_id);
    doc.kv("method", report.method().tag());
    doc.inputs(&report.inputs);

    match &report.result {
        ReportResult::Xrd(x) => {
            doc.section("reflection");
            doc.kv("wavelength_angstrom", x.reflection.wavelength());
            doc.kv("order", x.reflection.order());
            doc.kv("hkl", x.reflection.hkl());

            doc.section("elastic_constants");
            match x.elastic_input {
                ElasticInput::Constants { .. } => doc.kv("source", "explicit"),
                ElasticInput::Isotropic {
                    young_modulus,
                    poisson_ratio,
                } => {
                    doc.kv("source", "isotropic");
                    doc.kv("young_modulus_mpa", young_modulus);
                    doc.kv("poisson_ratio", poisson_ratio);
                }
            }
            doc.kv("half_s2_per_mpa", fmt_sci(x.elastic_constants.half_s2()));
            doc.kv("s1_per_mpa", fmt_sci(x.elastic_constants.s1()));

            doc.section("analysis");
            doc.kv("peak_method", x.peak_method);
            match x.d0_policy {
                D0Policy::PsiZero => doc.kv("d0_policy", "psi0"),
                D0Policy::Explicit(d0) => {
                    doc.kv("d0_policy", "explicit");
                    doc.kv("d0_angstrom", d0);
                }
            }

            doc.section("stress");
            doc.stress_fit(&x.fit);

            doc.section("psi_splitting");
            match &x.split {
                Some(s) => {
                    doc.kv("pairs", s.pairs);
                    doc.kv("max_branch_gap", fmt_sci(s.max_branch_gap));
                    doc.kv("gap_threshold", fmt_sci(s.gap_threshold));
                    doc.kv("split_detected", s.split_detected);
                }
                None => doc.kv("pairs", 0),
            }

            doc.section("points");
            doc.line("# psi_deg,sin2psi,two_theta_deg,strain,weight");
            for p in &x.points {
                doc.line(&format!(
                    "{},{},{},{},{}",
                    fmt_fixed(p.psi, 2),
                    fmt_fixed(p.sin2psi, 6),
                    fmt_fixed(p.two_theta, 6),
                    fmt_sci(p.strain),
                    fmt_sci(p.weight)
                ));
            }
        }
        ReportResult::Strip(s) => {
            doc.section("strip");
            doc.kv("deflection_increments", s.reading.deflection);
            doc.kv("deposit_thickness_um", s.reading.deposit_thickness);
            doc.kv("bend_direction", s.reading.bend_direction.tag());
            doc.kv("sign_convention", s.sign_convention.tag());
            doc.kv("stress_thickness_mpa_um", fmt_fixed(s.stress_thickness, 3));
            doc.kv("stress_mpa", fmt_stress(s.stress_mpa));
        }
    }
    doc.0.into_bytes()
}

/// Side-by-side comparison of a deposit on its mandrel and after release.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationReport {
    pub on_mandrel: (String, StressFit),
    pub free_standing: (String, StressFit),
    pub relaxation: Relaxation,
    pub inputs: Vec<InputDigest>,
    pub toolkit_version: String,
    pub generated_at: Option<String>,
}

pub fn emit_relaxation_report(report: &RelaxationReport) -> Vec<u8> {
    let mut doc = Doc::new("nistress relaxation report");
    doc.preamble(&report.toolkit_version, &report.generated_at);
    doc.kv("method", ReportMethod::XrdSin2psi.tag());
    doc.inputs(&report.inputs);
    for (name, (sample, fit)) in [
        ("on_mandrel", &report.on_mandrel),
        ("free_standing", &report.free_standing),
    ] {
        doc.section(name);
        doc.kv("sample_id", sample);
        doc.stress_fit(fit);
    }
    doc.section("relaxation");
    doc.kv("verdict", report.relaxation.verdict.tag());
    doc.kv("delta_mpa", fmt_stress(report.relaxation.delta));
    doc.kv("tolerance_mpa", fmt_stress(report.relaxation.tolerance));
    doc.0.into_bytes()
}

/// Stress → stretch model summary with optional predictions.
pub fn emit_stretch_report(model: &LinearModel, predictions: &[(f64, f64)]) -> Vec<u8> {
    let mut doc = Doc::new("nistress stress-stretch model");
    doc.kv("format", REPORT_FORMAT);
    doc.kv("toolkit_version", TOOLKIT_VERSION);
    doc.section("model");
    doc.kv("slope_ppm_per_mpa", fmt_sci(model.slope));
    doc.kv("intercept_ppm", fmt_fixed(model.intercept, 2));
    doc.kv("r_squared", fmt_fixed(model.r_squared, 4));
    doc.kv("n", model.n);
    if !predictions.is_empty() {
        doc.section("predictions");
        doc.line("# stress_mpa,stretch_ppm");
        for (stress, stretch) in predictions {
            doc.line(&format!(
                "{},{}",
                fmt_stress(*stress),
                fmt_fixed(*stretch, 2)
            ));
        }
    }
    doc.0.into_bytes()
}

pub fn emit_trend_report(trend: &TrendReport) -> Vec<u8> {
    let mut doc = Doc::new("nistress additive trend");
    doc.kv("format", REPORT_FORMAT);
    doc.kv("toolkit_version", TOOLKIT_VERSION);
    doc.section("trend");
    doc.kv("additive", &trend.additive_name);
    doc.kv("direction", trend.direction.tag());
    doc.kv("spearman_rho", fmt_fixed(trend.spearman_rho, 4));
    doc.kv("slope_sign", trend.slope_sign.tag());
    doc.kv("rho_threshold", trend.rho_threshold);
    doc.0.into_bytes()
}

/// Single-profile peak position.
pub fn emit_peak_report(
    input: &InputDigest,
    profile: &DiffractionProfile,
    peak: &PeakEstimate,
) -> Vec<u8> {
    let mut doc = Doc::new("nistress peak fit");
    doc.kv("format", REPORT_FORMAT);
    doc.kv("toolkit_version", TOOLKIT_VERSION);
    doc.inputs(std::slice::from_ref(input));
    doc.section("peak");
    doc.kv("method", peak.method.tag());
    doc.kv("psi_deg", profile.psi());
    doc.kv("phi_deg", profile.phi());
    doc.kv("center_two_theta_deg", fmt_fixed(peak.center_two_theta, 6));
    doc.kv("center_uncertainty_deg", fmt_sci(peak.center_uncertainty));
    doc.kv("height_counts", fmt_fixed(peak.height, 2));
    doc.kv("fwhm_deg", fmt_fixed(peak.fwhm, 6));
    doc.0.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sin2psi::MeasurementMetadata;
    use crate::strip::BendDirection;

    fn fit(sigma: f64) -> StressFit {
        StressFit {
            sigma_phi: sigma,
            sigma_phi_stderr: 4.25,
            intercept: 3.72e-4,
            intercept_stderr: 1.1e-6,
            r_squared: 0.99871,
            n_points: 9,
            phi: 0.0,
            metadata: MeasurementMetadata::default(),
        }
    }

    fn xrd_report(sigma: f64) -> SessionReport {
        SessionReport {
            sample_id: "St57".into(),
            result: ReportResult::Xrd(Box::new(XrdResult {
                reflection: Reflection::new(1.5406, 1, "311").unwrap(),
                elastic_input: ElasticInput::Constants {
                    half_s2: 6.55e-6,
                    s1: -1.55e-6,
                },
                elastic_constants: ElasticConstants::new(6.55e-6, -1.55e-6).unwrap(),
                d0_policy: D0Policy::PsiZero,
                peak_method: "pseudo_voigt",
                fit: fit(sigma),
                split: None,
                points: vec![PointRow {
                    psi: -45.0,
                    sin2psi: 0.5,
                    two_theta: 92.51,
                    strain: -4.14e-5,
                    weight: 1.0,
                }],
            })),
            inputs: vec![InputDigest::of("s.session", b"abc")],
            toolkit_version: "0.1.0".into(),
            generated_at: None,
        }
    }

    #[test]
    fn emitting_is_deterministic() {
        let r = xrd_report(-120.0);
        assert_eq!(emit_report(&r), emit_report(&r));
    }

    #[test]
    fn table_value_renders_with_one_decimal() {
        let text = String::from_utf8(emit_report(&xrd_report(-120.0))).unwrap();
        assert!(text.contains("sigma_phi_mpa = -120.0\n"), "{text}");
        assert!(text.contains("intercept_strain = 3.720e-4\n"));
        assert!(text.contains("method = xrd_sin2psi\n"));
        assert!(text.contains("penetration_depth_um = 3.5\n"));
        assert!(text.contains("measured_area_mm2 = 0.126\n"));
        assert!(text.contains("-45.00,0.500000,92.510000,-4.140e-5,1.000e0\n"));
        assert!(!text.contains("generated_at"));
    }

    #[test]
    fn timestamp_only_when_requested() {
        let mut r = xrd_report(-120.0);
        r.generated_at = Some("2026-10-16T00:00:00Z".into());
        let text = String::from_utf8(emit_report(&r)).unwrap();
        assert!(text.contains("generated_at = 2026-10-16T00:00:00Z\n"));
    }

    #[test]
    fn negative_zero_is_normalized() {
        assert_eq!(fmt_stress(-0.04), "0.0");
        assert_eq!(fmt_stress(-0.0), "0.0");
        assert_eq!(fmt_sci(-0.0), "0.000e0");
        assert_eq!(fmt_fixed(-0.00001, 2), "0.00");
        assert_eq!(fmt_stress(-37.25), "-37.2");
    }

    #[test]
    fn strip_report() {
        let r = SessionReport {
            sample_id: "strip".into(),
            result: ReportResult::Strip(StripResult {
                reading: StripReading::new(0.0, 20.0, BendDirection::TowardDeposit).unwrap(),
                sign_convention: SignConvention::SpreadMeansTensile,
                stress_thickness: 0.0,
                stress_mpa: 0.0,
            }),
            inputs: vec![],
            toolkit_version: "0.1.0".into(),
            generated_at: None,
        };
        let text = String::from_utf8(emit_report(&r)).unwrap();
        assert!(text.contains("method = strip_analyzer\n"));
        assert!(text.contains("stress_mpa = 0.0\n"));
    }
}
