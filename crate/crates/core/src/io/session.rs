//! Session files and the XRD analysis pipeline they drive.
//!
//! A session file is a sectioned `key = value` document:
//!
//! ```text
//! # Global settings come first.
//! sample_id = St57
//! wavelength_angstrom = 1.5406
//! order = 1
//! hkl = 311
//! half_s2 = 6.55e-6            # or: young_modulus_mpa / poisson_ratio
//! s1 = -1.55e-6
//! d0_policy = psi0             # or: explicit, with d0_angstrom
//! peak_method = pseudo_voigt   # centroid | parabolic | pseudo_voigt
//!
//! [tilt]
//! psi_deg = 0
//! profile = tilt_p00.csv
//! ```
//!
//! `#` starts a comment anywhere on a line. Every `[tilt]` section adds one
//! profile; repeated ψ values are legitimate replicates. Relative profile
//! paths are resolved against the session file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::formats::{decode_utf8, parse_profile_csv};
use crate::peakfit::{estimate_peak, PeakMethod, PeakSettings};
use crate::sin2psi::{
    build_strain_points, detect_psi_splitting, fit_sin2psi, D0Policy, MeasurementMetadata,
    SplitReport, StressFit, TiltMeasurement, TiltPeak,
};
use crate::xrd::{ElasticConstants, Reflection};

/// Default ψ-splitting threshold (strain).
pub const DEFAULT_SPLIT_THRESHOLD: f64 = 1e-5;

/// How the X-ray elastic constants were specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElasticInput {
    Constants {
        half_s2: f64,
        s1: f64,
    },
    Isotropic {
        young_modulus: f64,
        poisson_ratio: f64,
    },
}

impl ElasticInput {
    pub fn resolve(&self) -> Result<ElasticConstants> {
        match *self {
            ElasticInput::Constants { half_s2, s1 } => ElasticConstants::new(half_s2, s1),
            ElasticInput::Isotropic {
                young_modulus,
                poisson_ratio,
            } => ElasticConstants::from_isotropic(young_modulus, poisson_ratio),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltEntry {
    pub psi: f64,
    /// Path exactly as written in the session file.
    pub profile: String,
    /// `profile` resolved against the session directory.
    pub resolved: PathBuf,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionDescriptor {
    pub sample_id: String,
    pub reflection: Reflection,
    pub elastic: ElasticInput,
    pub d0_policy: D0Policy,
    pub peak: PeakSettings,
    pub metadata: MeasurementMetadata,
    pub split_threshold: f64,
    pub tilts: Vec<TiltEntry>,
}

const GLOBAL_KEYS: &[&str] = &[
    "sample_id",
    "wavelength_angstrom",
    "order",
    "hkl",
    "half_s2",
    "s1",
    "young_modulus_mpa",
    "poisson_ratio",
    "d0_policy",
    "d0_angstrom",
    "peak_method",
    "background_edge_fraction",
    "centroid_threshold",
    "parabolic_window",
    "poisson_weighting",
    "split_threshold",
    "penetration_depth_um",
    "measured_area_mm2",
];

const TILT_KEYS: &[&str] = &["psi_deg", "profile"];

type Section = BTreeMap<String, (usize, String)>;

struct Fields {
    map: Section,
    /// Line to blame for a missing key.
    anchor: usize,
}

impl Fields {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn required(&self, key: &str) -> Result<(usize, &str)> {
        self.raw(key)
            .ok_or_else(|| Error::format(self.anchor, format!("missing required key `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::format(line, format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.parse::<f64>(key)? {
            Some(v) if !v.is_finite() => Err(Error::format(
                self.raw(key).unwrap().0,
                format!("`{key}` must be finite"),
            )),
            other => Ok(other),
        }
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(a, _)| a).trim()
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

/// Parses and validates a session document.
pub fn parse_session(bytes: &[u8], base_dir: &Path) -> Result<SessionDescriptor> {
    let text = decode_utf8(bytes)?;
    let mut global = Fields {
        map: Section::new(),
        anchor: 1,
    };
    let mut tilts: Vec<Fields> = Vec::new();
    let mut last_line = 1;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = strip_comment(raw);
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            if name.trim() != "tilt" {
                return Err(Error::format(
                    line,
                    format!("unknown section `[{}]`", name.trim()),
                ));
            }
            tilts.push(Fields {
                map: Section::new(),
                anchor: line,
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            Error::format(line, format!("expected `key = value`, found `{content}`"))
        })?;
        let key = key.trim();
        let value = unquote(value.trim());
        let (section, allowed, where_) = match tilts.last_mut() {
            Some(t) => (t, TILT_KEYS, "[tilt] section"),
            None => (&mut global, GLOBAL_KEYS, "session header"),
        };
        if !allowed.contains(&key) {
            return Err(Error::format(
                line,
                format!("unknown key `{key}` in {where_}"),
            ));
        }
        if section
            .map
            .insert(key.to_string(), (line, value.to_string()))
            .is_some()
        {
            return Err(Error::format(line, format!("duplicate key `{key}`")));
        }
    }

    let sample_id = global.required("sample_id")?.1.to_string();
    let wavelength = global
        .number("wavelength_angstrom")?
        .ok_or_else(|| Error::format(1, "missing required key `wavelength_angstrom`"))?;
    let order = global.parse::<u32>("order")?.unwrap_or(1);
    let hkl = global.raw("hkl").map_or("", |(_, v)| v).to_string();
    let reflection = Reflection::new(wavelength, order, hkl).map_err(|e| {
        Error::format(
            global.required("wavelength_angstrom").unwrap().0,
            e.to_string(),
        )
    })?;

    let explicit = global.has("half_s2") || global.has("s1");
    let isotropic = global.has("young_modulus_mpa") || global.has("poisson_ratio");
    let elastic = match (explicit, isotropic) {
        (true, true) => {
            return Err(Error::format(
                global
                    .required("young_modulus_mpa")
                    .or(global.required("poisson_ratio"))?
                    .0,
                "give either half_s2/s1 or young_modulus_mpa/poisson_ratio, not both",
            ))
        }
        (true, false) => ElasticInput::Constants {
            half_s2: global
                .number("half_s2")?
                .ok_or_else(|| Error::format(1, "missing required key `half_s2`"))?,
            s1: global
                .number("s1")?
                .ok_or_else(|| Error::format(1, "missing required key `s1`"))?,
        },
        (false, true) => ElasticInput::Isotropic {
            young_modulus: global
                .number("young_modulus_mpa")?
                .ok_or_else(|| Error::format(1, "missing required key `young_modulus_mpa`"))?,
            poisson_ratio: global
                .number("poisson_ratio")?
                .ok_or_else(|| Error::format(1, "missing required key `poisson_ratio`"))?,
        },
        (false, false) => {
            return Err(Error::format(
                1,
                "missing elastic constants: give half_s2/s1 or young_modulus_mpa/poisson_ratio",
            ))
        }
    };
    let elastic_line = ["half_s2", "s1", "young_modulus_mpa", "poisson_ratio"]
        .iter()
        .filter_map(|k| global.raw(k).map(|(l, _)| l))
        .max()
        .unwrap_or(1);
    elastic
        .resolve()
        .map_err(|e| Error::format(elastic_line, e.to_string()))?;

    let d0_policy = match global.raw("d0_policy") {
        None | Some((_, "psi0")) => {
            if let Some((line, _)) = global.raw("d0_angstrom") {
                return Err(Error::format(
                    line,
                    "d0_angstrom requires d0_policy = explicit",
                ));
            }
            D0Policy::PsiZero
        }
        Some((line, "explicit")) => {
            let d0 = global
                .number("d0_angstrom")?
                .ok_or_else(|| Error::format(line, "d0_policy = explicit requires d0_angstrom"))?;
            if d0 <= 0.0 {
                return Err(Error::format(
                    global.raw("d0_angstrom").unwrap().0,
                    "d0_angstrom must be positive",
                ));
            }
            D0Policy::Explicit(d0)
        }
        Some((line, other)) => {
            return Err(Error::format(
                line,
                format!("unknown d0_policy `{other}` (expected psi0 or explicit)"),
            ))
        }
    };

    let mut peak = PeakSettings::default();
    if let Some((line, v)) = global.raw("peak_method") {
        peak.method = v
            .parse::<PeakMethod>()
            .map_err(|e| Error::format(line, e.to_string()))?;
    }
    if let Some(v) = global.number("background_edge_fraction")? {
        if !(v > 0.0 && v <= 0.4) {
            return Err(Error::format(
                global.raw("background_edge_fraction").unwrap().0,
                "background_edge_fraction must lie in (0, 0.4]",
            ));
        }
        peak.background_edge_fraction = v;
    }
    if let Some(v) = global.number("centroid_threshold")? {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::format(
                global.raw("centroid_threshold").unwrap().0,
                "centroid_threshold must lie in (0, 1)",
            ));
        }
        peak.centroid_threshold = v;
    }
    if let Some(v) = global.parse::<usize>("parabolic_window")? {
        if v < 3 || v % 2 == 0 {
            return Err(Error::format(
                global.raw("parabolic_window").unwrap().0,
                "parabolic_window must be odd and at least 3",
            ));
        }
        peak.parabolic_window = v;
    }
    if let Some(v) = global.parse::<bool>("poisson_weighting")? {
        peak.pseudo_voigt.poisson_weighting = v;
    }

    let split_threshold = global
        .number("split_threshold")?
        .unwrap_or(DEFAULT_SPLIT_THRESHOLD);
    if split_threshold < 0.0 {
        return Err(Error::format(
            global.raw("split_threshold").unwrap().0,
            "split_threshold must be non-negative",
        ));
    }
    let mut metadata = MeasurementMetadata::default();
    if let Some(v) = global.number("penetration_depth_um")? {
        metadata.penetration_depth_um = v;
    }
    if let Some(v) = global.number("measured_area_mm2")? {
        metadata.measured_area_mm2 = v;
    }

    if tilts.len() < 3 {
        return Err(Error::format(
            last_line,
            format!(
                "a session needs at least 3 [tilt] sections, found {}",
                tilts.len()
            ),
        ));
    }
    let tilts = tilts
        .iter()
        .map(|t| {
            let (line, psi) = t.required("psi_deg")?;
            let psi: f64 = psi
                .parse()
                .ok()
                .filter(|v: &f64| (-90.0..=90.0).contains(v))
                .ok_or_else(|| {
                    Error::format(
                        line,
                        format!("psi_deg must be an angle in [-90, 90], got `{psi}`"),
                    )
                })?;
            let (_, profile) = t.required("profile")?;
            Ok(TiltEntry {
                psi,
                profile: profile.to_string(),
                resolved: base_dir.join(profile),
                line: t.anchor,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SessionDescriptor {
        sample_id,
        reflection,
        elastic,
        d0_policy,
        peak,
        metadata,
        split_threshold,
        tilts,
    })
}

/// Name and SHA-256 of one input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(name: impl Into<String>, bytes: &[u8]) -> Self {
        Self {
            name: name.into(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

/// SHA-256 over the ordered list of input digests.
pub fn combined_digest(inputs: &[InputDigest]) -> String {
    let mut h = Sha256::new();
    for d in inputs {
        h.update(d.name.as_bytes());
        h.update([0]);
        h.update(d.sha256.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionAnalysis {
    pub descriptor: SessionDescriptor,
    pub elastic_constants: ElasticConstants,
    /// Session file first, then profiles in tilt order.
    pub inputs: Vec<InputDigest>,
    pub peaks: Vec<TiltPeak>,
    pub points: Vec<TiltMeasurement>,
    pub fit: StressFit,
    /// `None` when the tilt set has no ±ψ pairs.
    pub split: Option<SplitReport>,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads a session file and runs the full sin²ψ analysis.
pub fn run_session_file(path: &Path, jobs: usize) -> Result<SessionAnalysis> {
    let bytes = read_file(path)?;
    let name = path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    );
    let base = path.parent().unwrap_or(Path::new("."));
    let descriptor =
        parse_session(&bytes, base).map_err(|e| e.in_file(path.display().to_string()))?;
    analyze_session(descriptor, InputDigest::of(name, &bytes), jobs)
}

/// Loads every profile, fits the peaks (on up to `jobs` threads) and
/// regresses strain on sin²ψ. Results are assembled in tilt order, so the
/// output does not depend on `jobs`.
pub fn analyze_session(
    descriptor: SessionDescriptor,
    session_digest: InputDigest,
    jobs: usize,
) -> Result<SessionAnalysis> {
    let elastic_constants = descriptor.elastic.resolve()?;

    let mut inputs = vec![session_digest];
    let mut profiles = Vec::with_capacity(descriptor.tilts.len());
    for tilt in &descriptor.tilts {
        let bytes = read_file(&tilt.resolved)?;
        let shown = tilt.resolved.display().to_string();
        let profile = parse_profile_csv(&bytes).map_err(|e| e.in_file(&shown))?;
        if (profile.psi() - tilt.psi).abs() > 1e-6 {
            return Err(Error::format(
                tilt.line,
                format!(
                    "tilt psi_deg = {} but {} records psi_deg = {}",
                    tilt.psi,
                    tilt.profile,
                    profile.psi()
                ),
            ));
        }
        inputs.push(InputDigest::of(&tilt.profile, &bytes));
        profiles.push((profile, shown));
    }

    let settings = descriptor.peak;
    let fit_one = |(profile, shown): &(crate::peakfit::DiffractionProfile, String)| {
        estimate_peak(profile, &settings)
            .map(|peak| TiltPeak {
                peak,
                psi: profile.psi(),
                phi: profile.phi(),
            })
            .map_err(|e| e.in_file(shown))
    };
    let peaks: Vec<TiltPeak> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
        pool.install(|| profiles.par_iter().map(fit_one).collect::<Result<Vec<_>>>())?
    } else {
        profiles.iter().map(fit_one).collect::<Result<Vec<_>>>()?
    };

    let points = build_strain_points(&peaks, &descriptor.reflection, descriptor.d0_policy)?;
    let fit = fit_sin2psi(&points, &elastic_constants)?
        .with_phi(peaks[0].phi)
        .with_metadata(descriptor.metadata);
    let split = match detect_psi_splitting(&points, descriptor.split_threshold) {
        Ok(r) => Some(r),
        Err(Error::NoPairs) => None,
        Err(e) => return Err(e),
    };

    Ok(SessionAnalysis {
        descriptor,
        elastic_constants,
        inputs,
        peaks,
        points,
        fit,
        split,
    })
}
