//! Plain-text CSV formats for profiles, calibration charts, stress/stretch
//! pairs and dose series.
//!
//! All formats share one layout: optional `#` comment lines (which may carry
//! `key=value` metadata), a fixed header line, then comma-separated rows.
//! Fields are unquoted. Numbers always use `.` as the decimal separator.
//! Every diagnostic names the 1-based line it refers to.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::peakfit::{DiffractionProfile, Sample, MIN_PROFILE_SAMPLES};
use crate::stretch::{DoseSeries, StressSource, StressStretchPair};
use crate::strip::{CalibrationPoint, CalibrationTable, SignConvention};

pub const PROFILE_HEADER: &str = "two_theta_deg,intensity_counts";
pub const CALIBRATION_HEADER: &str = "deflection_increments,stress_thickness_mpa_um";
pub const STRESS_STRETCH_HEADER: &str = "stress_mpa,stretch_ppm,source";
pub const DOSE_HEADER: &str = "dose_step,stress_mpa";

struct Table<'a> {
    rows: Vec<(usize, Vec<&'a str>)>,
    metadata: BTreeMap<String, (usize, String)>,
    last_line: usize,
}

impl Table<'_> {
    fn meta(&self, key: &str) -> Option<(usize, &str)> {
        self.metadata.get(key).map(|(l, v)| (*l, v.as_str()))
    }
}

pub(crate) fn decode_utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1;
        Error::format(line, "input is not valid UTF-8")
    })
}

fn read_table<'a>(bytes: &'a [u8], header: &str) -> Result<Table<'a>> {
    let text = decode_utf8(bytes)?;
    let columns = header.split(',').count();
    let mut metadata = BTreeMap::new();
    let mut rows = Vec::new();
    let mut seen_header = false;
    let mut last_line = 1;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                let key = k.trim().to_string();
                if metadata.contains_key(&key) {
                    return Err(Error::format(
                        line,
                        format!("duplicate metadata key `{key}`"),
                    ));
                }
                metadata.insert(key, (line, v.trim().to_string()));
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if !seen_header {
            if fields.join(",") != header {
                return Err(Error::format(
                    line,
                    format!("missing header: expected `{header}`, found `{trimmed}`"),
                ));
            }
            seen_header = true;
            continue;
        }
        if fields.len() != columns {
            return Err(Error::format(
                line,
                format!("expected {columns} fields, found {}", fields.len()),
            ));
        }
        rows.push((line, fields));
    }
    if !seen_header {
        return Err(Error::format(1, format!("missing header `{header}`")));
    }
    Ok(Table {
        rows,
        metadata,
        last_line,
    })
}

fn number(line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::format(line, format!("{what}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::format(
            line,
            format!("{what}: `{field}` is not finite"),
        ));
    }
    Ok(v)
}

/// Parses a diffraction profile. `psi_deg` metadata is required, `phi_deg`
/// defaults to 0.
pub fn parse_profile_csv(bytes: &[u8]) -> Result<DiffractionProfile> {
    let table = read_table(bytes, PROFILE_HEADER)?;
    let psi = match table.meta("psi_deg") {
        Some((line, v)) => number(line, v, "psi_deg")?,
        None => {
            return Err(Error::MissingMetadata {
                key: "psi_deg".into(),
            })
        }
    };
    let phi = match table.meta("phi_deg") {
        Some((line, v)) => number(line, v, "phi_deg")?,
        None => 0.0,
    };

    let mut samples: Vec<Sample> = Vec::with_capacity(table.rows.len());
    for (line, f) in &table.rows {
        let two_theta = number(*line, f[0], "two_theta_deg")?;
        let intensity = number(*line, f[1], "intensity_counts")?;
        if intensity < 0.0 {
            return Err(Error::format(*line, "intensity must be non-negative"));
        }
        if let Some(prev) = samples.last() {
            if two_theta <= prev.two_theta {
                return Err(Error::format(
                    *line,
                    format!(
                        "2θ must be strictly increasing ({two_theta} after {})",
                        prev.two_theta
                    ),
                ));
            }
        }
        samples.push(Sample {
            two_theta,
            intensity,
        });
    }
    if samples.len() < MIN_PROFILE_SAMPLES {
        return Err(Error::format(
            table.last_line,
            format!(
                "profile needs at least {MIN_PROFILE_SAMPLES} samples, found {}",
                samples.len()
            ),
        ));
    }
    DiffractionProfile::new(samples, psi, phi)
        .map_err(|e| Error::format(table.last_line, e.to_string()))
}

pub fn write_profile_csv(profile: &DiffractionProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# psi_deg={}", profile.psi());
    let _ = writeln!(out, "# phi_deg={}", profile.phi());
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    for s in profile.samples() {
        let _ = writeln!(out, "{},{}", s.two_theta, s.intensity);
    }
    out
}

/// Parses a calibration chart. The optional `sign_convention` metadata
/// defaults to `spread_means_tensile`.
pub fn parse_calibration_csv(bytes: &[u8]) -> Result<CalibrationTable> {
    let table = read_table(bytes, CALIBRATION_HEADER)?;
    let convention = match table.meta("sign_convention") {
        Some((line, v)) => v
            .parse()
            .map_err(|e: Error| Error::format(line, e.to_string()))?,
        None => SignConvention::SpreadMeansTensile,
    };
    let mut points = Vec::with_capacity(table.rows.len());
    for (line, f) in &table.rows {
        let point = CalibrationPoint {
            deflection: number(*line, f[0], "deflection_increments")?,
            stress_thickness: number(*line, f[1], "stress_thickness_mpa_um")?,
        };
        // Row-level checks so the diagnostic can name the offending line.
        if points.is_empty() && (point.deflection != 0.0 || point.stress_thickness != 0.0) {
            return Err(Error::format(*line, "calibration must start at 0,0"));
        }
        if let Some(prev) = points.last() {
            let prev: &CalibrationPoint = prev;
            if point.deflection <= prev.deflection {
                return Err(Error::format(
                    *line,
                    "deflections must be strictly increasing",
                ));
            }
            if point.stress_thickness < prev.stress_thickness {
                return Err(Error::format(*line, "stress·thickness must not decrease"));
            }
        }
        points.push(point);
    }
    CalibrationTable::new(points, convention)
        .map_err(|e| Error::format(table.last_line, e.to_string()))
}

pub fn write_calibration_csv(table: &CalibrationTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# sign_convention={}", table.sign_convention().tag());
    out.push_str(CALIBRATION_HEADER);
    out.push('\n');
    for p in table.points() {
        let _ = writeln!(out, "{},{}", p.deflection, p.stress_thickness);
    }
    out
}

pub fn parse_stress_stretch_csv(bytes: &[u8]) -> Result<Vec<StressStretchPair>> {
    let table = read_table(bytes, STRESS_STRETCH_HEADER)?;
    table
        .rows
        .iter()
        .map(|(line, f)| {
            let source: StressSource = f[2]
                .parse()
                .map_err(|e: Error| Error::format(*line, e.to_string()))?;
            StressStretchPair::new(
                number(*line, f[0], "stress_mpa")?,
                number(*line, f[1], "stretch_ppm")?,
                source,
            )
            .map_err(|e| Error::format(*line, e.to_string()))
        })
        .collect()
}

pub fn write_stress_stretch_csv(pairs: &[StressStretchPair]) -> String {
    let mut out = String::from(STRESS_STRETCH_HEADER);
    out.push('\n');
    for p in pairs {
        let _ = writeln!(out, "{},{},{}", p.stress, p.stretch, p.source.tag());
    }
    out
}

/// Parses a dose series. The additive name comes from `additive` metadata,
/// or `fallback_name` when absent.
pub fn parse_dose_csv(bytes: &[u8], fallback_name: &str) -> Result<DoseSeries> {
    let table = read_table(bytes, DOSE_HEADER)?;
    let name = table
        .meta("additive")
        .map_or(fallback_name.to_string(), |(_, v)| v.to_string());
    let mut observations: Vec<(u32, f64)> = Vec::with_capacity(table.rows.len());
    for (line, f) in &table.rows {
        let step: u32 = f[0].parse().map_err(|_| {
            Error::format(
                *line,
                format!("dose_step: `{}` is not a positive integer", f[0]),
            )
        })?;
        if step == 0 {
            return Err(Error::format(*line, "dose_step must be at least 1"));
        }
        if observations.last().is_some_and(|&(prev, _)| step <= prev) {
            return Err(Error::format(
                *line,
                "dose steps must be strictly increasing",
            ));
        }
        observations.push((step, number(*line, f[1], "stress_mpa")?));
    }
    DoseSeries::new(name, observations).map_err(|e| Error::format(table.last_line, e.to_string()))
}

pub fn write_dose_csv(series: &DoseSeries) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# additive={}", series.additive_name());
    out.push_str(DOSE_HEADER);
    out.push('\n');
    for (step, stress) in series.observations() {
        let _ = writeln!(out, "{step},{stress}");
    }
    out
}
