//! Deposit stress analyzer: two-leg test strip readings to internal stress.
//!
//! The strip's legs are plated on opposite faces and bend apart as the
//! deposit stress builds. A calibration chart maps the leg spread (in
//! scale increments) to stress × deposit thickness; dividing by the
//! deposit thickness gives the stress.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignConvention {
    /// Legs bending toward the plated face read as tensile.
    SpreadMeansTensile,
    /// Legs bending toward the plated face read as compressive.
    SpreadMeansCompressive,
}

impl SignConvention {
    pub fn tag(self) -> &'static str {
        match self {
            SignConvention::SpreadMeansTensile => "spread_means_tensile",
            SignConvention::SpreadMeansCompressive => "spread_means_compressive",
        }
    }
}

impl FromStr for SignConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spread_means_tensile" => Ok(Self::SpreadMeansTensile),
            "spread_means_compressive" => Ok(Self::SpreadMeansCompressive),
            other => Err(Error::domain(format!("unknown sign convention `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BendDirection {
    TowardDeposit,
    AwayFromDeposit,
}

impl BendDirection {
    pub fn tag(self) -> &'static str {
        match self {
            BendDirection::TowardDeposit => "toward_deposit",
            BendDirection::AwayFromDeposit => "away_from_deposit",
        }
    }
}

impl FromStr for BendDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toward_deposit" => Ok(Self::TowardDeposit),
            "away_from_deposit" => Ok(Self::AwayFromDeposit),
            other => Err(Error::domain(format!("unknown bend direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    /// Leg spread, scale increments.
    pub deflection: f64,
    /// Stress × deposit thickness magnitude, MPa·µm.
    pub stress_thickness: f64,
}

/// Piecewise-linear calibration chart anchored at (0, 0).
///
/// Deflections are strictly increasing and stress·thickness values are
/// non-negative and non-decreasing: a wider spread never means less stress.
/// The sign of the resulting stress comes from the reading's bend direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    points: Vec<CalibrationPoint>,
    sign_convention: SignConvention,
}

impl CalibrationTable {
    pub fn new(points: Vec<CalibrationPoint>, sign_convention: SignConvention) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::domain("calibration table is empty"))?;
        if first.deflection != 0.0 || first.stress_thickness != 0.0 {
            return Err(Error::domain("calibration table must start at (0, 0)"));
        }
        if points.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: points.len(),
            });
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].deflection.is_finite() && w[1].stress_thickness.is_finite()) {
                return Err(Error::domain(format!(
                    "calibration point {} is not finite",
                    i + 1
                )));
            }
            if w[1].deflection <= w[0].deflection {
                return Err(Error::domain(format!(
                    "calibration deflections must be strictly increasing (point {})",
                    i + 1
                )));
            }
            if w[1].stress_thickness < w[0].stress_thickness {
                return Err(Error::domain(format!(
                    "calibration stress·thickness must not decrease (point {})",
                    i + 1
                )));
            }
        }
        Ok(Self {
            points,
            sign_convention,
        })
    }

    pub fn points(&self) -> &[CalibrationPoint] {
        &self.points
    }

    pub fn sign_convention(&self) -> SignConvention {
        self.sign_convention
    }

    pub fn max_deflection(&self) -> f64 {
        self.points[self.points.len() - 1].deflection
    }

    /// Stress·thickness magnitude at `deflection`, by linear interpolation.
    pub fn interpolate(&self, deflection: f64) -> Result<f64> {
        if !(deflection.is_finite() && deflection >= 0.0) {
            return Err(Error::domain(format!(
                "deflection must be non-negative, got {deflection}"
            )));
        }
        if deflection > self.max_deflection() {
            return Err(Error::Extrapolation {
                deflection,
                max: self.max_deflection(),
            });
        }
        let i = self.points.partition_point(|p| p.deflection < deflection);
        let hi = self.points[i];
        if hi.deflection == deflection {
            return Ok(hi.stress_thickness);
        }
        let lo = self.points[i - 1];
        let t = (deflection - lo.deflection) / (hi.deflection - lo.deflection);
        Ok(lo.stress_thickness + t * (hi.stress_thickness - lo.stress_thickness))
    }

    fn sign_for(&self, direction: BendDirection) -> f64 {
        match (self.sign_convention, direction) {
            (SignConvention::SpreadMeansTensile, BendDirection::TowardDeposit)
            | (SignConvention::SpreadMeansCompressive, BendDirection::AwayFromDeposit) => 1.0,
            _ => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripReading {
    pub deflection: f64,
    /// Deposit thickness, µm.
    pub deposit_thickness: f64,
    pub bend_direction: BendDirection,
}

impl StripReading {
    pub fn new(
        deflection: f64,
        deposit_thickness: f64,
        bend_direction: BendDirection,
    ) -> Result<Self> {
        if !(deflection.is_finite() && deflection >= 0.0) {
            return Err(Error::domain(format!(
                "deflection must be non-negative, got {deflection}"
            )));
        }
        if !(deposit_thickness.is_finite() && deposit_thickness > 0.0) {
            return Err(Error::domain(format!(
                "deposit thickness must be positive, got {deposit_thickness}"
            )));
        }
        Ok(Self {
            deflection,
            deposit_thickness,
            bend_direction,
        })
    }
}

/// Internal stress in MPa (compressive negative) for one strip reading.
pub fn stress_from_deflection(reading: &StripReading, table: &CalibrationTable) -> Result<f64> {
    let magnitude = table.interpolate(reading.deflection)?;
    Ok(table.sign_for(reading.bend_direction) * magnitude / reading.deposit_thickness)
}

/// Builds a calibration table from reference readings of known stress.
///
/// The origin is implied, so a single non-zero reading already defines a
/// usable two-point chart. The table uses
/// [`SignConvention::SpreadMeansTensile`].
pub fn calibrate(known: &[(StripReading, f64)]) -> Result<CalibrationTable> {
    let mut points: Vec<CalibrationPoint> = Vec::with_capacity(known.len() + 1);
    for (reading, stress) in known {
        if !stress.is_finite() {
            return Err(Error::domain("calibration stress must be finite"));
        }
        let sign = match reading.bend_direction {
            BendDirection::TowardDeposit => 1.0,
            BendDirection::AwayFromDeposit => -1.0,
        };
        let stress_thickness = sign * stress * reading.deposit_thickness;
        if stress_thickness < 0.0 {
            return Err(Error::InconsistentCalibration(format!(
                "stress {stress} MPa has the wrong sign for a reading bent {}",
                reading.bend_direction.tag()
            )));
        }
        points.push(CalibrationPoint {
            deflection: reading.deflection,
            // abs() folds −0.0 into 0.0
            stress_thickness: stress_thickness.abs(),
        });
    }
    points.push(CalibrationPoint {
        deflection: 0.0,
        stress_thickness: 0.0,
    });
    points.sort_by(|a, b| {
        a.deflection
            .total_cmp(&b.deflection)
            .then(a.stress_thickness.total_cmp(&b.stress_thickness))
    });
    points.dedup();
    for w in points.windows(2) {
        if w[0].deflection == w[1].deflection {
            return Err(Error::InconsistentCalibration(format!(
                "deflection {} maps to both {} and {} MPa·µm",
                w[0].deflection, w[0].stress_thickness, w[1].stress_thickness
            )));
        }
        if w[1].stress_thickness < w[0].stress_thickness {
            return Err(Error::InconsistentCalibration(format!(
                "stress·thickness drops from {} to {} MPa·µm as deflection grows",
                w[0].stress_thickness, w[1].stress_thickness
            )));
        }
    }
    if points.len() < 2 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    CalibrationTable::new(points, SignConvention::SpreadMeansTensile)
}
