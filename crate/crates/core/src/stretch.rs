//! Stress → stretch linear model and additive dosing trends.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stats::{fit_line, spearman};

/// Which instrument a stress value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StressSource {
    StripAnalyzer,
    Xrd,
}

impl StressSource {
    pub fn tag(self) -> &'static str {
        match self {
            StressSource::StripAnalyzer => "strip_analyzer",
            StressSource::Xrd => "xrd",
        }
    }
}

impl FromStr for StressSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strip_analyzer" => Ok(Self::StripAnalyzer),
            "xrd" => Ok(Self::Xrd),
            other => Err(Error::domain(format!(
                "unknown stress source `{other}` (expected strip_analyzer or xrd)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressStretchPair {
    /// MPa, compressive negative.
    pub stress: f64,
    /// ppm, positive for expansion after release.
    pub stretch: f64,
    pub source: StressSource,
}

impl StressStretchPair {
    pub fn new(stress: f64, stretch: f64, source: StressSource) -> Result<Self> {
        if !(stress.is_finite() && stretch.is_finite()) {
            return Err(Error::domain("stress and stretch must be finite"));
        }
        Ok(Self {
            stress,
            stretch,
            source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    /// ppm per MPa.
    pub slope: f64,
    /// ppm.
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares of stretch on stress.
pub fn fit_stress_stretch(pairs: &[StressStretchPair]) -> Result<LinearModel> {
    let x: Vec<f64> = pairs.iter().map(|p| p.stress).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.stretch).collect();
    let line = fit_line(&x, &y, None).map_err(|e| match e {
        Error::SingularDesign(_) => Error::SingularDesign("all stresses are identical".into()),
        other => other,
    })?;
    Ok(LinearModel {
        slope: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        n: line.n,
    })
}

/// Stretch (ppm) expected at `stress` (MPa).
pub fn predict_stretch(model: &LinearModel, stress: f64) -> f64 {
    model.slope * stress + model.intercept
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoseSeries {
    additive_name: String,
    observations: Vec<(u32, f64)>,
}

impl DoseSeries {
    /// `observations` are (dose step, stress MPa) with strictly increasing
    /// steps starting at 1 or later.
    pub fn new(additive_name: impl Into<String>, observations: Vec<(u32, f64)>) -> Result<Self> {
        if observations.len() < 3 {
            return Err(Error::InsufficientData {
                needed: 3,
                got: observations.len(),
            });
        }
        for (i, &(step, stress)) in observations.iter().enumerate() {
            if step == 0 {
                return Err(Error::domain("dose steps start at 1"));
            }
            if !stress.is_finite() {
                return Err(Error::domain(format!(
                    "observation {i}: stress is not finite"
                )));
            }
            if i > 0 && step <= observations[i - 1].0 {
                return Err(Error::domain(format!(
                    "observation {i}: dose steps must be strictly increasing"
                )));
            }
        }
        Ok(Self {
            additive_name: additive_name.into(),
            observations,
        })
    }

    pub fn additive_name(&self) -> &str {
        &self.additive_name
    }

    pub fn observations(&self) -> &[(u32, f64)] {
        &self.observations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendDirection {
    /// Signed stress falls with dose: compressive stress grows.
    MoreCompressive,
    LessCompressive,
    None,
}

impl TrendDirection {
    pub fn tag(self) -> &'static str {
        match self {
            TrendDirection::MoreCompressive => "more_compressive",
            TrendDirection::LessCompressive => "less_compressive",
            TrendDirection::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeSign {
    Negative,
    Zero,
    Positive,
}

impl SlopeSign {
    pub fn tag(self) -> &'static str {
        match self {
            SlopeSign::Negative => "negative",
            SlopeSign::Zero => "zero",
            SlopeSign::Positive => "positive",
        }
    }
}

/// |ρ| at or above which a dosing trend is called.
pub const TREND_RHO_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub additive_name: String,
    pub direction: TrendDirection,
    pub spearman_rho: f64,
    /// Sign of the least-squares slope of stress on dose step.
    pub slope_sign: SlopeSign,
    pub rho_threshold: f64,
}

/// Rank correlation of stress against dose step.
pub fn additive_trend(series: &DoseSeries) -> TrendReport {
    let steps: Vec<f64> = series.observations.iter().map(|o| f64::from(o.0)).collect();
    let stress: Vec<f64> = series.observations.iter().map(|o| o.1).collect();
    let rho = spearman(&steps, &stress);
    let direction = if rho <= -TREND_RHO_THRESHOLD {
        TrendDirection::MoreCompressive
    } else if rho >= TREND_RHO_THRESHOLD {
        TrendDirection::LessCompressive
    } else {
        TrendDirection::None
    };
    // Steps are strictly increasing, so the design is never singular.
    let slope = fit_line(&steps, &stress, None).map_or(0.0, |l| l.slope);
    let slope_sign = if slope > 0.0 {
        SlopeSign::Positive
    } else if slope < 0.0 {
        SlopeSign::Negative
    } else {
        SlopeSign::Zero
    };
    TrendReport {
        additive_name: series.additive_name.clone(),
        direction,
        spearman_rho: rho,
        slope_sign,
        rho_threshold: TREND_RHO_THRESHOLD,
    }
}
