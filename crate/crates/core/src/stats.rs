//! Small regression and rank-statistics helpers shared by the stress models.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Weighted straight-line fit `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard errors from the residual variance with n − 2 degrees of
    /// freedom; zero when n = 2 or the points are collinear.
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub r_squared: f64,
    pub ss_res: f64,
    pub ss_tot: f64,
    pub n: usize,
}

/// Weighted least squares of `y` on `x`.
///
/// The observations are put into a canonical order before any summation, so
/// the result is bit-identical for every permutation of the input. Sums are
/// taken about the first (canonical) observation to limit cancellation; this
/// also makes constant `y` produce an exactly zero slope.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LineFit> {
    let n = x.len();
    if y.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::domain("x, y and weight lengths differ"));
    }
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mut obs: Vec<(f64, f64, f64)> = (0..n)
        .map(|i| (x[i], y[i], weights.map_or(1.0, |w| w[i])))
        .collect();
    if obs
        .iter()
        .any(|&(x, y, w)| !(x.is_finite() && y.is_finite() && w.is_finite() && w > 0.0))
    {
        return Err(Error::domain(
            "regression inputs must be finite with positive weights",
        ));
    }
    obs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });

    let (x0, y0) = (obs[0].0, obs[0].1);
    let sw: f64 = obs.iter().map(|o| o.2).sum();
    let mean_u = obs.iter().map(|o| o.2 * (o.0 - x0)).sum::<f64>() / sw;
    let mean_v = obs.iter().map(|o| o.2 * (o.1 - y0)).sum::<f64>() / sw;

    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y, w) in &obs {
        let du = (x - x0) - mean_u;
        let dv = (y - y0) - mean_v;
        sxx += w * du * du;
        sxy += w * du * dv;
        ss_tot += w * dv * dv;
    }
    if sxx == 0.0 {
        return Err(Error::SingularDesign(
            "all regressor values are identical".into(),
        ));
    }

    let slope = sxy / sxx;
    let intercept_shifted = mean_v - slope * mean_u;
    let intercept = y0 + intercept_shifted - slope * x0;

    let mut ss_res = 0.0;
    for &(x, y, w) in &obs {
        let r = (y - y0) - (intercept_shifted + slope * (x - x0));
        ss_res += w * r * r;
    }
    // Residuals at rounding level mean the points are collinear.
    let magnitude = obs
        .iter()
        .map(|o| o.1.abs().max((intercept + slope * o.0).abs()))
        .fold(0.0, f64::max);
    let rounding = sw * (8.0 * f64::EPSILON * magnitude).powi(2);
    if ss_res <= rounding {
        ss_res = 0.0;
    }

    let (slope_stderr, intercept_stderr) = if n > 2 {
        let s2 = ss_res / (n - 2) as f64;
        let mean_x = x0 + mean_u;
        (
            (s2 / sxx).sqrt(),
            (s2 * (1.0 / sw + mean_x * mean_x / sxx)).sqrt(),
        )
    } else {
        (0.0, 0.0)
    };

    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };

    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        r_squared,
        ss_res,
        ss_tot,
        n,
    })
}

/// Fractional ranks (1-based, ties share their average rank).
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Pearson correlation; `None` when either variable is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation; 0 when either variable is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y)).unwrap_or(0.0)
}
