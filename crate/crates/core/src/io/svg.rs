//! Deterministic SVG scatter plots with an optional fitted line.
//!
//! Layout: a 640 × 480 canvas whose plot area spans x ∈ [80, 620] and
//! y ∈ [40, 420] pixels. The data window is the bounding box of the points
//! and the fitted line's end values, widened by 5 % of its span on each side
//! (a zero span is widened by 10 % of the value, or by 1 at zero). A data
//! point (x, y) lands at
//!
//! ```text
//! px = 80 + (x − x_min) / (x_max − x_min) · 540
//! py = 40 + (y_max − y) / (y_max − y_min) · 380
//! ```
//!
//! Coordinates are written with two decimals.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
pub const PLOT_LEFT: f64 = 80.0;
pub const PLOT_RIGHT: f64 = 620.0;
pub const PLOT_TOP: f64 = 40.0;
pub const PLOT_BOTTOM: f64 = 420.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotLabels {
    pub title: String,
    pub x: String,
    pub y: String,
}

/// Straight line `y = slope·x + intercept` drawn across the points' x range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedLine {
    pub slope: f64,
    pub intercept: f64,
}

impl FittedLine {
    fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Data window and its affine map to pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotFrame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let pad = if span > 0.0 {
        0.05 * span
    } else if lo != 0.0 {
        0.1 * lo.abs()
    } else {
        1.0
    };
    (lo - pad, hi + pad)
}

impl PlotFrame {
    pub fn fit(points: &[(f64, f64)], line: Option<&FittedLine>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("a scatter plot needs at least one point"));
        }
        if points
            .iter()
            .any(|(x, y)| !(x.is_finite() && y.is_finite()))
        {
            return Err(Error::domain("plot coordinates must be finite"));
        }
        let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
        if let Some(l) = line {
            for y in [l.at(x_lo), l.at(x_hi)] {
                y_lo = y_lo.min(y);
                y_hi = y_hi.max(y);
            }
        }
        let (x_min, x_max) = padded(x_lo, x_hi);
        let (y_min, y_max) = padded(y_lo, y_hi);
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        (
            PLOT_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (PLOT_RIGHT - PLOT_LEFT),
            PLOT_TOP + (self.y_max - y) / (self.y_max - self.y_min) * (PLOT_BOTTOM - PLOT_TOP),
        )
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        crate::io::report::fmt_sci(v)
    } else {
        let s = format!("{v:.3}");
        if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
            s[1..].to_string()
        } else {
            s
        }
    }
}

/// Renders `points` (and `line`, if given) as an SVG 1.1 document.
pub fn emit_svg_scatter(
    points: &[(f64, f64)],
    line: Option<FittedLine>,
    labels: &PlotLabels,
) -> Result<Vec<u8>> {
    let frame = PlotFrame::fit(points, line.as_ref())?;
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<title>{}</title>", escape(&labels.title));
    let _ = writeln!(
        s,
        "<rect class=\"background\" x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        s,
        "<rect class=\"frame\" x=\"{PLOT_LEFT}\" y=\"{PLOT_TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        PLOT_RIGHT - PLOT_LEFT,
        PLOT_BOTTOM - PLOT_TOP
    );

    s.push_str("<g class=\"ticks\" stroke=\"black\">\n");
    for i in 0..TICKS {
        let t = i as f64 / (TICKS - 1) as f64;
        let xv = frame.x_min + t * (frame.x_max - frame.x_min);
        let (x, _) = frame.to_pixel(xv, frame.y_min);
        let _ = writeln!(
            s,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\"/><text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\" stroke=\"none\">{4}</text>",
            px(x),
            px(PLOT_BOTTOM),
            px(PLOT_BOTTOM + 5.0),
            px(PLOT_BOTTOM + 20.0),
            escape(&tick_label(xv))
        );
        let yv = frame.y_min + t * (frame.y_max - frame.y_min);
        let (_, y) = frame.to_pixel(frame.x_min, yv);
        let _ = writeln!(
            s,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\"/><text x=\"{3}\" y=\"{4}\" text-anchor=\"end\" stroke=\"none\">{5}</text>",
            px(PLOT_LEFT - 5.0),
            px(y),
            px(PLOT_LEFT),
            px(PLOT_LEFT - 8.0),
            px(y + 4.0),
            escape(&tick_label(yv))
        );
    }
    s.push_str("</g>\n");

    let _ = writeln!(
        s,
        "<text class=\"title\" x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        px((PLOT_LEFT + PLOT_RIGHT) / 2.0),
        escape(&labels.title)
    );
    let _ = writeln!(
        s,
        "<text class=\"x-label\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        px((PLOT_LEFT + PLOT_RIGHT) / 2.0),
        px(HEIGHT - 18.0),
        escape(&labels.x)
    );
    let (ly_x, ly_y) = (18.0, (PLOT_TOP + PLOT_BOTTOM) / 2.0);
    let _ = writeln!(
        s,
        "<text class=\"y-label\" x=\"{0}\" y=\"{1}\" text-anchor=\"middle\" transform=\"rotate(-90 {0} {1})\">{2}</text>",
        px(ly_x),
        px(ly_y),
        escape(&labels.y)
    );

    if let Some(l) = line {
        let x_lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let x_hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let (x1, y1) = frame.to_pixel(x_lo, l.at(x_lo));
        let (x2, y2) = frame.to_pixel(x_hi, l.at(x_hi));
        let _ = writeln!(
            s,
            "<line class=\"fit\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>",
            px(x1),
            px(y1),
            px(x2),
            px(y2)
        );
    }

    s.push_str("<g class=\"points\" fill=\"#1f4e79\">\n");
    for &(x, y) in points {
        let (cx, cy) = frame.to_pixel(x, y);
        let _ = writeln!(
            s,
            "<circle class=\"point\" cx=\"{}\" cy=\"{}\" r=\"4\"/>",
            px(cx),
            px(cy)
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s.into_bytes())
}
