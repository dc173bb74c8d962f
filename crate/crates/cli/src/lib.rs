//! `nistress` command-line interface.
//!
//! [`run`] takes the argument vector and two output streams and returns the
//! process exit code: 0 on success, 2 for usage or input validation errors,
//! 1 for internal failures.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use nistress::io::report::{
    emit_relaxation_report, emit_stretch_report, emit_trend_report, RelaxationReport, ReportResult,
    StripResult, TOOLKIT_VERSION,
};
use nistress::io::session::{InputDigest, SessionAnalysis};
use nistress::io::svg::{FittedLine, PlotLabels};
use nistress::io::{
    emit_peak_report, emit_report, emit_svg_scatter, parse_calibration_csv, parse_dose_csv,
    parse_profile_csv, parse_stress_stretch_csv, run_session_file, SessionReport,
};
use nistress::peakfit::{estimate_peak, PeakMethod, PeakSettings, PseudoVoigtOptions};
use nistress::sin2psi::relaxation_check;
use nistress::stretch::{additive_trend, fit_stress_stretch, predict_stretch};
use nistress::strip::{stress_from_deflection, BendDirection, StripReading};
use nistress::Error;

#[derive(Debug, Parser)]
#[command(
    name = "nistress",
    version,
    about = "Residual stress analysis for electroformed nickel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate the diffraction peak in one profile.
    FitPeak(FitPeakArgs),
    /// Run a sin²ψ stress analysis from a session file.
    Sin2psi(Sin2psiArgs),
    /// Convert a strip-analyzer deflection reading to stress.
    Strip(StripArgs),
    /// Fit stretch against stress and optionally predict stretch.
    StretchFit(StretchFitArgs),
    /// Classify how stress responds to additive dosing.
    Trend(TrendArgs),
    /// Compare an on-mandrel session with the released part.
    Report(RelaxationArgs),
}

#[derive(Debug, Args)]
struct FitPeakArgs {
    /// Profile CSV.
    #[arg(long)]
    profile: PathBuf,
    /// centroid, parabolic or pseudo_voigt.
    #[arg(long, default_value = "pseudo_voigt")]
    method: PeakMethod,
    /// Centroid cut as a fraction of the maximum intensity.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Number of samples in the parabolic window (odd).
    #[arg(long, default_value_t = 7)]
    window: usize,
    /// Fraction of samples at each end used for the background line.
    #[arg(long, default_value_t = 0.1)]
    edge_fraction: f64,
    /// Weight pseudo-Voigt residuals by 1/max(I, 1).
    #[arg(long)]
    poisson: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Sin2psiArgs {
    #[arg(long)]
    session: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an ε vs sin²ψ plot here.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Threads used for the peak fits.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// Leave out the generated_at line.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug, Args)]
struct StripArgs {
    /// Deflection in scale increments.
    #[arg(long, allow_negative_numbers = true)]
    deflection: f64,
    /// Deposit thickness, µm.
    #[arg(long, allow_negative_numbers = true)]
    thickness: f64,
    /// Calibration CSV.
    #[arg(long)]
    calibration: PathBuf,
    /// toward_deposit or away_from_deposit.
    #[arg(long, default_value = "toward_deposit")]
    direction: BendDirection,
    #[arg(long, default_value = "strip")]
    sample_id: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug, Args)]
struct StretchFitArgs {
    /// Stress/stretch CSV.
    #[arg(long)]
    data: PathBuf,
    /// Stress values (MPa) to predict stretch for.
    #[arg(long, allow_negative_numbers = true, num_args = 1..)]
    predict: Vec<f64>,
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrendArgs {
    /// Dose series CSV.
    #[arg(long)]
    data: PathBuf,
    /// Additive name used when the file does not declare one.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RelaxationArgs {
    /// Session measured with the deposit still on the mandrel.
    #[arg(long)]
    on_mandrel: PathBuf,
    /// Session measured on the released part.
    #[arg(long)]
    free_standing: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
}

enum Failure {
    Input(Error),
    Internal(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        // A fit that fails to converge on validated input is our problem,
        // not the user's.
        fn root(e: &Error) -> &Error {
            match e {
                Error::InFile { source, .. } => root(source),
                other => other,
            }
        }
        if matches!(root(&e), Error::Convergence { .. }) {
            Failure::Internal(e.into())
        } else {
            Failure::Input(e)
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                2
            } else {
                let _ = write!(out, "{rendered}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::FitPeak(a) => fit_peak(a, out),
        Command::Sin2psi(a) => sin2psi(a, out),
        Command::Strip(a) => strip(a, out),
        Command::StretchFit(a) => stretch_fit(a, out),
        Command::Trend(a) => trend(a, out),
        Command::Report(a) => relaxation(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Input(e)) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
        Err(Failure::Internal(e)) => {
            let _ = writeln!(err, "internal error: {e:#}");
            1
        }
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, Error> {
    std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Digest label: the bare file name, so reports do not depend on where the
/// inputs live.
fn input_name(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

fn timestamp(suppress: bool) -> Option<String> {
    (!suppress).then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

/// Writes `bytes` to `path`, or to `out` when no path is given.
fn emit(bytes: &[u8], path: Option<&Path>, label: &str, out: &mut dyn Write) -> Outcome {
    match path {
        Some(p) => {
            std::fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display()))?;
            writeln!(out, "{label}: {}", p.display()).context("cannot write to stdout")?;
        }
        None => out.write_all(bytes).context("cannot write to stdout")?,
    }
    Ok(())
}

fn fit_peak(a: FitPeakArgs, out: &mut dyn Write) -> Outcome {
    let shown = a.profile.display().to_string();
    let bytes = read_input(&a.profile)?;
    let profile = parse_profile_csv(&bytes).map_err(|e| e.in_file(&shown))?;
    let settings = PeakSettings {
        method: a.method,
        background_edge_fraction: a.edge_fraction,
        centroid_threshold: a.threshold,
        parabolic_window: a.window,
        pseudo_voigt: PseudoVoigtOptions {
            poisson_weighting: a.poisson,
            ..PseudoVoigtOptions::default()
        },
    };
    let peak = estimate_peak(&profile, &settings).map_err(|e| e.in_file(&shown))?;
    let report = emit_peak_report(
        &InputDigest::of(input_name(&a.profile), &bytes),
        &profile,
        &peak,
    );
    emit(&report, a.out.as_deref(), "report", out)
}

fn sin2psi_plot(analysis: &SessionAnalysis) -> Result<Vec<u8>, Error> {
    let points: Vec<(f64, f64)> = analysis
        .points
        .iter()
        .map(|p| (p.sin2psi(), p.strain().value()))
        .collect();
    let line = FittedLine {
        slope: analysis.fit.sigma_phi * analysis.elastic_constants.half_s2(),
        intercept: analysis.fit.intercept,
    };
    let labels = PlotLabels {
        title: format!("{}: strain vs sin²ψ", analysis.descriptor.sample_id),
        x: "sin²ψ".into(),
        y: "strain".into(),
    };
    emit_svg_scatter(&points, Some(line), &labels)
}

fn sin2psi(a: Sin2psiArgs, out: &mut dyn Write) -> Outcome {
    let analysis = run_session_file(&a.session, usize::from(a.jobs))?;
    let report = SessionReport::from_analysis(&analysis, timestamp(a.no_timestamp));
    emit(&emit_report(&report), a.out.as_deref(), "report", out)?;
    if let Some(plot) = &a.plot {
        emit(&sin2psi_plot(&analysis)?, Some(plot), "plot", out)?;
    }
    Ok(())
}

fn strip(a: StripArgs, out: &mut dyn Write) -> Outcome {
    let shown = a.calibration.display().to_string();
    let bytes = read_input(&a.calibration)?;
    let table = parse_calibration_csv(&bytes).map_err(|e| e.in_file(&shown))?;
    let reading = StripReading::new(a.deflection, a.thickness, a.direction)?;
    let stress = stress_from_deflection(&reading, &table)?;
    let report = SessionReport {
        sample_id: a.sample_id,
        result: ReportResult::Strip(StripResult {
            reading,
            sign_convention: table.sign_convention(),
            stress_thickness: stress * reading.deposit_thickness,
            stress_mpa: stress,
        }),
        inputs: vec![InputDigest::of(input_name(&a.calibration), &bytes)],
        toolkit_version: TOOLKIT_VERSION.to_string(),
        generated_at: timestamp(a.no_timestamp),
    };
    emit(&emit_report(&report), a.out.as_deref(), "report", out)
}

fn stretch_fit(a: StretchFitArgs, out: &mut dyn Write) -> Outcome {
    let shown = a.data.display().to_string();
    let bytes = read_input(&a.data)?;
    let pairs = parse_stress_stretch_csv(&bytes).map_err(|e| e.in_file(&shown))?;
    let model = fit_stress_stretch(&pairs)?;
    let predictions: Vec<(f64, f64)> = a
        .predict
        .iter()
        .map(|&s| (s, predict_stretch(&model, s)))
        .collect();
    emit(
        &emit_stretch_report(&model, &predictions),
        a.out.as_deref(),
        "report",
        out,
    )?;
    if let Some(plot) = &a.plot {
        let points: Vec<(f64, f64)> = pairs.iter().map(|p| (p.stress, p.stretch)).collect();
        let labels = PlotLabels {
            title: "stretch vs internal stress".into(),
            x: "stress (MPa)".into(),
            y: "stretch (ppm)".into(),
        };
        let line = FittedLine {
            slope: model.slope,
            intercept: model.intercept,
        };
        emit(
            &emit_svg_scatter(&points, Some(line), &labels)?,
            Some(plot),
            "plot",
            out,
        )?;
    }
    Ok(())
}

fn trend(a: TrendArgs, out: &mut dyn Write) -> Outcome {
    let shown = a.data.display().to_string();
    let bytes = read_input(&a.data)?;
    let fallback = a.name.unwrap_or_else(|| {
        a.data
            .file_stem()
            .map_or_else(|| "additive".into(), |s| s.to_string_lossy().into_owned())
    });
    let series = parse_dose_csv(&bytes, &fallback).map_err(|e| e.in_file(&shown))?;
    emit(
        &emit_trend_report(&additive_trend(&series)),
        a.out.as_deref(),
        "report",
        out,
    )
}

fn relaxation(a: RelaxationArgs, out: &mut dyn Write) -> Outcome {
    let before = run_session_file(&a.on_mandrel, usize::from(a.jobs))?;
    let after = run_session_file(&a.free_standing, usize::from(a.jobs))?;
    let report = RelaxationReport {
        on_mandrel: (before.descriptor.sample_id.clone(), before.fit),
        free_standing: (after.descriptor.sample_id.clone(), after.fit),
        relaxation: relaxation_check(&before.fit, &after.fit),
        inputs: before.inputs.iter().chain(&after.inputs).cloned().collect(),
        toolkit_version: TOOLKIT_VERSION.to_string(),
        generated_at: timestamp(a.no_timestamp),
    };
    emit(
        &emit_relaxation_report(&report),
        a.out.as_deref(),
        "report",
        out,
    )
}
