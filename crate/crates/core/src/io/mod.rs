//! File formats, session orchestration, reports and plots.

pub mod formats;
pub mod report;
pub mod session;
pub mod svg;

pub use formats::{
    parse_calibration_csv, parse_dose_csv, parse_profile_csv, parse_stress_stretch_csv,
    write_calibration_csv, write_dose_csv, write_profile_csv, write_stress_stretch_csv,
};
pub use report::{emit_peak_report, emit_report, SessionReport};
pub use session::{parse_session, run_session_file, SessionDescriptor};
pub use svg::emit_svg_scatter;
