//! Scenario files in, tables and plots out.

mod curve;
mod report;
mod scenario;

pub use curve::{emit_curve, emit_curve_marked, parse_curve_csv, CurveError, Format, ParsedCurve};
pub use report::{analyze, emit_report, Analysis, GdfRow, Status, Transfer};
pub use scenario::{
    parse_scenario, parse_scenario_with, portfolio_from_value, portfolio_to_value, serialize_scenario, Metadata,
    ParseOptions, Parsed, ScenarioError, ScenarioFile, SCHEMA_VERSION,
};
