//! Report serialization: a fixed-schema CSV for metric rows and a JSON
//! document that embeds the full run configuration for reproducibility.
//!
//! CSV numbers use the shortest round-trip decimal representation, so a
//! rerun with the same config and seed produces byte-identical files.

use serde::Serialize;

use crate::scenarios::ScenarioReport;

/// Header of the scenario metrics CSV.
pub const CSV_HEADER: &str = "method,total_rmse,rmse_x,rmse_y,rmse_z,mean,max,min,skips,seed";

/// One CSV row per method per scenario run, LF line endings.
pub fn reports_to_csv(reports: &[ScenarioReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for report in reports {
        for m in &report.methods {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                m.label,
                m.total_rmse,
                m.rmse_x,
                m.rmse_y,
                m.rmse_z,
                m.mean_error,
                m.max_error,
                m.min_error,
                m.skipped,
                report.seed
            ));
        }
    }
    out
}

#[derive(Serialize)]
struct Document<'a> {
    /// Verbatim echo of the run configuration.
    config: &'a serde_json::Value,
    reports: &'a [ScenarioReport],
}

/// The JSON report document: the verbatim config plus all per-seed reports.
pub fn reports_to_json(
    config: &serde_json::Value,
    reports: &[ScenarioReport],
) -> serde_json::Result<String> {
    let mut body = serde_json::to_string_pretty(&Document { config, reports })?;
    body.push('\n');
    Ok(body)
}
