//! JSON and CSV encodings of feature reports.

use std::io::Write;

use crate::scoring::FeatureReport;

pub fn write_reports_json<W: Write>(writer: W, reports: &[FeatureReport]) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(writer, reports)
}

pub fn reports_to_json(reports: &[FeatureReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// One row per feature; flags are joined with `;`.
pub fn write_reports_csv<W: Write>(writer: W, reports: &[FeatureReport]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["feature", "hie", "hdd", "hie_norm", "hdd_norm", "combined", "bins_used", "merges", "flags"])?;
    for r in reports {
        out.write_record([
            r.feature.clone(),
            r.hie.to_string(),
            r.hdd.to_string(),
            r.hie_norm.to_string(),
            r.hdd_norm.to_string(),
            r.combined.to_string(),
            r.bins_used.to_string(),
            r.merges.to_string(),
            r.flags.join(";"),
        ])?;
    }
    out.flush()?;
    Ok(())
}
