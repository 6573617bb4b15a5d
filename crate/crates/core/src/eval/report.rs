//! Report emission: pretty JSON per evaluation, a flat CSV row per
//! (dataset, model) for table assembly, and per-figure CSVs (utility,
//! fairness, privacy) across many reports.

use std::fs;
use std::path::{Path, PathBuf};

use super::{EvalReport, MetricStat};
use crate::error::Result;

pub fn write_report_json(report: &EvalReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<EvalReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub const TABLE_ROW_HEADER: &str = "dataset,model,accuracy_mean,accuracy_std,f1_mean,f1_std,auc_roc_mean,auc_roc_std,dp_gap_mean,dp_gap_std,identifiability_mean,identifiability_std,baseline_accuracy_mean,baseline_accuracy_std";

fn stat_cells(stat: Option<&MetricStat>) -> String {
    match stat {
        Some(s) => format!("{},{}", s.mean, s.std),
        None => ",".into(),
    }
}

/// One flat CSV row matching [`TABLE_ROW_HEADER`].
pub fn table_row(report: &EvalReport) -> String {
    let u = report.utility.as_ref();
    let b = report.real_baseline.as_ref();
    format!(
        "{},{},{},{},{},{},{}",
        report.metadata.dataset,
        report.metadata.model_id,
        stat_cells(u.map(|u| &u.accuracy)),
        stat_cells(u.map(|u| &u.f1)),
        stat_cells(u.map(|u| &u.auc_roc)),
        format_args!("{},{}", report.dp_gap.mean, report.dp_gap.std),
        format_args!(
            "{},{},{}",
            report.identifiability.mean,
            report.identifiability.std,
            stat_cells(b.map(|b| &b.accuracy))
        ),
    )
}

pub fn write_table_row_csv(report: &EvalReport, path: &Path) -> Result<()> {
    fs::write(path, format!("{TABLE_ROW_HEADER}\n{}\n", table_row(report)))?;
    Ok(())
}

/// Per-figure CSVs over a set of reports: one row per (dataset, model)
/// with the metric mean and std. Returns the written paths.
pub fn write_plot_data(reports: &[EvalReport], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut utility = String::from("dataset,model,auc_roc_mean,auc_roc_std\n");
    for r in reports {
        if let Some(u) = &r.utility {
            utility.push_str(&format!(
                "{},{},{},{}\n",
                r.metadata.dataset, r.metadata.model_id, u.auc_roc.mean, u.auc_roc.std
            ));
        }
    }
    let path = dir.join("utility.csv");
    fs::write(&path, utility)?;
    written.push(path);

    let mut fairness = String::from("dataset,model,dp_gap_mean,dp_gap_std\n");
    for r in reports {
        fairness.push_str(&format!(
            "{},{},{},{}\n",
            r.metadata.dataset, r.metadata.model_id, r.dp_gap.mean, r.dp_gap.std
        ));
    }
    let path = dir.join("fairness.csv");
    fs::write(&path, fairness)?;
    written.push(path);

    let mut privacy = String::from("dataset,model,identifiability_mean,identifiability_std\n");
    for r in reports {
        privacy.push_str(&format!(
            "{},{},{},{}\n",
            r.metadata.dataset, r.metadata.model_id, r.identifiability.mean, r.identifiability.std
        ));
    }
    let path = dir.join("privacy.csv");
    fs::write(&path, privacy)?;
    written.push(path);

    Ok(written)
}
