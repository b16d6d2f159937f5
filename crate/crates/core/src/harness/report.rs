use std::io::Write;

use serde::Serialize;

use super::EstimateReport;
use crate::error::HarnessError;
use crate::instance::OptKind;

/// One results CSV row: a report paired with one of its bound checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub experiment_id: String,
    pub family: String,
    pub params: String,
    pub rule_kind: String,
    pub q: Option<f64>,
    pub arrival_model: String,
    pub rho: Option<f64>,
    pub interleaver: String,
    pub trials: usize,
    pub seed: u64,
    pub mean_cost: f64,
    pub stderr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub opt_value: f64,
    pub opt_kind: &'static str,
    pub ratio: f64,
    pub ratio_ci_low: f64,
    pub ratio_ci_high: f64,
    pub bound_name: String,
    pub bound_value: Option<f64>,
    pub bound_pass: Option<bool>,
}

impl CsvRow {
    /// One row per bound check, or a single row with empty bound fields.
    pub fn from_report(r: &EstimateReport) -> Vec<CsvRow> {
        let base = CsvRow {
            experiment_id: r.experiment_id.clone(),
            family: r.family.clone().unwrap_or_default(),
            params: r.params.clone().unwrap_or_default(),
            rule_kind: r.rule_kind.clone(),
            q: r.q,
            arrival_model: r.arrival_model.clone(),
            rho: r.rho,
            interleaver: r.interleaver.clone().unwrap_or_default(),
            trials: r.trials,
            seed: r.seed,
            mean_cost: r.mean_cost,
            stderr: r.stderr,
            ci95_low: r.ci95_low,
            ci95_high: r.ci95_high,
            opt_value: r.opt_value,
            opt_kind: match r.opt_kind {
                OptKind::Exact => "exact",
                OptKind::UpperBound => "upper_bound",
            },
            ratio: r.ratio,
            ratio_ci_low: r.ratio_ci_low,
            ratio_ci_high: r.ratio_ci_high,
            bound_name: String::new(),
            bound_value: None,
            bound_pass: None,
        };
        if r.bound_checks.is_empty() {
            return vec![base];
        }
        r.bound_checks
            .iter()
            .map(|b| CsvRow {
                bound_name: b.name.clone(),
                bound_value: Some(b.value),
                bound_pass: Some(b.pass),
                ..base.clone()
            })
            .collect()
    }
}

/// Writes the header and one or more rows per report.
pub fn write_csv<W: Write>(out: W, reports: &[EstimateReport]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        for row in CsvRow::from_report(r) {
            w.serialize(row)?;
        }
    }
    if reports.is_empty() {
        w.write_record(HEADER)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub const HEADER: [&str; 22] = [
    "experiment_id",
    "family",
    "params",
    "rule_kind",
    "q",
    "arrival_model",
    "rho",
    "interleaver",
    "trials",
    "seed",
    "mean_cost",
    "stderr",
    "ci95_low",
    "ci95_high",
    "opt_value",
    "opt_kind",
    "ratio",
    "ratio_ci_low",
    "ratio_ci_high",
    "bound_name",
    "bound_value",
    "bound_pass",
];
