use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::MetricSummary;

pub const CSV_HEADER: &str = "experiment,dataset,calibrated_on,predictor,group,group_value,metric,mean,std,scenarios,targets";

/// One metric of one evaluation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    /// Source of the parameters in transfer experiments, empty otherwise.
    pub calibrated_on: String,
    pub predictor: String,
    /// Swept variable, e.g. `horizon_s`; `all` for unswept runs.
    pub group: String,
    pub group_value: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub scenarios: usize,
    pub targets: usize,
}

/// Rows in canonical order plus the experiment they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricReport {
    pub experiment: String,
    pub rows: Vec<ReportRow>,
}

/// Identifies an evaluation cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell<'a> {
    pub dataset: &'a str,
    pub calibrated_on: &'a str,
    pub predictor: &'a str,
    pub group: &'a str,
    pub group_value: String,
}

impl MetricReport {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            rows: Vec::new(),
        }
    }

    /// Appends one row per metric of `summary`.
    pub fn push_summary(&mut self, cell: &Cell<'_>, summary: &MetricSummary) {
        let mut metrics = vec![
            ("ade", summary.ade),
            ("fde", summary.fde),
            ("min_ade", summary.min_ade),
            ("min_fde", summary.min_fde),
        ];
        if let Some(nlp) = summary.nlp {
            metrics.push(("nlp", nlp));
        }
        for (metric, stat) in metrics {
            self.push(cell, metric, stat.mean, stat.std, summary.scenarios, summary.targets);
        }
    }

    pub fn push(&mut self, cell: &Cell<'_>, metric: &str, mean: f64, std: f64, scenarios: usize, targets: usize) {
        self.rows.push(ReportRow {
            dataset: cell.dataset.to_string(),
            calibrated_on: cell.calibrated_on.to_string(),
            predictor: cell.predictor.to_string(),
            group: cell.group.to_string(),
            group_value: cell.group_value.clone(),
            metric: metric.to_string(),
            mean,
            std,
            scenarios,
            targets,
        });
    }

    /// Looks up a row's mean.
    pub fn value(&self, dataset: &str, group_value: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.group_value == group_value && r.metric == metric)
            .map(|r| r.mean)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for r in &self.rows {
            w.write_record([
                self.experiment.as_str(),
                &r.dataset,
                &r.calibrated_on,
                &r.predictor,
                &r.group,
                &r.group_value,
                &r.metric,
                &r.mean.to_string(),
                &r.std.to_string(),
                &r.scenarios.to_string(),
                &r.targets.to_string(),
            ])
            .expect("writing to memory");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 fields");
        format!("{CSV_HEADER}\n{body}")
    }
}

/// Timing of predict calls for one agent-count bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeBin {
    pub dataset: String,
    pub agents: usize,
    pub calls: usize,
    pub mean_s: f64,
    pub median_s: f64,
    pub max_s: f64,
}

pub fn runtime_csv(predictor: &str, bins: &[RuntimeBin]) -> String {
    let mut out = String::from("dataset,predictor,agents,calls,mean_s,median_s,max_s\n");
    for b in bins {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.9},{:.9},{:.9}",
            b.dataset, predictor, b.agents, b.calls, b.mean_s, b.median_s, b.max_s
        );
    }
    out
}

/// Rounds seconds for use as a group key, dropping float noise such as `4.800000000000001`.
pub fn seconds_key(s: f64) -> String {
    let r = (s * 1e6).round() / 1e6;
    format!("{r}")
}
