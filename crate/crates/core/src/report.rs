//! Experiment reports and their JSON and table renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Metrics, MetricsSummary, PipelineConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Repeated random subject-level train/test splits.
    Config1,
    /// Leave-one-subject-out.
    Config2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Methodology {
    Baseline,
    M1,
    M2,
}

impl Methodology {
    pub fn label(self) -> &'static str {
        match self {
            Methodology::Baseline => "General baseline (no clustering)",
            Methodology::M1 => "M1 (labeled profile assignment)",
            Methodology::M2 => "M2 (unlabeled observation assignment)",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Methodology::Baseline => "Baseline",
            Methodology::M1 => "M1",
            Methodology::M2 => "M2",
        }
    }
}

/// Per-typology row. Typologies are ranked within each fold by training
/// size (largest first), so `cluster = 1` is the largest typology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcRow {
    pub method: Methodology,
    pub cluster: usize,
    pub robustness: Option<MetricsSummary>,
    pub clustering_model: Option<MetricsSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub methodology: Methodology,
    pub metrics: MetricsSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub methodology: Methodology,
    pub metrics: Metrics,
}

/// One typology model's scores within a single Config1 fold. `cluster` uses
/// the same size ranking as [`TcRow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldTcMetrics {
    pub method: Methodology,
    pub cluster: usize,
    pub tc: usize,
    pub train_subjects: usize,
    pub robustness: Option<Metrics>,
    pub clustering_model: Option<Metrics>,
}

/// What happened in one fold (Config1) or one held-out subject (Config2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub index: usize,
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    pub typology_count: usize,
    pub fallback: bool,
    /// TC index per test subject, aligned with `test_subjects`.
    pub m1_assignments: Vec<usize>,
    pub m2_assignments: Vec<usize>,
    pub leakage_violations: usize,
    /// Pooled metrics over the fold's test windows, per methodology.
    pub metrics: Vec<MethodMetrics>,
    /// Per-typology scores (Config1 only).
    #[serde(default)]
    pub tc_metrics: Vec<FoldTcMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub protocol: Protocol,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    /// Command-line settings that produced the report, when run from the CLI.
    #[serde(default)]
    pub run_config: serde_json::Value,
    pub subject_count: usize,
    pub excluded_subjects: Vec<String>,
    /// `fold` for Config1, `subject` for Config2.
    pub aggregation_unit: String,
    pub test_normalization: String,
    pub fold_count: usize,
    pub fallback_folds: usize,
    pub per_tc: Vec<TcRow>,
    pub aggregate: Vec<AggregateRow>,
    pub agreement: Option<f64>,
    pub folds: Vec<FoldRecord>,
}

impl ExperimentReport {
    pub fn aggregate_of(&self, m: Methodology) -> Option<&MetricsSummary> {
        self.aggregate.iter().find(|r| r.methodology == m).map(|r| &r.metrics)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: ExperimentReport = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: report.schema_version,
                expected: REPORT_SCHEMA_VERSION,
            });
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportStyle {
    Json,
    Table,
}

/// `mean (std)` in percent with two decimals, e.g. `73.60 (6.58)`.
pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{:.2} ({:.2})", mean * 100.0, std * 100.0)
}

fn summary_cells(s: Option<&MetricsSummary>) -> (String, String) {
    match s {
        Some(s) => (
            format_cell(s.accuracy.mean, s.accuracy.std),
            format_cell(s.f1.mean, s.f1.std),
        ),
        None => ("-".into(), "-".into()),
    }
}

pub fn render_report(report: &ExperimentReport, style: ReportStyle) -> Result<String> {
    match style {
        ReportStyle::Json => report.to_json(),
        ReportStyle::Table => Ok(render_table(report)),
    }
}

fn render_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let title = match report.protocol {
        Protocol::Config1 => format!(
            "Config 1: {} subject-level {:.0}/{:.0} splits",
            report.fold_count,
            report.pipeline.train_frac * 100.0,
            (1.0 - report.pipeline.train_frac) * 100.0
        ),
        Protocol::Config2 => format!("Config 2: leave-one-subject-out over {} subjects", report.fold_count),
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "Mean and standard deviation (in brackets) per {}, in percent. Seed {}.",
        report.aggregation_unit, report.seed
    );
    if !report.excluded_subjects.is_empty() {
        let _ = writeln!(out, "Excluded subjects: {}", report.excluded_subjects.join(", "));
    }
    let _ = writeln!(out);

    if report.protocol == Protocol::Config1 {
        if report.per_tc.is_empty() {
            let _ = writeln!(
                out,
                "No typology structure found (single-cluster fallback in every fold); baseline only."
            );
        } else {
            let _ = writeln!(
                out,
                "{:<12}{:<10}{:<20}{:<18}{:<18}",
                "Methodology", "Cluster", "Validation test", "Accuracy", "F1-Score"
            );
            let mut last_method = None;
            for row in &report.per_tc {
                let method = if last_method == Some(row.method) {
                    ""
                } else {
                    row.method.short()
                };
                last_method = Some(row.method);
                let (ra, rf) = summary_cells(row.robustness.as_ref());
                let (ca, cf) = summary_cells(row.clustering_model.as_ref());
                let cluster = format!("C{}", row.cluster);
                let _ = writeln!(
                    out,
                    "{method:<12}{cluster:<10}{:<20}{ra:<18}{rf:<18}",
                    "Robustness test"
                );
                let _ = writeln!(out, "{:<12}{:<10}{:<20}{ca:<18}{cf:<18}", "", "", "Clustering model");
            }
            let _ = writeln!(out);
        }
        if report.fallback_folds > 0 {
            let _ = writeln!(
                out,
                "{} of {} folds fell back to a single typology.",
                report.fallback_folds, report.fold_count
            );
        }
    }

    let _ = writeln!(out, "{:<42}{:<18}{:<18}", "Methodology", "Accuracy", "F1-Score");
    for row in &report.aggregate {
        if report.per_tc.is_empty() && report.protocol == Protocol::Config1 && row.methodology != Methodology::Baseline
        {
            continue;
        }
        let (a, f) = summary_cells(Some(&row.metrics));
        let _ = writeln!(out, "{:<42}{a:<18}{f:<18}", row.methodology.label());
    }
    if let Some(agreement) = report.agreement {
        let _ = writeln!(out);
        let _ = writeln!(out, "M1/M2 assignment agreement: {:.2}%", agreement * 100.0);
    }
    out
}
