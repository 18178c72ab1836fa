use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{EfficiencyReport, MetricSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const DASH: &str = "---";
const ZERO_RULE: &str =
    "Scores are macro-averaged over classes. Precision, recall and F1 with a zero denominator count as 0.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    #[serde(rename = "md")]
    Markdown,
    Text,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Text => "txt",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "text" | "txt" => Ok(ReportFormat::Text),
            other => Err(Error::InvalidInput(format!(
                "unknown report format `{other}` (expected md or text)"
            ))),
        }
    }
}

/// The four summary numbers shown per dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl<T: Scalar> From<&MetricSet<T>> for Scores {
    fn from(m: &MetricSet<T>) -> Self {
        Scores {
            accuracy: m.accuracy.as_f64(),
            precision: m.macro_precision.as_f64(),
            recall: m.macro_recall.as_f64(),
            f1: m.macro_f1.as_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    /// One entry per dataset column group; `None` renders as dashes.
    pub cells: Vec<Option<Scores>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub datasets: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn single(dataset: &str, method: &str, scores: Scores) -> Self {
        ResultsTable {
            datasets: vec![dataset.to_string()],
            rows: vec![ResultRow {
                method: method.to_string(),
                cells: vec![Some(scores)],
            }],
        }
    }
}

fn score(x: f64) -> String {
    format!("{x:.3}")
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Hours or milliseconds: one decimal from 1 up, three below, scientific
/// notation under a thousandth.
fn measure(x: f64) -> String {
    if x == 0.0 || x >= 1.0 {
        format!("{x:.1}")
    } else if x >= 1e-3 {
        format!("{x:.3}")
    } else {
        format!("{x:.2e}")
    }
}

/// Parameter count in billions.
fn billions(params: u64) -> String {
    let b = params as f64 / 1e9;
    if b >= 1.0 && b.fract() == 0.0 {
        format!("{b:.0}")
    } else if b >= 0.01 {
        trim_zeros(format!("{b:.2}"))
    } else if b == 0.0 {
        "0".to_string()
    } else {
        format!("{b:.2e}")
    }
}

fn markdown(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let align: Vec<&str> = (0..header.len())
        .map(|i| if i == 0 { ":---" } else { "---:" })
        .collect();
    let _ = writeln!(out, "| {} |", align.join(" | "));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out
}

fn widths(lines: &[&[String]]) -> Vec<usize> {
    let n = lines.iter().map(|l| l.len()).max().unwrap_or(0);
    (0..n)
        .map(|i| {
            lines
                .iter()
                .filter_map(|l| l.get(i))
                .map(|c| c.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect()
}

fn text_line(cells: &[String], widths: &[usize]) -> String {
    let parts: Vec<String> = cells
        .iter()
        .zip(widths)
        .enumerate()
        .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
        .collect();
    parts.join("  ").trim_end().to_string()
}

fn plain(header: &[String], rows: &[Vec<String>], group_line: Option<String>) -> String {
    let mut all: Vec<&[String]> = vec![header];
    all.extend(rows.iter().map(|r| r.as_slice()));
    let w = widths(&all);
    let mut out = String::new();
    if let Some(g) = group_line {
        let _ = writeln!(out, "{}", g.trim_end());
    }
    let _ = writeln!(out, "{}", text_line(header, &w));
    let rule: Vec<String> = w.iter().map(|&n| "-".repeat(n)).collect();
    let _ = writeln!(out, "{}", text_line(&rule, &w));
    for r in rows {
        let _ = writeln!(out, "{}", text_line(r, &w));
    }
    out
}

const SCORE_COLUMNS: [&str; 4] = ["Acc.", "Prec.", "Rec.", "F1"];

/// Accuracy, precision, recall and F1 grouped by dataset, one row per method.
pub fn render_results_table(table: &ResultsTable, format: ReportFormat) -> String {
    let mut rows = Vec::with_capacity(table.rows.len());
    for r in &table.rows {
        let mut cells = vec![r.method.clone()];
        for d in 0..table.datasets.len() {
            match r.cells.get(d).copied().flatten() {
                Some(s) => cells.extend([s.accuracy, s.precision, s.recall, s.f1].map(score)),
                None => cells.extend(std::iter::repeat_n(DASH.to_string(), 4)),
            }
        }
        rows.push(cells);
    }
    let mut out = match format {
        ReportFormat::Markdown => {
            let mut header = vec!["Method".to_string()];
            for d in &table.datasets {
                header.extend(SCORE_COLUMNS.iter().map(|c| format!("{d} {c}")));
            }
            markdown(&header, &rows)
        }
        ReportFormat::Text => {
            let mut header = vec!["Method".to_string()];
            for _ in &table.datasets {
                header.extend(SCORE_COLUMNS.iter().map(|c| c.to_string()));
            }
            let mut all: Vec<&[String]> = vec![&header];
            all.extend(rows.iter().map(|r| r.as_slice()));
            let w = widths(&all);
            let mut group = format!("{:<w0$}", "", w0 = w[0]);
            for (i, d) in table.datasets.iter().enumerate() {
                let span: usize = w[1 + 4 * i..5 + 4 * i].iter().sum::<usize>() + 6;
                let _ = write!(group, "  {d:<span$}");
            }
            plain(&header, &rows, Some(group))
        }
    };
    out.push('\n');
    out.push_str(ZERO_RULE);
    out.push('\n');
    out
}

/// Training time, mean inference latency and parameter count in billions.
pub fn render_efficiency_table(reports: &[(String, EfficiencyReport)], format: ReportFormat) -> String {
    let header: Vec<String> = ["Method", "Training Time (h)", "Inference Time (ms)", "Model Size (B)"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|(name, r)| {
            vec![
                name.clone(),
                r.training_hours.map_or_else(|| DASH.to_string(), measure),
                r.latency.map_or_else(|| DASH.to_string(), |l| measure(l.mean_ms)),
                billions(r.param_count),
            ]
        })
        .collect();
    match format {
        ReportFormat::Markdown => markdown(&header, &rows),
        ReportFormat::Text => plain(&header, &rows, None),
    }
}

/// Per-aspect precision, recall and F1: rows of (aspect, method, scores).
pub fn render_aspect_table(rows: &[(String, String, Scores)], format: ReportFormat) -> String {
    let header: Vec<String> = ["Aspect", "Method", "Precision", "Recall", "F1-Score"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(a, m, s)| vec![a.clone(), m.clone(), score(s.precision), score(s.recall), score(s.f1)])
        .collect();
    match format {
        ReportFormat::Markdown => markdown(&header, &body),
        ReportFormat::Text => plain(&header, &body, None),
    }
}

/// `<kind>_<YYYYmmddTHHMMSSZ>.<ext>`
pub fn report_file_name(kind: &str, at: DateTime<Utc>, format: ReportFormat) -> String {
    format!("{kind}_{}.{}", at.format("%Y%m%dT%H%M%SZ"), format.extension())
}

pub fn write_report(
    dir: impl AsRef<Path>,
    kind: &str,
    at: DateTime<Utc>,
    format: ReportFormat,
    contents: &str,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(report_file_name(kind, at, format));
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
