use std::fmt::Write as _;

use anyhow::{Context, Result};
use chrono::Utc;
use sentiflow_core::analytics::{aspect_summary, read_log, trend, Alert, AnalyticsLog, WindowStats};
use sentiflow_core::corpus::format_timestamp;
use sentiflow_core::evalreport::{write_report, ReportFormat};
use sentiflow_service::config::PipelineConfig;

use crate::ReportArgs;

fn table(format: ReportFormat, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let rule: Vec<&str> = header.iter().map(|_| "---").collect();
            let _ = writeln!(out, "| {} |", rule.join(" | "));
            for r in rows {
                let _ = writeln!(out, "| {} |", r.join(" | "));
            }
        }
        ReportFormat::Text => {
            let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
            for r in rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |cells: Vec<&str>| {
                let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                parts.join("  ").trim_end().to_string()
            };
            let _ = writeln!(out, "{}", line(header.to_vec()));
            let _ = writeln!(
                out,
                "{}",
                line(
                    widths
                        .iter()
                        .map(|w| "-".repeat(*w))
                        .collect::<Vec<_>>()
                        .iter()
                        .map(String::as_str)
                        .collect()
                )
            );
            for r in rows {
                let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
            }
        }
    }
    out
}

fn heading(format: ReportFormat, text: &str) -> String {
    match format {
        ReportFormat::Markdown => format!("## {text}\n\n"),
        ReportFormat::Text => format!("{text}\n{}\n\n", "=".repeat(text.len())),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "---".to_string(), |v| format!("{v:.3}"))
}

pub fn render(
    config: &PipelineConfig,
    windows: &[WindowStats],
    alerts: &[Alert],
    format: ReportFormat,
) -> Result<String> {
    let mut out = String::new();
    out.push_str(&heading(format, "Windows"));
    let rows: Vec<Vec<String>> = windows
        .iter()
        .map(|w| {
            vec![
                format_timestamp(&w.start),
                w.volume.to_string(),
                w.negative.to_string(),
                w.neutral.to_string(),
                w.positive.to_string(),
                w.unclassified.to_string(),
                opt(w.negative_fraction()),
                format!("{:+.3}", w.mean_polarity),
            ]
        })
        .collect();
    out.push_str(&table(
        format,
        &[
            "Window start",
            "Volume",
            "Neg.",
            "Neu.",
            "Pos.",
            "Unclassified",
            "Neg. share",
            "Mean polarity",
        ],
        &rows,
    ));

    out.push('\n');
    out.push_str(&heading(format, "Trend"));
    match trend(windows) {
        Ok(t) => {
            let _ = writeln!(
                out,
                "Mean polarity changes by {:+.4} per window over the last {} windows (intercept {:+.3}).",
                t.slope, t.windows, t.intercept
            );
        }
        Err(e) => {
            let _ = writeln!(out, "No trend: {e}.");
        }
    }

    out.push('\n');
    out.push_str(&heading(format, "Aspects"));
    let aspects = config.aspect_set()?;
    let mut rows = Vec::new();
    for name in aspects.names() {
        let s = aspect_summary(windows, &aspects, name)?;
        let c = &s.counts;
        rows.push(vec![
            name.clone(),
            c.mentioned().to_string(),
            c.negative.to_string(),
            c.neutral.to_string(),
            c.positive.to_string(),
            opt(c.polarity()),
            s.trend
                .as_ref()
                .map_or_else(|| "---".to_string(), |t| format!("{:+.4}", t.slope)),
        ]);
    }
    out.push_str(&table(
        format,
        &["Aspect", "Mentions", "Neg.", "Neu.", "Pos.", "Polarity", "Trend"],
        &rows,
    ));

    out.push('\n');
    out.push_str(&heading(format, "Alerts"));
    if alerts.is_empty() {
        out.push_str("No negative-sentiment spikes.\n");
    } else {
        let rows: Vec<Vec<String>> = alerts
            .iter()
            .map(|a| {
                vec![
                    format_timestamp(&a.window_start),
                    format!("{:.3}", a.negative_fraction),
                    format!("{:.3}", a.baseline),
                    format!("{:.3}", a.threshold()),
                    a.volume.to_string(),
                ]
            })
            .collect();
        out.push_str(&table(
            format,
            &["Window start", "Neg. share", "Baseline", "Threshold", "Volume"],
            &rows,
        ));
    }
    Ok(out)
}

pub fn report(args: ReportArgs) -> Result<()> {
    let format: ReportFormat = args.format.parse()?;
    let config = PipelineConfig::load(&args.config)?;
    let log = AnalyticsLog::in_dir(&config.store.analytics_dir);
    let windows: Vec<WindowStats> = if log.windows.exists() {
        read_log(&log.windows).with_context(|| format!("reading {}", log.windows.display()))?
    } else {
        Vec::new()
    };
    let alerts: Vec<Alert> = if log.alerts.exists() {
        read_log(&log.alerts).with_context(|| format!("reading {}", log.alerts.display()))?
    } else {
        Vec::new()
    };
    let recent = &windows[windows.len().saturating_sub(args.windows)..];
    let first = recent.first().map(|w| w.start);
    let alerts: Vec<Alert> = alerts
        .into_iter()
        .filter(|a| first.is_some_and(|f| a.window_start >= f))
        .collect();
    let body = render(&config, recent, &alerts, format)?;
    let path = write_report(&args.reports, "insights", Utc::now(), format, &body)?;
    print!("{body}");
    println!("\nwrote {}", path.display());
    Ok(())
}
