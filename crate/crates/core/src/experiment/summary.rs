use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::SeedReport;
use crate::trainer::Mode;
use crate::{Error, Result};

pub const SUMMARY_FORMAT: &str = "cmdg-summary";

/// Mean and sample standard deviation (0 for a single seed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// `None` when any seed lacks the value, so partial means never mix with
    /// complete ones.
    pub fn of(values: &[Option<f64>]) -> Option<Self> {
        let xs: Vec<f64> = values.iter().copied().collect::<Option<_>>()?;
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub mode: Mode,
    pub match_fraction: Option<f64>,
    pub seeds: usize,
    /// Fractions in [0, 1].
    pub ood_accuracy: Option<Stat>,
    pub val_accuracy: Option<Stat>,
    pub overlap_pct: Option<Stat>,
    pub top10_overlap_pct: Option<Stat>,
    pub mean_rank: Option<Stat>,
}

/// Contents of `summary.json`: per-run statistics across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format: String,
    pub version: u32,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunSummary>,
}

impl Summary {
    pub fn from_reports(reports: &[SeedReport]) -> Self {
        let labels: Vec<_> = reports
            .first()
            .map(|r| {
                r.runs
                    .iter()
                    .map(|x| (x.label.clone(), x.config.clone()))
                    .collect()
            })
            .unwrap_or_default();
        let runs = labels
            .into_iter()
            .enumerate()
            .map(|(i, (label, config))| {
                let col =
                    |f: &dyn Fn(&super::runner::RunResult) -> Option<f64>| -> Vec<Option<f64>> {
                        reports.iter().map(|r| f(&r.runs[i])).collect()
                    };
                RunSummary {
                    label,
                    mode: config.mode,
                    match_fraction: config.match_fraction,
                    seeds: reports.len(),
                    ood_accuracy: Stat::of(&col(&|r| r.metrics.ood_accuracy)),
                    val_accuracy: Stat::of(&col(&|r| r.val_accuracy)),
                    overlap_pct: Stat::of(&col(&|r| r.metrics.overlap_pct)),
                    top10_overlap_pct: Stat::of(&col(&|r| r.metrics.top10_overlap_pct)),
                    mean_rank: Stat::of(&col(&|r| r.metrics.mean_rank)),
                }
            })
            .collect();
        Self {
            format: SUMMARY_FORMAT.into(),
            version: 1,
            seeds: reports.iter().map(|r| r.seed).collect(),
            runs,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let summary: Self = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: format!("not a summary: {e}"),
        })?;
        if summary.format != SUMMARY_FORMAT || summary.version != 1 {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!(
                    "expected {SUMMARY_FORMAT} v1, found {} v{}",
                    summary.format, summary.version
                ),
            });
        }
        Ok(summary)
    }

    pub fn run(&self, label: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.label == label)
    }
}

const HEADERS: [&str; 7] = [
    "summary",
    "run",
    "mode",
    "ood_acc",
    "overlap",
    "top10",
    "mean_rank",
];

fn cells(source: &str, r: &RunSummary, csv: bool) -> [String; 7] {
    let pm = |s: Option<Stat>, scale: f64| match s {
        None => "-".to_string(),
        Some(s) if csv => format!("{:.4}", s.mean * scale),
        Some(s) => format!("{:.2} ± {:.2}", s.mean * scale, s.std * scale),
    };
    [
        source.to_string(),
        r.label.clone(),
        r.mode.as_str().to_string(),
        pm(r.ood_accuracy, 100.0),
        pm(r.overlap_pct, 1.0),
        pm(r.top10_overlap_pct, 1.0),
        pm(r.mean_rank, 1.0),
    ]
}

/// Renders `(name, summary)` pairs as an aligned table (or CSV with means
/// only). OOD accuracy is shown in percent; missing values are `-`.
pub fn compare(summaries: &[(String, Summary)], csv: bool) -> Result<String> {
    if summaries.len() < 2 {
        return Err(Error::Config("compare needs at least two summaries".into()));
    }
    let rows: Vec<[String; 7]> = summaries
        .iter()
        .flat_map(|(name, s)| s.runs.iter().map(move |r| cells(name, r, csv)))
        .collect();
    let mut out = String::new();
    if csv {
        out.push_str(&HEADERS.join(","));
        out.push('\n');
        for row in &rows {
            let quoted: Vec<String> = row
                .iter()
                .map(|c| {
                    if c.contains(',') || c.contains('"') {
                        format!("\"{}\"", c.replace('"', "\"\""))
                    } else {
                        c.clone()
                    }
                })
                .collect();
            out.push_str(&quoted.join(","));
            out.push('\n');
        }
        return Ok(out);
    }
    let mut widths = HEADERS.map(|h| h.chars().count());
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut line = |cols: &[String]| {
        let padded: Vec<String> = cols
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = " ".repeat(w - c.chars().count());
                // text columns left-aligned, numbers right-aligned
                if i < 3 {
                    format!("{c}{pad}")
                } else {
                    format!("{pad}{c}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&HEADERS.map(String::from));
    for row in &rows {
        line(row);
    }
    Ok(out)
}
