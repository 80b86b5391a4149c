use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EpisodeResult;
use crate::control::AiaConfig;
use crate::scene::Category;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub category: Category,
    pub episodes: usize,
    pub initial_successes: usize,
    pub long_successes: usize,
    pub initial_rate: f64,
    pub long_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub seed: u64,
    pub resolution: [u32; 2],
    pub config: AiaConfig,
    pub categories: Vec<CategoryStats>,
    /// Unweighted mean of the per-category initial rates.
    pub avg_initial_rate: f64,
    /// Unweighted mean of the per-category long-distance rates.
    pub avg_long_rate: f64,
    pub episodes: Vec<EpisodeResult>,
}

fn rate(successes: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        successes as f64 / n as f64
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl EvalReport {
    /// Aggregates `results` per category, keeping the order of `categories`.
    pub fn from_results(
        policy: &str,
        categories: &[Category],
        episodes: Vec<EpisodeResult>,
        config: AiaConfig,
        seed: u64,
        resolution: [u32; 2],
    ) -> Self {
        let stats: Vec<CategoryStats> = categories
            .iter()
            .map(|&c| {
                let mine: Vec<_> = episodes.iter().filter(|e| e.category == c).collect();
                let initial = mine.iter().filter(|e| e.success_initial).count();
                let long = mine.iter().filter(|e| e.success_long).count();
                CategoryStats {
                    category: c,
                    episodes: mine.len(),
                    initial_successes: initial,
                    long_successes: long,
                    initial_rate: rate(initial, mine.len()),
                    long_rate: rate(long, mine.len()),
                }
            })
            .collect();
        Self {
            policy: policy.to_string(),
            seed,
            resolution,
            config,
            avg_initial_rate: mean(stats.iter().map(|s| s.initial_rate)),
            avg_long_rate: mean(stats.iter().map(|s| s.long_rate)),
            categories: stats,
            episodes,
        }
    }

    pub fn category(&self, c: Category) -> Option<&CategoryStats> {
        self.categories.iter().find(|s| s.category == c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(Error::InvalidParams(format!(
                "unknown report format `{other}`"
            ))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Markdown => "md",
        }
    }

    pub fn render(self, report: &EvalReport) -> Result<String> {
        let mut out = String::new();
        match self {
            Self::Json => {
                out = serde_json::to_string_pretty(report)?;
                out.push('\n');
            }
            Self::Csv => {
                out.push_str("category,episodes,initial_rate,long_rate\n");
                for s in &report.categories {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        s.category, s.episodes, s.initial_rate, s.long_rate
                    );
                }
            }
            Self::Markdown => {
                out.push_str("| category | episodes | initial (>0.01) | long (>0.1) |\n");
                out.push_str("|---|---:|---:|---:|\n");
                for s in &report.categories {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} |",
                        s.category, s.episodes, s.initial_rate, s.long_rate
                    );
                }
                let total: usize = report.categories.iter().map(|s| s.episodes).sum();
                let _ = writeln!(
                    out,
                    "| AVG | {} | {} | {} |",
                    total, report.avg_initial_rate, report.avg_long_rate
                );
            }
        }
        Ok(out)
    }
}

/// Writes `report` to `path` in `format`.
pub fn emit_report(report: &EvalReport, format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, format.render(report)?)?;
    Ok(())
}
