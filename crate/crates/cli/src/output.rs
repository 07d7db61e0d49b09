//! CSV tables and the JSON run summary.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub verdict: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Skipped {
    pub name: String,
    pub reason: String,
}

/// Everything a subcommand reports besides its tables.
#[derive(Debug, Default, Serialize)]
pub struct Report {
    pub verdicts: Vec<Verdict>,
    pub skipped: Vec<Skipped>,
    pub outputs: Vec<String>,
    pub timings: Vec<(String, f64)>,
}

impl Report {
    pub fn verdict(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.into(),
            verdict: if pass { "PASS" } else { "FAIL" },
            detail: detail.into(),
        });
    }

    pub fn skip(&mut self, name: impl Into<String>, reason: impl ToString) {
        self.skipped.push(Skipped {
            name: name.into(),
            reason: reason.to_string(),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.verdict == "PASS")
    }
}

/// Formats a value for a CSV cell; `None` is an empty cell.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `rows` under `header`, preceded by a `# generated_at=<unix secs>`
/// line. Everything after that line depends only on the inputs.
pub fn write_csv(out: &Path, name: &str, header: &[String], rows: &[Vec<String>], report: &mut Report) -> Result<()> {
    let path = out.join(name);
    let mut file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "# generated_at={}", unix_secs())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    report.outputs.push(name.to_string());
    Ok(())
}

fn unix_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Serialize)]
struct Summary<'a> {
    subcommand: &'a str,
    master_seed: u64,
    generated_at: u64,
    all_pass: bool,
    verdicts: &'a [Verdict],
    skipped: &'a [Skipped],
    outputs: &'a [String],
    timings: serde_json::Map<String, serde_json::Value>,
}

pub fn write_summary(out: &Path, subcommand: &str, seed: u64, report: &Report, total_secs: f64) -> Result<PathBuf> {
    let mut timings = serde_json::Map::new();
    for (k, v) in &report.timings {
        timings.insert(k.clone(), (*v).into());
    }
    timings.insert("total_secs".into(), total_secs.into());
    let summary = Summary {
        subcommand,
        master_seed: seed,
        generated_at: unix_secs(),
        all_pass: report.all_pass(),
        verdicts: &report.verdicts,
        skipped: &report.skipped,
        outputs: &report.outputs,
        timings,
    };
    let path = out.join("summary.json");
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(file, &summary)?;
    Ok(path)
}
