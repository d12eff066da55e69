//! Result tables: one CSV row per (trial, method, split).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::experiment::{MethodResult, TrialRecord, TrialSummary};

pub const CSV_HEADER: &str = "axis,value,trial,split,method,accuracy,seconds";

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub axis: String,
    pub value: String,
    pub trial: usize,
    pub split: String,
    pub method: String,
    pub accuracy: f64,
    pub seconds: f64,
}

/// Baseline rows repeat under every trial so each trial is self-contained.
pub fn csv_rows(summaries: &[TrialSummary]) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for s in summaries {
        for t in &s.trials {
            let aqks_seconds = t.transform_seconds + t.aqks.seconds;
            for (method, result, seconds) in [
                ("baseline", &s.baseline, s.baseline.seconds),
                ("aqks", &t.aqks, aqks_seconds),
            ] {
                for (split, accuracy) in [("train", result.train_accuracy), ("test", result.test_accuracy)] {
                    rows.push(CsvRow {
                        axis: s.axis.clone(),
                        value: s.value.clone(),
                        trial: t.trial,
                        split: split.into(),
                        method: method.into(),
                        accuracy,
                        seconds,
                    });
                }
            }
        }
    }
    rows
}

pub fn write_csv<W: Write>(mut w: W, summaries: &[TrialSummary]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in csv_rows(summaries) {
        writeln!(
            w,
            "{},{},{},{},{},{:.6},{:.3}",
            r.axis, r.value, r.trial, r.split, r.method, r.accuracy, r.seconds
        )?;
    }
    Ok(())
}

pub fn write_csv_file(path: &Path, summaries: &[TrialSummary]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, summaries)?;
    w.flush()?;
    Ok(())
}

/// Writes the table to `path`.
pub fn emit_csv(summaries: &[TrialSummary], path: &Path) -> Result<()> {
    write_csv_file(path, summaries)
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => bail!("results header: expected `{CSV_HEADER}`, found {other:?}"),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                bail!("results line {}: expected 7 fields, found {}", i + 2, f.len());
            }
            let num = |k: usize, name: &str| -> Result<f64> {
                f[k].parse()
                    .with_context(|| format!("results line {}: bad {name} `{}`", i + 2, f[k]))
            };
            Ok(CsvRow {
                axis: f[0].into(),
                value: f[1].into(),
                trial: f[2]
                    .parse()
                    .with_context(|| format!("results line {}: bad trial `{}`", i + 2, f[2]))?,
                split: f[3].into(),
                method: f[4].into(),
                accuracy: num(5, "accuracy")?,
                seconds: num(6, "seconds")?,
            })
        })
        .collect()
}

/// Rebuilds summaries from parsed rows, grouped by `(axis, value)` in order
/// of first appearance. Timings are kept as totals per method.
pub fn summaries_from_rows(rows: &[CsvRow]) -> Result<Vec<TrialSummary>> {
    let mut out: Vec<TrialSummary> = Vec::new();
    for r in rows {
        let idx = match out.iter().position(|s| s.axis == r.axis && s.value == r.value) {
            Some(i) => i,
            None => {
                out.push(TrialSummary {
                    axis: r.axis.clone(),
                    value: r.value.clone(),
                    baseline: empty_result(),
                    trials: Vec::new(),
                });
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        let target = match r.method.as_str() {
            "baseline" => &mut s.baseline,
            "aqks" => {
                let pos = match s.trials.iter().position(|t| t.trial == r.trial) {
                    Some(p) => p,
                    None => {
                        s.trials.push(TrialRecord {
                            trial: r.trial,
                            aqks: empty_result(),
                            transform_seconds: 0.0,
                        });
                        s.trials.len() - 1
                    }
                };
                &mut s.trials[pos].aqks
            }
            other => bail!("results: unknown method `{other}`"),
        };
        match r.split.as_str() {
            "train" => target.train_accuracy = r.accuracy,
            "test" => target.test_accuracy = r.accuracy,
            other => bail!("results: unknown split `{other}`"),
        }
        target.seconds = r.seconds;
    }
    Ok(out)
}

fn empty_result() -> MethodResult {
    MethodResult {
        train_accuracy: f64::NAN,
        test_accuracy: f64::NAN,
        seconds: 0.0,
        converged: true,
    }
}
