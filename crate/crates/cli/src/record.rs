//! Run records and their CSV form.

use std::fmt;
use std::io::Write;

use disttest_core::tester::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Verdict(Verdict),
    Feasible(bool),
    Learned(bool),
    Check(bool),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match *self {
            Outcome::Verdict(v) => return v.fmt(f),
            Outcome::Feasible(true) => "feasible",
            Outcome::Feasible(false) => "infeasible",
            Outcome::Learned(true) => "learned",
            Outcome::Learned(false) => "failure",
            Outcome::Check(true) => "pass",
            Outcome::Check(false) => "fail",
        };
        f.write_str(s)
    }
}

/// One row of a batch report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub repeat: usize,
    pub command: String,
    pub params_digest: String,
    /// `None` when the run errored.
    pub outcome: Option<Outcome>,
    pub success: bool,
    /// Primary numeric metric: accept fraction, distance, residual or rate.
    pub metric: Option<f64>,
    pub samples_used: u64,
    /// |H|, final support guess, d_no support size or draws per trial.
    pub aux: Option<u64>,
    pub wall_ms: u64,
    pub error: Option<String>,
}

pub const HEADER: [&str; 10] =
    ["seed", "repeat", "command", "params_digest", "outcome", "metric", "samples_used", "aux", "wall_ms", "error"];

/// Scientific notation with 13 significant digits, independent of locale.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.12e}")
}

impl RunRecord {
    fn fields(&self) -> [String; 10] {
        [
            self.seed.to_string(),
            self.repeat.to_string(),
            self.command.clone(),
            self.params_digest.clone(),
            self.outcome.map(|o| o.to_string()).unwrap_or_else(|| "error".into()),
            self.metric.map(fmt_f64).unwrap_or_default(),
            self.samples_used.to_string(),
            self.aux.map(|a| a.to_string()).unwrap_or_default(),
            self.wall_ms.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub successes: usize,
    pub success_fraction: f64,
    pub mean_samples: f64,
    /// `1.96·√(p̂(1−p̂)/runs)`.
    pub ci_radius: f64,
}

pub fn summarize(records: &[RunRecord]) -> Summary {
    let runs = records.len();
    let successes = records.iter().filter(|r| r.success).count();
    let p = if runs == 0 { 0.0 } else { successes as f64 / runs as f64 };
    let mean_samples =
        if runs == 0 { 0.0 } else { records.iter().map(|r| r.samples_used as f64).sum::<f64>() / runs as f64 };
    let ci_radius = if runs == 0 { 0.0 } else { 1.96 * (p * (1.0 - p) / runs as f64).sqrt() };
    Summary { runs, successes, success_fraction: p, mean_samples, ci_radius }
}

/// Header, one row per record, then the summary as `#`-prefixed lines.
pub fn write_report(out: impl Write, records: &[RunRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    let mut out = w.into_inner().map_err(|e| anyhow::anyhow!("flushing report: {}", e.error()))?;
    let s = summarize(records);
    writeln!(out, "# summary,runs,successes,success_fraction,mean_samples,ci_radius")?;
    writeln!(
        out,
        "# summary,{},{},{},{},{}",
        s.runs,
        s.successes,
        fmt_f64(s.success_fraction),
        fmt_f64(s.mean_samples),
        fmt_f64(s.ci_radius)
    )?;
    Ok(())
}
