//! Traces, replay and run reports.

use std::path::{Path, PathBuf};

pub mod replay;
pub mod report;
pub mod trace;

pub use replay::{replay, Verdict};
pub use report::{aggregate, render_comparison, ReportError, RunReport};
pub use trace::{EpisodeTrace, TraceError, TraceEvent, TraceHeader, TraceLine, TraceResult, TraceWriter};

use crate::orchestrator::SuiteRun;

/// Writes one trace per episode under `dir/traces` plus `report.txt` and
/// `report.tsv`. Returns the trace paths in task order.
pub fn write_run(dir: &Path, run: &SuiteRun, report: &RunReport) -> Result<Vec<PathBuf>, TraceError> {
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces)?;
    let mut paths = Vec::with_capacity(run.runs.len());
    for ep in &run.runs {
        let path = traces.join(format!("{}.jsonl", ep.result.task_id));
        ep.trace.write(&path)?;
        paths.push(path);
    }
    std::fs::write(dir.join("report.txt"), report.to_text())?;
    std::fs::write(dir.join("report.tsv"), report.to_tsv())?;
    Ok(paths)
}
