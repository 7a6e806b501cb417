//! Run-level metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::EpisodeResult;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("baseline covers a different task set ({run} tasks vs {baseline} tasks, first difference {first})")]
    MismatchedTasks { run: usize, baseline: usize, first: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub suite_id: String,
    /// Sorted by task id.
    pub tasks: Vec<EpisodeResult>,
    pub task_count: usize,
    pub successes: usize,
    pub sr: f64,
    pub total_steps: usize,
    pub device_steps: usize,
    pub cloud_steps: usize,
    pub device_step_share: f64,
    pub cloud_step_share: f64,
    pub monitor_calls: usize,
    pub baseline_cloud_steps: Option<usize>,
    /// `1 - cloud_steps / baseline_cloud_steps` over the same task set.
    pub cloud_steps_saved: Option<f64>,
}

fn sorted_ids(rs: &[EpisodeResult]) -> Vec<&str> {
    let mut ids: Vec<&str> = rs.iter().map(|r| r.task_id.as_str()).collect();
    ids.sort_unstable();
    ids
}

pub fn aggregate(
    suite_id: &str,
    results: &[EpisodeResult],
    baseline: Option<&[EpisodeResult]>,
) -> Result<RunReport, ReportError> {
    let mut tasks = results.to_vec();
    tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let task_count = tasks.len();
    let successes = tasks.iter().filter(|r| r.success).count();
    let total_steps: usize = tasks.iter().map(|r| r.total_steps).sum();
    let device_steps: usize = tasks.iter().map(|r| r.device_steps).sum();
    let cloud_steps: usize = tasks.iter().map(|r| r.cloud_steps).sum();
    let share = |n: usize| if total_steps == 0 { 0.0 } else { n as f64 / total_steps as f64 };

    let (baseline_cloud_steps, cloud_steps_saved) = match baseline {
        None => (None, None),
        Some(base) => {
            let (a, b) = (sorted_ids(results), sorted_ids(base));
            if a != b {
                let first = a
                    .iter()
                    .zip(&b)
                    .find(|(x, y)| x != y)
                    .map(|(x, y)| format!("{x} vs {y}"))
                    .unwrap_or_else(|| "length".into());
                return Err(ReportError::MismatchedTasks { run: a.len(), baseline: b.len(), first });
            }
            let base_cloud: usize = base.iter().map(|r| r.cloud_steps).sum();
            let saved = (base_cloud > 0).then(|| 1.0 - cloud_steps as f64 / base_cloud as f64);
            (Some(base_cloud), saved)
        }
    };

    Ok(RunReport {
        suite_id: suite_id.to_string(),
        task_count,
        successes,
        sr: if task_count == 0 { 0.0 } else { successes as f64 / task_count as f64 },
        total_steps,
        device_steps,
        cloud_steps,
        device_step_share: share(device_steps),
        cloud_step_share: share(cloud_steps),
        monitor_calls: tasks.iter().map(|r| r.monitor_calls).sum(),
        baseline_cloud_steps,
        cloud_steps_saved,
        tasks,
    })
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite: {}", self.suite_id);
        let _ = writeln!(s, "tasks: {}  successes: {}  SR: {:.4}", self.task_count, self.successes, self.sr);
        let _ = writeln!(
            s,
            "steps: {} total, {} device ({:.4}), {} cloud ({:.4})",
            self.total_steps, self.device_steps, self.device_step_share, self.cloud_steps, self.cloud_step_share
        );
        let _ = writeln!(s, "monitor calls: {}", self.monitor_calls);
        let _ = writeln!(
            s,
            "cloud steps saved: {} (baseline cloud steps: {})",
            opt(self.cloud_steps_saved.map(|v| format!("{v:.4}"))),
            opt(self.baseline_cloud_steps)
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<32} {:>7} {:>5} {:>6} {:>5} {:>8} {:>7}  termination",
            "task", "success", "steps", "device", "cloud", "switched", "monitor"
        );
        for r in &self.tasks {
            let _ = writeln!(
                s,
                "{:<32} {:>7} {:>5} {:>6} {:>5} {:>8} {:>7}  {}",
                r.task_id,
                r.success,
                r.total_steps,
                r.device_steps,
                r.cloud_steps,
                opt(r.switched_at),
                r.monitor_calls,
                r.termination
            );
        }
        s
    }

    pub fn to_tsv(&self) -> String {
        let mut s =
            String::from("task_id\tsuccess\ttotal_steps\tdevice_steps\tcloud_steps\tswitched_at\tmonitor_calls\ttermination\n");
        for r in &self.tasks {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.task_id,
                r.success,
                r.total_steps,
                r.device_steps,
                r.cloud_steps,
                opt(r.switched_at),
                r.monitor_calls,
                r.termination
            );
        }
        s
    }
}

/// Side-by-side summary of several arms over the same tasks.
pub fn render_comparison(arms: &[(&str, &RunReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:>6} {:>6} {:>7} {:>6} {:>12} {:>12} {:>8} {:>12}",
        "arm", "tasks", "SR", "steps", "cloud", "device_share", "cloud_share", "monitor", "cloud_saved"
    );
    for (name, r) in arms {
        let _ = writeln!(
            s,
            "{:<14} {:>6} {:>6.4} {:>7} {:>6} {:>12.4} {:>12.4} {:>8} {:>12}",
            name,
            r.task_count,
            r.sr,
            r.total_steps,
            r.cloud_steps,
            r.device_step_share,
            r.cloud_step_share,
            r.monitor_calls,
            opt(r.cloud_steps_saved.map(|v| format!("{v:.4}")))
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(id: &str, success: bool, device: usize, cloud: usize) -> EpisodeResult {
        EpisodeResult {
            task_id: id.into(),
            success,
            total_steps: device + cloud,
            device_steps: device,
            cloud_steps: cloud,
            switched_at: (cloud > 0 && device > 0).then_some(device),
            termination: "finished".into(),
            monitor_calls: 0,
        }
    }

    #[test]
    fn sr_definition() {
        let rs: Vec<_> = (0..10).map(|i| res(&format!("t{i}"), i < 6, 3, 0)).collect();
        let r = aggregate("s", &rs, None).unwrap();
        assert_eq!(r.sr, 0.6);
        assert_eq!(r.cloud_step_share, 0.0);
        assert_eq!(r.device_step_share, 1.0);
        assert_eq!(r.cloud_steps_saved, None);
    }

    #[test]
    fn cloud_steps_saved_formula() {
        let run = vec![res("a", true, 10, 90)];
        let base = vec![res("a", true, 0, 100)];
        let r = aggregate("s", &run, Some(&base)).unwrap();
        assert!((r.cloud_steps_saved.unwrap() - 0.10).abs() < 1e-12);
        assert!((r.device_step_share + r.cloud_step_share - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_sets_error() {
        let run = vec![res("a", true, 1, 1), res("b", true, 1, 1)];
        let base = vec![res("a", true, 0, 2), res("c", true, 0, 2)];
        assert!(matches!(aggregate("s", &run, Some(&base)), Err(ReportError::MismatchedTasks { .. })));
        assert!(aggregate("s", &run, Some(&base[..1])).is_err());
    }

    #[test]
    fn permutation_invariant() {
        let rs = vec![res("a", true, 3, 1), res("b", false, 2, 0), res("c", true, 0, 4)];
        let mut rev = rs.clone();
        rev.reverse();
        assert_eq!(aggregate("s", &rs, None).unwrap(), aggregate("s", &rev, None).unwrap());
    }
}
