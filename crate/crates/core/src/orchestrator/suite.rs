//! Suite configuration and parallel execution.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::episode::{run_episode, Arm, Backends, EpisodeConfig, EpisodeRun};
use super::{Mode, MonitorPlan};
use crate::backends::{BackendSpec, SharedBackend, Tier};
use crate::env::{AppPack, EnvError, PackError};
use crate::memory::DEFAULT_WINDOW;

pub const BUNDLED: &str = "bundled";

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("reading suite config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing suite config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid suite config: {0}")]
    Invalid(String),
}

fn bundled() -> String {
    BUNDLED.into()
}
fn one() -> usize {
    1
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub id: String,
    /// `"bundled"` or a pack path relative to the config file.
    #[serde(default = "bundled")]
    pub pack: String,
    /// Task ids to run; empty runs every task in the pack.
    #[serde(default)]
    pub tasks: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub parallel: usize,
    #[serde(default)]
    pub arm: Arm,
    #[serde(default)]
    pub assess_mode: Mode,
    #[serde(default)]
    pub switch_mode: Mode,
    #[serde(default)]
    pub plan: Option<MonitorPlan>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub deterministic: bool,
    pub device: BackendSpec,
    pub cloud: BackendSpec,
    #[serde(default)]
    pub assessor: Option<BackendSpec>,
    #[serde(default)]
    pub switcher: Option<BackendSpec>,
    /// Directory holding the config file; pack paths resolve against it.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self, SuiteError> {
        let cfg: SuiteConfig = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SuiteError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SuiteError::Io { path: path.into(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    fn check(&self) -> Result<(), SuiteError> {
        if self.parallel == 0 {
            return Err(SuiteError::Invalid("parallel must be at least 1".into()));
        }
        if !(1..=crate::memory::MAX_WINDOW).contains(&self.window) {
            return Err(SuiteError::Invalid(format!("window {} out of range", self.window)));
        }
        if self.plan.is_some_and(|p| p.monitor_every == 0) {
            return Err(SuiteError::Invalid("plan.monitor_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load_pack(&self) -> Result<AppPack, SuiteError> {
        if self.pack == BUNDLED {
            return Ok(AppPack::bundled());
        }
        let path = match &self.base_dir {
            Some(dir) => dir.join(&self.pack),
            None => PathBuf::from(&self.pack),
        };
        Ok(AppPack::load(path)?)
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            arm: self.arm,
            assess_mode: self.assess_mode,
            switch_mode: self.switch_mode,
            plan_override: self.plan,
            window: self.window,
            deterministic: self.deterministic,
            seed: self.seed,
        }
    }
}

pub struct BackendBindings {
    pub device: SharedBackend,
    pub cloud: SharedBackend,
    pub assessor: Option<SharedBackend>,
    pub switcher: Option<SharedBackend>,
}

impl BackendBindings {
    pub fn build(cfg: &SuiteConfig, pack: &AppPack) -> Self {
        let make = |spec: &BackendSpec, role: &str, tier| spec.build(&format!("{role}-{}", spec.kind()), tier, pack, cfg.seed);
        BackendBindings {
            device: make(&cfg.device, "device", Tier::Device),
            cloud: make(&cfg.cloud, "cloud", Tier::Cloud),
            assessor: cfg.assessor.as_ref().map(|s| make(s, "assessor", Tier::Cloud)),
            switcher: cfg.switcher.as_ref().map(|s| make(s, "switcher", Tier::Cloud)),
        }
    }

    pub fn as_backends(&self) -> Backends<'_> {
        Backends {
            device: self.device.as_ref(),
            cloud: self.cloud.as_ref(),
            assessor: self.assessor.as_deref(),
            switcher: self.switcher.as_deref(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub suite_id: String,
    pub arm: Arm,
    /// In the order the tasks were listed.
    pub runs: Vec<EpisodeRun>,
}

pub fn run_suite(cfg: &SuiteConfig, pack: &AppPack) -> Result<SuiteRun, SuiteError> {
    let tasks: Vec<_> = if cfg.tasks.is_empty() {
        pack.tasks.iter().collect()
    } else {
        cfg.tasks
            .iter()
            .map(|id| pack.task(id).ok_or_else(|| EnvError::UnknownTask(id.clone())))
            .collect::<Result<_, _>>()?
    };
    let bindings = BackendBindings::build(cfg, pack);
    let episode_cfg = cfg.episode_config();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| SuiteError::Invalid(e.to_string()))?;
    let runs = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| run_episode(task, pack, &bindings.as_backends(), &episode_cfg))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(SuiteRun { suite_id: cfg.id.clone(), arm: cfg.arm, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLD: &str = r#"
id = "gold"
parallel = 4
deterministic = true

[device]
kind = "gold"

[cloud]
kind = "gold"
"#;

    #[test]
    fn gold_suite_succeeds() {
        let cfg = SuiteConfig::from_toml(GOLD).unwrap();
        let pack = cfg.load_pack().unwrap();
        let run = run_suite(&cfg, &pack).unwrap();
        assert_eq!(run.runs.len(), pack.tasks.len());
        assert!(run.runs.iter().all(|r| r.result.success && r.result.cloud_steps == 0));
        let ids: Vec<_> = run.runs.iter().map(|r| r.result.task_id.as_str()).collect();
        let expected: Vec<_> = pack.tasks.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn rejects_unknown_task() {
        let mut cfg = SuiteConfig::from_toml(GOLD).unwrap();
        cfg.tasks = vec!["nope".into()];
        assert!(matches!(run_suite(&cfg, &AppPack::bundled()), Err(SuiteError::Env(_))));
    }

    #[test]
    fn rejects_zero_parallel() {
        let text = GOLD.replace("parallel = 4", "parallel = 0");
        assert!(matches!(SuiteConfig::from_toml(&text), Err(SuiteError::Invalid(_))));
    }

    #[test]
    fn parses_plan_and_modes() {
        let text = format!("{GOLD}\n[plan]\nmonitor_start = 1\nmonitor_every = 2\n")
            .replace("parallel = 4", "parallel = 4\nswitch_mode = \"model\"\narm = \"cloud_only\"");
        let cfg = SuiteConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.plan, MonitorPlan::new(1, 2));
        assert_eq!(cfg.switch_mode, Mode::Model);
        assert_eq!(cfg.arm, Arm::CloudOnly);
    }
}
