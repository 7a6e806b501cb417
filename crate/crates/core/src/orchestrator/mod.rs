//! Reasoning loop and adaptive device-to-cloud switching.

use serde::{Deserialize, Serialize};

use crate::backends::Tier;

pub mod assess;
pub mod episode;
pub mod suite;
pub mod switch;

pub use assess::{assess_complexity, parse_plan, rules_plan, Assessment};
pub use episode::{run_episode, Arm, Backends, EpisodeConfig, EpisodeResult, EpisodeRun};
pub use suite::{run_suite, BackendBindings, SuiteConfig, SuiteError, SuiteRun};
pub use switch::{decide_switch, should_monitor, StepRecord, SwitchBasis, SwitchDecision};

/// Monitoring schedule: checks start at step `monitor_start` and repeat
/// every `monitor_every` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MonitorPlan {
    pub monitor_start: usize,
    pub monitor_every: usize,
}

impl MonitorPlan {
    /// Returns `None` when `monitor_every` is zero.
    pub fn new(monitor_start: usize, monitor_every: usize) -> Option<Self> {
        (monitor_every >= 1).then_some(MonitorPlan { monitor_start, monitor_every })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Rules,
    Model,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rules" => Ok(Mode::Rules),
            "model" => Ok(Mode::Model),
            other => Err(format!("unknown mode {other:?} (expected rules or model)")),
        }
    }
}

/// Tier sequence of an episode matches `device* cloud*`.
pub fn is_one_way(tiers: &[Tier]) -> bool {
    tiers.windows(2).all(|w| !(w[0] == Tier::Cloud && w[1] == Tier::Device))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_requires_positive_interval() {
        assert!(MonitorPlan::new(0, 0).is_none());
        assert_eq!(MonitorPlan::new(3, 1), Some(MonitorPlan { monitor_start: 3, monitor_every: 1 }));
    }

    #[test]
    fn one_way() {
        use Tier::*;
        assert!(is_one_way(&[]));
        assert!(is_one_way(&[Device, Device, Cloud, Cloud]));
        assert!(is_one_way(&[Cloud]));
        assert!(!is_one_way(&[Device, Cloud, Device]));
    }
}
