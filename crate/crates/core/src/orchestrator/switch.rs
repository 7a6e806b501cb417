//! Monitoring schedule and switch decisions.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Mode, MonitorPlan};
use crate::backends::{assemble_prompt, ModelBackend, ModelRequest, Purpose, RoutingKey, TemplateId, Tier};
use crate::env::{render_screen_text, Screen};
use crate::memory::History;

pub const REPEAT_LOOKBACK: usize = 2;
pub const NO_PROGRESS_LOOKBACK: usize = 3;
pub const QUALITY_LOOKBACK: usize = 2;

/// Orchestrator-side facts about one completed step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub tier: Tier,
    /// Canonical call text, or the raw call text when it did not parse.
    pub action: String,
    pub screen_before: String,
    pub screen_after: String,
    pub ineffective: bool,
    pub k: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchBasis {
    RuleRepetition,
    RuleNoProgress,
    RuleQuality,
    ModelVerdict,
    /// Rules mode with no rule triggered.
    NoTrigger,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchDecision {
    pub verdict: Tier,
    pub basis: SwitchBasis,
    pub detail: String,
}

impl SwitchDecision {
    fn device(basis: SwitchBasis, detail: impl Into<String>) -> Self {
        SwitchDecision { verdict: Tier::Device, basis, detail: detail.into() }
    }

    fn cloud(basis: SwitchBasis, detail: impl Into<String>) -> Self {
        SwitchDecision { verdict: Tier::Cloud, basis, detail: detail.into() }
    }
}

pub fn should_monitor(t: usize, plan: MonitorPlan, switched: bool) -> bool {
    !switched && t >= plan.monitor_start && (t - plan.monitor_start).is_multiple_of(plan.monitor_every)
}

fn tail<T>(xs: &[T], n: usize) -> Option<&[T]> {
    (xs.len() >= n).then(|| &xs[xs.len() - n..])
}

/// Rule checks in order: repetition, no progress, output quality.
pub fn rules_verdict(steps: &[StepRecord]) -> SwitchDecision {
    if let Some(w) = tail(steps, REPEAT_LOOKBACK) {
        if w.iter().all(|s| s.action == w[0].action && s.screen_before == s.screen_after) {
            return SwitchDecision::cloud(
                SwitchBasis::RuleRepetition,
                format!("{} repeated {REPEAT_LOOKBACK} times on {}", w[0].action, w[0].screen_after),
            );
        }
    }
    if let Some(w) = tail(steps, NO_PROGRESS_LOOKBACK) {
        if w.iter().all(|s| s.ineffective) {
            return SwitchDecision::cloud(
                SwitchBasis::RuleNoProgress,
                format!("{NO_PROGRESS_LOOKBACK} consecutive ineffective steps"),
            );
        }
    }
    if let Some(w) = tail(steps, QUALITY_LOOKBACK) {
        if w.iter().all(|s| s.k < 3) {
            return SwitchDecision::cloud(
                SwitchBasis::RuleQuality,
                format!("{QUALITY_LOOKBACK} consecutive turns with k < 3"),
            );
        }
    }
    SwitchDecision::device(SwitchBasis::NoTrigger, "no rule triggered")
}

/// Reads a switcher reply; anything but exactly `CLOUD` or `DEVICE` after
/// trimming counts as `DEVICE`.
pub fn parse_verdict(reply: &str) -> SwitchDecision {
    match reply.trim() {
        "CLOUD" => SwitchDecision::cloud(SwitchBasis::ModelVerdict, "CLOUD"),
        "DEVICE" => SwitchDecision::device(SwitchBasis::ModelVerdict, "DEVICE"),
        other => {
            warn!("non-conforming switcher reply {other:?}; treating as DEVICE");
            SwitchDecision::device(SwitchBasis::ModelVerdict, format!("non-conforming reply {other:?}"))
        }
    }
}

/// Decides whether the cloud tier takes over, judging the completed steps.
pub fn decide_switch(
    task: &str,
    steps: &[StepRecord],
    history: &History,
    screen: &Screen,
    mode: Mode,
    switcher: Option<&dyn ModelBackend>,
    key: RoutingKey,
) -> SwitchDecision {
    match mode {
        Mode::Rules => rules_verdict(steps),
        Mode::Model => {
            let Some(backend) = switcher else {
                warn!("model-mode switch check without a switcher; staying on device");
                return SwitchDecision::device(SwitchBasis::ModelVerdict, "no switcher backend");
            };
            let request = ModelRequest {
                purpose: Purpose::Switch,
                messages: assemble_prompt(task, &render_screen_text(screen), &history.render(), TemplateId::Switcher),
                key,
            };
            match backend.invoke(&request) {
                Ok(reply) => parse_verdict(&reply.text),
                Err(e) => {
                    warn!("switcher failed ({e}); staying on device");
                    SwitchDecision::device(SwitchBasis::ModelVerdict, format!("switcher error: {e}"))
                }
            }
        }
    }
}
