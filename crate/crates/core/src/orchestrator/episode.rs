//! One episode of the collaborative loop.

use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::assess::assess_complexity;
use super::switch::{decide_switch, should_monitor, StepRecord, SwitchDecision};
use super::{Mode, MonitorPlan};
use crate::actions::parse_action;
use crate::backends::{assemble_prompt, ModelBackend, ModelRequest, Purpose, RoutingKey, TemplateId, Tier};
use crate::env::{apply, evaluate, fail_step, render_screen_text, reset, AppPack, EnvError, Status, TaskSpec};
use crate::memory::{History, DEFAULT_WINDOW};
use crate::protocol::{parse_turn, summarize_for_history};
use crate::telemetry::trace::{EpisodeTrace, TraceEvent, TraceHeader, TraceResult};
use crate::templates::TEMPLATE_VERSION;

/// Which tiers an episode may use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    #[default]
    Collaborative,
    CloudOnly,
    DeviceOnly,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Collaborative, Arm::CloudOnly, Arm::DeviceOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Collaborative => "collaborative",
            Arm::CloudOnly => "cloud_only",
            Arm::DeviceOnly => "device_only",
        }
    }
}

pub struct Backends<'a> {
    pub device: &'a dyn ModelBackend,
    pub cloud: &'a dyn ModelBackend,
    /// Model-mode assessor; defaults to the cloud backend.
    pub assessor: Option<&'a dyn ModelBackend>,
    /// Model-mode switcher; defaults to the cloud backend.
    pub switcher: Option<&'a dyn ModelBackend>,
}

impl<'a> Backends<'a> {
    pub fn new(device: &'a dyn ModelBackend, cloud: &'a dyn ModelBackend) -> Self {
        Backends { device, cloud, assessor: None, switcher: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub arm: Arm,
    pub assess_mode: Mode,
    pub switch_mode: Mode,
    /// Replaces the assessed plan when set.
    pub plan_override: Option<MonitorPlan>,
    pub window: usize,
    pub deterministic: bool,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            arm: Arm::Collaborative,
            assess_mode: Mode::Rules,
            switch_mode: Mode::Rules,
            plan_override: None,
            window: DEFAULT_WINDOW,
            deterministic: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub success: bool,
    pub total_steps: usize,
    pub device_steps: usize,
    pub cloud_steps: usize,
    pub switched_at: Option<usize>,
    pub termination: String,
    /// Model-mode switcher invocations; never counted as cloud steps.
    pub monitor_calls: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub result: EpisodeResult,
    pub trace: EpisodeTrace,
}

fn termination(status: &Status) -> String {
    match status {
        Status::Finished { .. } => "finished".into(),
        Status::Terminated { reason } => reason.clone(),
        Status::Running => "running".into(),
    }
}

pub fn run_episode(
    task: &TaskSpec,
    pack: &AppPack,
    backends: &Backends<'_>,
    cfg: &EpisodeConfig,
) -> Result<EpisodeRun, EnvError> {
    let mut st = reset(pack, task)?;
    let assessment = match cfg.plan_override {
        Some(plan) => super::Assessment { plan, fallback: false, reply: None },
        None => assess_complexity(task, cfg.assess_mode, Some(backends.assessor.unwrap_or(backends.cloud))),
    };
    let plan = assessment.plan;
    let episode_id = format!("{}@{}", task.id, cfg.arm.as_str());
    let header = TraceHeader {
        episode_id: episode_id.clone(),
        task_id: task.id.clone(),
        arm: cfg.arm,
        pack_id: pack.id.clone(),
        pack_version: pack.version.clone(),
        pack_hash: pack.hash(),
        template_version: TEMPLATE_VERSION,
        plan,
        plan_fallback: assessment.fallback,
        device: backends.device.name().to_string(),
        cloud: backends.cloud.name().to_string(),
        seed: cfg.seed,
        window: cfg.window,
    };

    let mut history = History::with_window(cfg.window).unwrap_or_default();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut executed: Vec<String> = Vec::new();
    let mut turns = [0usize; 2];
    let mut current = if cfg.arm == Arm::CloudOnly { Tier::Cloud } else { Tier::Device };
    let mut switched = false;
    let mut switched_at = None;
    let mut monitor_calls = 0;

    while !st.is_over() {
        let started = Instant::now();
        let t = st.t;
        let monitor_fired = cfg.arm == Arm::Collaborative && should_monitor(t, plan, switched);
        let mut decision: Option<SwitchDecision> = None;
        if monitor_fired && !steps.is_empty() {
            let key = RoutingKey {
                task_id: task.id.clone(),
                screen_id: st.current.clone(),
                step: t,
                turn: turns[1],
                executed: executed.clone(),
            };
            let switcher = backends.switcher.unwrap_or(backends.cloud);
            let d = decide_switch(&task.instruction, &steps, &history, st.screen(), cfg.switch_mode, Some(switcher), key);
            if cfg.switch_mode == Mode::Model {
                monitor_calls += 1;
            }
            if d.verdict == Tier::Cloud {
                info!("{episode_id}: switching to cloud at step {t} ({})", d.detail);
                switched = true;
                switched_at = Some(t);
                current = Tier::Cloud;
            }
            decision = Some(d);
        }

        let (backend, template, slot) = match current {
            Tier::Device => (backends.device, TemplateId::OnDevice, 0),
            Tier::Cloud => (backends.cloud, TemplateId::Cloud, 1),
        };
        let screen_text = render_screen_text(st.screen());
        let request = ModelRequest {
            purpose: Purpose::Act,
            messages: assemble_prompt(&task.instruction, &screen_text, &history.render(), template),
            key: RoutingKey {
                task_id: task.id.clone(),
                screen_id: st.current.clone(),
                step: t,
                turn: turns[slot],
                executed: executed.clone(),
            },
        };
        let reply = match backend.invoke(&request) {
            Ok(r) => r,
            Err(e) => {
                warn!("{episode_id}: backend {} failed at step {t}: {e}", backend.name());
                st.status = Status::Terminated { reason: format!("backend failure: {e}") };
                break;
            }
        };
        turns[slot] += 1;

        let (turn, report) = parse_turn(&reply.text);
        let (action_text, parsed, outcome) = match parse_action(&turn.call_text) {
            Ok(action) => {
                let outcome = apply(pack, &mut st, &action);
                (action.render(), true, outcome)
            }
            Err(e) => {
                let outcome = fail_step(&mut st, &format!("unparseable call: {e}"));
                (turn.call_text.trim().to_string(), false, outcome)
            }
        };
        history.append(summarize_for_history(&turn), action_text.clone());
        executed.push(action_text.clone());
        steps.push(StepRecord {
            t,
            tier: current,
            action: action_text.clone(),
            screen_before: outcome.screen_before.clone(),
            screen_after: outcome.screen_after.clone(),
            ineffective: outcome.ineffective,
            k: report.k,
        });
        events.push(TraceEvent {
            episode_id: episode_id.clone(),
            t,
            tier: current,
            backend: backend.name().to_string(),
            raw: reply.text,
            action: action_text,
            parsed,
            k: report.k,
            c: report.c,
            out_of_order: report.out_of_order,
            screen_before: outcome.screen_before,
            screen_after: outcome.screen_after,
            state_digest: st.digest(),
            monitor_fired,
            decision,
            validation_error: outcome.validation_error,
            ineffective: outcome.ineffective,
            retries: reply.retries,
            exchange: reply.exchange,
            wall_ms: if cfg.deterministic { 0 } else { started.elapsed().as_millis() as u64 },
        });
    }

    let device_steps = steps.iter().filter(|s| s.tier == Tier::Device).count();
    let result = EpisodeResult {
        task_id: task.id.clone(),
        success: evaluate(task, &st),
        total_steps: steps.len(),
        device_steps,
        cloud_steps: steps.len() - device_steps,
        switched_at,
        termination: termination(&st.status),
        monitor_calls,
    };
    let trace = EpisodeTrace {
        header,
        events,
        result: TraceResult { result: result.clone(), status: st.status.clone(), final_digest: st.digest() },
    };
    Ok(EpisodeRun { result, trace })
}
