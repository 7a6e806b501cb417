//! Task complexity assessment.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Mode, MonitorPlan};
use crate::backends::{assemble_prompt, ModelBackend, ModelRequest, Purpose, RoutingKey, TemplateId};
use crate::env::{RiskTier, TaskSpec};

pub const START_TAG: &str = "MONITORING START FROM";
pub const EVERY_TAG: &str = "MONITORING FREQUENCY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub plan: MonitorPlan,
    /// The model path was requested but its reply was unusable.
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
}

pub fn rules_plan(tier: RiskTier) -> MonitorPlan {
    let (start, every) = match tier {
        RiskTier::Critical => (1, 2),
        RiskTier::High => (2, 2),
        RiskTier::Medium => (3, 3),
        RiskTier::Low => (5, 4),
    };
    MonitorPlan { monitor_start: start, monitor_every: every }
}

fn tag_value(reply: &str, tag: &str) -> Option<usize> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = reply.find(&open)? + open.len();
    let end = start + reply[start..].find(&close)?;
    reply[start..end].trim().parse().ok()
}

/// Reads the plan from an assessor reply.
pub fn parse_plan(reply: &str) -> Option<MonitorPlan> {
    MonitorPlan::new(tag_value(reply, START_TAG)?, tag_value(reply, EVERY_TAG)?)
}

pub fn assess_complexity(task: &TaskSpec, mode: Mode, assessor: Option<&dyn ModelBackend>) -> Assessment {
    let fallback = rules_plan(task.risk_tier);
    let Mode::Model = mode else {
        return Assessment { plan: fallback, fallback: false, reply: None };
    };
    let Some(backend) = assessor else {
        warn!("task {}: model-mode assessment without an assessor; using rules plan", task.id);
        return Assessment { plan: fallback, fallback: true, reply: None };
    };
    let request = ModelRequest {
        purpose: Purpose::Assess,
        messages: assemble_prompt(&task.instruction, "(not provided)", "No history yet.", TemplateId::Assessor),
        key: RoutingKey { task_id: task.id.clone(), ..RoutingKey::default() },
    };
    match backend.invoke(&request) {
        Ok(reply) => match parse_plan(&reply.text) {
            Some(plan) => Assessment { plan, fallback: false, reply: Some(reply.text) },
            None => {
                warn!("task {}: assessor reply unparseable; using rules plan", task.id);
                Assessment { plan: fallback, fallback: true, reply: Some(reply.text) }
            }
        },
        Err(e) => {
            warn!("task {}: assessor failed ({e}); using rules plan", task.id);
            Assessment { plan: fallback, fallback: true, reply: None }
        }
    }
}
