//! Compound accuracy + format reward.

use serde::{Deserialize, Serialize};

use super::GrpoError;
use crate::actions::{parse_action, Action};
use crate::protocol::{AgentTurn, ConformityReport};
use crate::similarity::SimilarityKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub r_acc_weight: f64,
    pub r_fmt_weight: f64,
    pub lambda: f64,
    /// Per extraneous non-whitespace character; strictly inside (0, 1).
    pub gamma_fmt: f64,
    pub similarity: SimilarityKind,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            r_acc_weight: 1.0,
            r_fmt_weight: 0.5,
            lambda: 0.7,
            gamma_fmt: 0.99,
            similarity: SimilarityKind::TokenF1,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: &str| Err(GrpoError::InvalidConfig(m.to_string()));
        if !(self.gamma_fmt > 0.0 && self.gamma_fmt < 1.0) {
            return bad("gamma_fmt must lie strictly inside (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.r_acc_weight >= 0.0 && self.r_fmt_weight >= 0.0) {
            return bad("reward weights must be non-negative");
        }
        Ok(())
    }
}

/// Ground truth for one prediction: the expected action of an operation
/// step, or the gold answer of a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    Operation(Action),
    Query(String),
}

pub fn accuracy_reward(pred: &AgentTurn, gt: &GroundTruth, cfg: &RewardConfig) -> f64 {
    let Ok(action) = parse_action(&pred.call_text) else {
        return 0.0;
    };
    let hit = match (gt, &action) {
        (GroundTruth::Operation(expected), _) => &action == expected,
        (GroundTruth::Query(gold), Action::Finish { message }) => {
            cfg.similarity.score(message.as_deref().unwrap_or(""), gold) >= cfg.lambda
        }
        (GroundTruth::Query(_), _) => false,
    };
    if hit {
        cfg.r_acc_weight
    } else {
        0.0
    }
}

pub fn format_reward(report: &ConformityReport, cfg: &RewardConfig) -> f64 {
    cfg.r_fmt_weight * (f64::from(report.k) / 3.0) * cfg.gamma_fmt.powf(report.c as f64)
}

pub fn total_reward(pred: &AgentTurn, report: &ConformityReport, gt: &GroundTruth, cfg: &RewardConfig) -> f64 {
    accuracy_reward(pred, gt, cfg) + format_reward(report, cfg)
}
