//! End-to-end optimization loop on bundled toy tasks.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{grpo_step, Group, GrpoConfig, StepDiagnostics};
use super::policy::PolicyParams;
use super::reward::{total_reward, GroundTruth, RewardConfig};
use super::GrpoError;
use crate::actions::{parse_action, Action};
use crate::env::{apply, reset_by_id, AppPack};
use crate::protocol::{parse_turn, render_turn, StateAssessment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyTaskId {
    /// Two arms; arm 0 pays 1, arm 1 pays 0.
    Bandit,
    /// Three steps of a settings task; outputs are call/format pairs scored
    /// with the compound reward.
    Gui,
}

impl std::str::FromStr for ToyTaskId {
    type Err = GrpoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bandit" => Ok(ToyTaskId::Bandit),
            "gui" => Ok(ToyTaskId::Gui),
            other => Err(GrpoError::UnknownTask(other.to_string())),
        }
    }
}

pub const GUI_TASK: &str = "settings_wifi_on";
pub const GUI_CALLS: [&str; 5] = ["tap(3)", "tap(4)", "tap(5)", "back()", "finish()"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatVariant {
    Full,
    NoAssessment,
    TrailingChatter,
}

impl FormatVariant {
    pub const ALL: [FormatVariant; 3] = [FormatVariant::Full, FormatVariant::NoAssessment, FormatVariant::TrailingChatter];

    pub fn render(self, call: &str) -> String {
        let full = render_turn("Pick the next step.", &StateAssessment::unknown(), call);
        match self {
            FormatVariant::Full => full,
            FormatVariant::NoAssessment => format!("<REASONING>\nPick the next step.\n</REASONING>\n<CALLED_FUNCTION>\n{call}\n</CALLED_FUNCTION>"),
            FormatVariant::TrailingChatter => format!("{full}\nOK THANKS"),
        }
    }
}

/// A fixed table of contexts, candidate outputs and their rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTask {
    pub id: ToyTaskId,
    /// Raw output text of each action-vocabulary entry.
    pub outputs: Vec<String>,
    /// `rewards[context][output]`.
    pub rewards: Vec<Vec<f64>>,
}

impl ToyTask {
    pub fn bandit() -> Self {
        ToyTask { id: ToyTaskId::Bandit, outputs: vec!["arm A".into(), "arm B".into()], rewards: vec![vec![1.0, 0.0]] }
    }

    /// Contexts are the screens along the reference path of [`GUI_TASK`].
    pub fn gui(pack: &AppPack, reward: &RewardConfig) -> Result<Self, GrpoError> {
        let task = pack.task(GUI_TASK).ok_or_else(|| GrpoError::UnknownTask(GUI_TASK.into()))?;
        let gold = task.gold_actions().map_err(|e| GrpoError::InvalidConfig(e.to_string()))?;
        let mut st = reset_by_id(pack, GUI_TASK).map_err(|e| GrpoError::InvalidConfig(e.to_string()))?;
        let mut outputs = Vec::new();
        for call in GUI_CALLS {
            for v in FormatVariant::ALL {
                outputs.push(v.render(call));
            }
        }
        let mut rewards = Vec::new();
        for expected in &gold {
            let gt = GroundTruth::Operation(expected.clone());
            rewards.push(
                outputs
                    .iter()
                    .map(|o| {
                        let (turn, report) = parse_turn(o);
                        total_reward(&turn, &report, &gt, reward)
                    })
                    .collect(),
            );
            apply(pack, &mut st, expected);
        }
        Ok(ToyTask { id: ToyTaskId::Gui, outputs, rewards })
    }

    pub fn load(id: ToyTaskId, reward: &RewardConfig) -> Result<Self, GrpoError> {
        match id {
            ToyTaskId::Bandit => Ok(Self::bandit()),
            ToyTaskId::Gui => Self::gui(&AppPack::bundled(), reward),
        }
    }

    pub fn contexts(&self) -> usize {
        self.rewards.len()
    }

    /// Index of the highest-reward output in each context.
    pub fn best(&self) -> Vec<usize> {
        self.rewards
            .iter()
            .map(|row| {
                (0..row.len())
                    .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                    .expect("non-empty vocabulary")
            })
            .collect()
    }

    /// Mean over contexts of the probability placed on the best output.
    pub fn target_prob(&self, policy: &PolicyParams) -> f64 {
        let best = self.best();
        best.iter().enumerate().map(|(c, &b)| policy.prob(c, b)).sum::<f64>() / best.len() as f64
    }

    pub fn parsed_output(&self, index: usize) -> Option<Action> {
        parse_action(&parse_turn(&self.outputs[index]).0.call_text).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub target_prob: f64,
    #[serde(flatten)]
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    pub curve: Vec<CurvePoint>,
    pub initial: PolicyParams,
    pub policy: PolicyParams,
}

impl TrainOutput {
    pub fn final_target_prob(&self, task: &ToyTask) -> f64 {
        task.target_prob(&self.policy)
    }

    /// First iteration after which the target probability reached `level`.
    pub fn iterations_to(&self, level: f64) -> Option<usize> {
        self.curve.iter().find(|p| p.target_prob >= level).map(|p| p.iteration + 1)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("iteration\ttarget_prob\tmean_reward\tmean_abs_advantage\tkl\tgrad_norm\tloss\tdegenerate_groups\n");
        for p in &self.curve {
            let d = &p.diagnostics;
            let _ = writeln!(
                s,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6e}\t{:.6e}\t{:.6e}\t{}",
                p.iteration, p.target_prob, d.mean_reward, d.mean_abs_advantage, d.kl, d.grad_norm, d.loss, d.degenerate_groups
            );
        }
        s
    }
}

/// The optimization loop: sample groups from the old policy for every
/// context, take one step, then refresh the old policy. The reference policy
/// is the initial one.
pub fn train_toy(task: &ToyTask, cfg: &GrpoConfig) -> Result<TrainOutput, GrpoError> {
    cfg.validate()?;
    let initial = PolicyParams::zeros(task.contexts(), task.outputs.len());
    let reference = initial.clone();
    let mut policy = initial.clone();
    let mut old = policy.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut curve = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let groups: Vec<Group> = (0..task.contexts())
            .map(|c| {
                let outputs: Vec<usize> = (0..cfg.group_size).map(|_| old.sample(c, &mut rng)).collect();
                let rewards = outputs.iter().map(|&o| task.rewards[c][o]).collect();
                Group::new(c, outputs, rewards, &old, &reference)
            })
            .collect();
        let (next, diagnostics) = grpo_step(&policy, &groups, cfg)?;
        policy = next;
        old = policy.clone();
        curve.push(CurvePoint { iteration, target_prob: task.target_prob(&policy), diagnostics });
    }
    Ok(TrainOutput { curve, initial, policy })
}

/// Training run file: optimizer settings, reward weights and the toy task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: ToyTaskId,
    #[serde(default, flatten)]
    pub grpo: GrpoConfig,
    #[serde(default)]
    pub reward: RewardConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, GrpoError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| GrpoError::InvalidConfig(e.to_string()))?;
        cfg.grpo.validate()?;
        cfg.reward.validate()?;
        Ok(cfg)
    }
}
