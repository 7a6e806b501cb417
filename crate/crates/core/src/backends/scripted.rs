//! Deterministic backends for tests, benchmarks and synthetic episodes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, ModelBackend, ModelRequest, Purpose, Reply, RoutingKey, Tier};
use crate::protocol::{render_turn, StateAssessment};

/// Canned answers for assessor and switcher requests.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaReplies {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assess: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<String>,
}

impl MetaReplies {
    fn answer(&self, backend: &str, purpose: Purpose) -> Option<Result<Reply, BackendError>> {
        let canned = match purpose {
            Purpose::Act => return None,
            Purpose::Assess => &self.assess,
            Purpose::Switch => &self.switch,
        };
        Some(match canned {
            Some(text) => Ok(Reply::text(text.clone())),
            None => Err(BackendError::Unsupported { backend: backend.to_string(), purpose }),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exhaustion {
    #[default]
    RepeatLast,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyedTurn {
    pub screen: String,
    pub step: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Script {
    /// Raw turn texts indexed by the backend's own turn count.
    Turns(Vec<String>),
    /// Raw turn texts keyed by `(screen id, step)`.
    Keyed(Vec<KeyedTurn>),
}

/// Replays raw turn texts.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    name: String,
    tier: Tier,
    script: Script,
    exhaustion: Exhaustion,
    meta: MetaReplies,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>, tier: Tier, script: Script, exhaustion: Exhaustion) -> Self {
        ScriptedBackend { name: name.into(), tier, script, exhaustion, meta: MetaReplies::default() }
    }

    pub fn turns<S: Into<String>>(name: impl Into<String>, tier: Tier, turns: impl IntoIterator<Item = S>) -> Self {
        let turns = turns.into_iter().map(Into::into).collect();
        Self::new(name, tier, Script::Turns(turns), Exhaustion::RepeatLast)
    }

    pub fn with_meta(mut self, meta: MetaReplies) -> Self {
        self.meta = meta;
        self
    }

    fn lookup(&self, key: &RoutingKey) -> Option<&str> {
        let repeat = self.exhaustion == Exhaustion::RepeatLast;
        match &self.script {
            Script::Turns(turns) => turns
                .get(key.turn)
                .or_else(|| if repeat { turns.last() } else { None })
                .map(String::as_str),
            Script::Keyed(entries) => entries
                .iter()
                .find(|e| e.screen == key.screen_id && e.step == key.step)
                .or_else(|| if repeat { entries.last() } else { None })
                .map(|e| e.text.as_str()),
        }
    }
}

impl ModelBackend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn tier(&self) -> Tier {
        self.tier
    }

    fn invoke(&self, request: &ModelRequest) -> Result<Reply, BackendError> {
        if let Some(r) = self.meta.answer(&self.name, request.purpose) {
            return r;
        }
        self.lookup(&request.key)
            .map(Reply::text)
            .ok_or_else(|| BackendError::ScriptExhausted { backend: self.name.clone(), turn: request.key.turn })
    }
}

/// Renders a well-formed three-block turn around `call`.
pub fn policy_turn(key: &RoutingKey, call: &str, progress: &str) -> String {
    let assessment = StateAssessment {
        current_state: format!("On screen {}.", key.screen_id),
        task_progress: progress.to_string(),
        next_required_action: format!("Execute {call}."),
        expected_outcome: "The screen reflects the action.".into(),
        potential_issues: "None observed.".into(),
    };
    let reasoning = format!("Step {} of task {}: the next action is {call}.", key.step, key.task_id);
    render_turn(&reasoning, &assessment, call)
}

/// Number of reference actions matched, greedily and in order, by the
/// executed actions.
pub fn matched_prefix(gold: &[String], executed: &[String]) -> usize {
    let mut matched = 0;
    for a in executed {
        if matched < gold.len() && &gold[matched] == a {
            matched += 1;
        }
    }
    matched
}

/// Follows each task's reference solution from wherever the episode is.
#[derive(Debug, Clone)]
pub struct GoldPolicy {
    name: String,
    tier: Tier,
    gold: BTreeMap<String, Vec<String>>,
    meta: MetaReplies,
}

impl GoldPolicy {
    pub fn new(name: impl Into<String>, tier: Tier, gold: BTreeMap<String, Vec<String>>) -> Self {
        GoldPolicy { name: name.into(), tier, gold, meta: MetaReplies::default() }
    }

    pub fn with_meta(mut self, meta: MetaReplies) -> Self {
        self.meta = meta;
        self
    }
}

impl ModelBackend for GoldPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn tier(&self) -> Tier {
        self.tier
    }

    fn invoke(&self, request: &ModelRequest) -> Result<Reply, BackendError> {
        if let Some(r) = self.meta.answer(&self.name, request.purpose) {
            return r;
        }
        let key = &request.key;
        let exhausted = || BackendError::ScriptExhausted { backend: self.name.clone(), turn: key.turn };
        let gold = self.gold.get(&key.task_id).filter(|g| !g.is_empty()).ok_or_else(exhausted)?;
        let done = matched_prefix(gold, &key.executed);
        let call = &gold[done.min(gold.len() - 1)];
        let progress = format!("{done} of {} planned actions done.", gold.len());
        Ok(Reply::text(policy_turn(key, call, &progress)))
    }
}

pub const INERT_CALL: &str = "tap(2)";

/// Executes a prefix of the reference solution, then repeats an inert tap.
#[derive(Debug, Clone)]
pub struct StallPolicy {
    name: String,
    tier: Tier,
    gold: BTreeMap<String, Vec<String>>,
    meta: MetaReplies,
}

impl StallPolicy {
    /// Prefix of `len / 2` reference actions.
    pub fn half(name: impl Into<String>, tier: Tier, gold: BTreeMap<String, Vec<String>>) -> Self {
        StallPolicy { name: name.into(), tier, gold, meta: MetaReplies::default() }
    }

    /// No prefix: the inert tap from the first step.
    pub fn pure_loop(name: impl Into<String>, tier: Tier) -> Self {
        Self::half(name, tier, BTreeMap::new())
    }

    pub fn with_meta(mut self, meta: MetaReplies) -> Self {
        self.meta = meta;
        self
    }

    pub fn prefix_len(gold_len: usize) -> usize {
        gold_len / 2
    }
}

impl ModelBackend for StallPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn tier(&self) -> Tier {
        self.tier
    }

    fn invoke(&self, request: &ModelRequest) -> Result<Reply, BackendError> {
        if let Some(r) = self.meta.answer(&self.name, request.purpose) {
            return r;
        }
        let key = &request.key;
        let gold = self.gold.get(&key.task_id).map(Vec::as_slice).unwrap_or(&[]);
        let p = Self::prefix_len(gold.len());
        let step = key.executed.len();
        let call = if step < p { gold[step].as_str() } else { INERT_CALL };
        Ok(Reply::text(policy_turn(key, call, "Working on it.")))
    }
}

const RANDOM_CALLS: [&str; 10] = [
    "tap(1)",
    "tap(2)",
    "tap(3)",
    "tap(4)",
    "tap(5)",
    "back()",
    "home()",
    "wait(1)",
    "swipe(3, \"up\", \"short\")",
    "long_press(3)",
];

/// Seeded random agent that never finishes. Every reply is a pure function
/// of the seed and the routing key.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    name: String,
    tier: Tier,
    seed: u64,
    meta: MetaReplies,
}

impl RandomPolicy {
    pub fn new(name: impl Into<String>, tier: Tier, seed: u64) -> Self {
        RandomPolicy { name: name.into(), tier, seed, meta: MetaReplies::default() }
    }

    pub fn with_meta(mut self, meta: MetaReplies) -> Self {
        self.meta = meta;
        self
    }

    fn rng(&self, key: &RoutingKey) -> ChaCha8Rng {
        let digest = Sha256::digest(format!("{}|{}|{}|{}", self.seed, key.task_id, key.step, key.screen_id));
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }
}

impl ModelBackend for RandomPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn tier(&self) -> Tier {
        self.tier
    }

    fn invoke(&self, request: &ModelRequest) -> Result<Reply, BackendError> {
        if let Some(r) = self.meta.answer(&self.name, request.purpose) {
            return r;
        }
        let key = &request.key;
        let mut rng = self.rng(key);
        let call = match key.executed.last() {
            Some(last) if rng.random_bool(0.35) => last.clone(),
            _ => RANDOM_CALLS[rng.random_range(0..RANDOM_CALLS.len())].to_string(),
        };
        let roll: f64 = rng.random();
        let text = if roll < 0.05 {
            "<REASONING>unsure</REASONING>\n<CALLED_FUNCTION>tap(</CALLED_FUNCTION>".to_string()
        } else if roll < 0.20 {
            format!("<REASONING>Trying {call}.</REASONING>\n<CALLED_FUNCTION>{call}</CALLED_FUNCTION>")
        } else {
            policy_turn(key, &call, "Exploring.")
        };
        Ok(Reply::text(text))
    }
}
