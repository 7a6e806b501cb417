//! Model invocation.
//!
//! Every tier is reached through [`ModelBackend`]. Backends hold no episode
//! state: everything a call needs travels in the [`ModelRequest`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::AppPack;

pub mod prompt;
pub mod remote;
pub mod scripted;

pub use prompt::{assemble_prompt, assemble_prompt_named, ChatMessage, PromptError, Role, TemplateId};
pub use remote::{RemoteBackend, RemoteConfig};
pub use scripted::{Exhaustion, GoldPolicy, MetaReplies, RandomPolicy, Script, ScriptedBackend, StallPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Device,
    Cloud,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Device => "device",
            Tier::Cloud => "cloud",
        }
    }
}

/// What the caller wants from the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// Produce the next agent turn.
    Act,
    /// Produce a monitoring plan.
    Assess,
    /// Produce a CLOUD/DEVICE verdict.
    Switch,
}

/// Deterministic facts about the call site. Scripted backends route on
/// these; remote backends ignore them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingKey {
    pub task_id: String,
    pub screen_id: String,
    /// Episode step about to be taken.
    pub step: usize,
    /// How many times this backend has been asked to act in this episode.
    pub turn: usize,
    /// Canonical texts of the actions executed so far.
    pub executed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRequest {
    pub purpose: Purpose,
    pub messages: Vec<ChatMessage>,
    pub key: RoutingKey,
}

/// Request and response bodies of a remote call, minus credentials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: serde_json::Value,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub text: String,
    pub retries: u32,
    pub exchange: Option<Exchange>,
}

impl Reply {
    pub fn text(text: impl Into<String>) -> Self {
        Reply { text: text.into(), retries: 0, exchange: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempts: {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("authentication failure: {0}")]
    Auth(String),
    #[error("backend {backend} has no reply for turn {turn}")]
    ScriptExhausted { backend: String, turn: usize },
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("backend {backend} does not answer {purpose:?} requests")]
    Unsupported { backend: String, purpose: Purpose },
}

pub trait ModelBackend: Send + Sync {
    fn name(&self) -> &str;
    fn tier(&self) -> Tier;
    fn invoke(&self, request: &ModelRequest) -> Result<Reply, BackendError>;
}

pub type SharedBackend = Arc<dyn ModelBackend>;

/// Declarative backend binding, as written in suite configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    /// Follows each task's reference solution.
    Gold {
        #[serde(default)]
        meta: MetaReplies,
    },
    /// Follows half of the reference solution, then taps an inert element forever.
    Stall {
        #[serde(default)]
        meta: MetaReplies,
    },
    /// Taps an inert element forever.
    Loop {
        #[serde(default)]
        meta: MetaReplies,
    },
    /// Seeded random actions that never finish.
    Random {
        seed: u64,
        #[serde(default)]
        meta: MetaReplies,
    },
    Scripted {
        script: Script,
        #[serde(default)]
        exhaustion: Exhaustion,
        #[serde(default)]
        meta: MetaReplies,
    },
    Remote(RemoteConfig),
}

impl BackendSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            BackendSpec::Gold { .. } => "gold",
            BackendSpec::Stall { .. } => "stall",
            BackendSpec::Loop { .. } => "loop",
            BackendSpec::Random { .. } => "random",
            BackendSpec::Scripted { .. } => "scripted",
            BackendSpec::Remote(_) => "remote",
        }
    }

    /// `run_seed` is mixed into the seed of random backends.
    pub fn build(&self, name: &str, tier: Tier, pack: &AppPack, run_seed: u64) -> SharedBackend {
        let gold = || -> BTreeMap<String, Vec<String>> {
            pack.tasks.iter().map(|t| (t.id.clone(), t.gold.clone())).collect()
        };
        match self {
            BackendSpec::Gold { meta } => Arc::new(GoldPolicy::new(name, tier, gold()).with_meta(meta.clone())),
            BackendSpec::Stall { meta } => Arc::new(StallPolicy::half(name, tier, gold()).with_meta(meta.clone())),
            BackendSpec::Loop { meta } => Arc::new(StallPolicy::pure_loop(name, tier).with_meta(meta.clone())),
            BackendSpec::Random { seed, meta } => {
                Arc::new(RandomPolicy::new(name, tier, seed.wrapping_add(run_seed)).with_meta(meta.clone()))
            }
            BackendSpec::Scripted { script, exhaustion, meta } => Arc::new(
                ScriptedBackend::new(name, tier, script.clone(), *exhaustion).with_meta(meta.clone()),
            ),
            BackendSpec::Remote(cfg) => Arc::new(RemoteBackend::new(name, tier, cfg.clone())),
        }
    }
}
