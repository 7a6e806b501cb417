//! App-pack file format.
//!
//! A pack is a JSON document holding apps, screens, transition rules and
//! tasks. Packs are immutable once loaded and are shared read-only between
//! episodes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::actions::{parse_action, Action};
use crate::similarity::SimilarityKind;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAX_STEPS: usize = 25;
pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// The pack bundled with the runtime.
pub const BUNDLED_PACK: &str = include_str!("../../resources/packs/bundled.json");

#[derive(Debug, Error)]
pub enum PackError {
    #[error("reading pack: {0}")]
    Io(#[from] std::io::Error),
    #[error("decoding pack: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported pack schema version {0} (expected {SCHEMA_VERSION})")]
    UnsupportedSchema(u32),
    #[error("invalid pack: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Button,
    Input,
    Toggle,
    ListItem,
    Link,
    Text,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Button => "button",
            ElementKind::Input => "input",
            ElementKind::Toggle => "toggle",
            ElementKind::ListItem => "list_item",
            ElementKind::Link => "link",
            ElementKind::Text => "text",
        }
    }
}

/// One SoM-indexed element. Toggles carry `"on"`/`"off"` in `state`;
/// inputs carry their text content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub index: u32,
    pub kind: ElementKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub focused: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screen {
    pub id: String,
    pub app: String,
    pub elements: Vec<Element>,
    #[serde(default)]
    pub scroll_position: i64,
}

impl Screen {
    pub fn element(&self, index: u32) -> Option<&Element> {
        self.elements.iter().find(|e| e.index == index)
    }

    pub fn element_mut(&mut self, index: u32) -> Option<&mut Element> {
        self.elements.iter_mut().find(|e| e.index == index)
    }

    pub fn focused_input(&self) -> Option<&Element> {
        self.elements.iter().find(|e| e.kind == ElementKind::Input && e.focused)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenSpec {
    #[serde(flatten)]
    pub screen: Screen,
    /// Target of `back()`; absent means back is a no-op.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back: Option<String>,
    /// Scroll range `0..=max_scroll`; zero means not scrollable.
    #[serde(default)]
    pub max_scroll: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppSpec {
    pub id: String,
    pub initial_screen: String,
    pub home_screen: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateWrite {
    /// Defaults to the screen the rule fires on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<String>,
    pub index: u32,
    pub state: String,
}

/// Transition keyed by `(screen, canonical action text)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub screen: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goto: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub set: Vec<StateWrite>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskTier {
    Critical,
    High,
    Medium,
    Low,
}

impl RiskTier {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskTier::Critical => "critical",
            RiskTier::High => "high",
            RiskTier::Medium => "medium",
            RiskTier::Low => "low",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Operation,
    Query,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    Element { screen: String, index: u32, state: String },
    CurrentScreen { screen: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Success {
    Operation {
        conditions: Vec<Condition>,
    },
    Query {
        answer: String,
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default)]
        similarity: SimilarityKind,
    },
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub instruction: String,
    pub app: String,
    pub success: Success,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    pub risk_tier: RiskTier,
    /// Reference solution as canonical call texts, ending in `finish`.
    #[serde(default)]
    pub gold: Vec<String>,
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self.success {
            Success::Operation { .. } => TaskKind::Operation,
            Success::Query { .. } => TaskKind::Query,
        }
    }

    pub fn gold_actions(&self) -> Result<Vec<Action>, PackError> {
        self.gold
            .iter()
            .map(|g| {
                parse_action(g)
                    .map_err(|e| PackError::Invalid(format!("task {}: gold {g:?}: {e}", self.id)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppPack {
    pub schema_version: u32,
    pub id: String,
    pub version: String,
    pub apps: Vec<AppSpec>,
    pub screens: Vec<ScreenSpec>,
    #[serde(default)]
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

impl AppPack {
    pub fn from_json(text: &str) -> Result<Self, PackError> {
        let pack: AppPack = serde_json::from_str(text)?;
        pack.validate()?;
        Ok(pack)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PackError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_PACK).expect("bundled pack is valid")
    }

    /// Hex SHA-256 of the pack's canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("pack serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn app(&self, id: &str) -> Option<&AppSpec> {
        self.apps.iter().find(|a| a.id == id)
    }

    pub fn screen(&self, id: &str) -> Option<&ScreenSpec> {
        self.screens.iter().find(|s| s.screen.id == id)
    }

    pub fn task(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn rule(&self, screen: &str, action: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.screen == screen && r.action == action)
    }

    pub fn validate(&self) -> Result<(), PackError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(PackError::UnsupportedSchema(self.schema_version));
        }
        let bad = |msg: String| Err(PackError::Invalid(msg));

        let mut app_ids = BTreeSet::new();
        for app in &self.apps {
            if !app_ids.insert(app.id.as_str()) {
                return bad(format!("duplicate app {}", app.id));
            }
        }

        let mut screens: BTreeMap<&str, &ScreenSpec> = BTreeMap::new();
        for spec in &self.screens {
            let s = &spec.screen;
            if screens.insert(s.id.as_str(), spec).is_some() {
                return bad(format!("duplicate screen {}", s.id));
            }
            if !app_ids.contains(s.app.as_str()) {
                return bad(format!("screen {} references unknown app {}", s.id, s.app));
            }
            for (i, e) in s.elements.iter().enumerate() {
                if e.index as usize != i + 1 {
                    return bad(format!("screen {}: indices must be contiguous from 1", s.id));
                }
                match e.kind {
                    ElementKind::Toggle => {
                        if !matches!(e.state.as_deref(), Some("on") | Some("off")) {
                            return bad(format!("screen {}: toggle {} needs on/off", s.id, e.index));
                        }
                    }
                    ElementKind::Input => {}
                    _ if e.state.is_some() || e.focused => {
                        return bad(format!(
                            "screen {}: element {} of kind {} cannot hold state",
                            s.id,
                            e.index,
                            e.kind.as_str()
                        ));
                    }
                    _ => {}
                }
            }
            if spec.max_scroll < 0 || s.scroll_position < 0 || s.scroll_position > spec.max_scroll {
                return bad(format!("screen {}: scroll out of range", s.id));
            }
        }
        let screen_in_app = |id: &str, app: &str| screens.get(id).is_some_and(|s| s.screen.app == app);
        for spec in &self.screens {
            if let Some(back) = &spec.back {
                if !screen_in_app(back, &spec.screen.app) {
                    return bad(format!("screen {}: back target {back} unknown", spec.screen.id));
                }
            }
        }
        for app in &self.apps {
            for s in [&app.initial_screen, &app.home_screen] {
                if !screen_in_app(s, &app.id) {
                    return bad(format!("app {}: screen {s} unknown", app.id));
                }
            }
        }

        let mut keys = BTreeSet::new();
        for rule in &self.rules {
            let Some(from) = screens.get(rule.screen.as_str()) else {
                return bad(format!("rule on unknown screen {}", rule.screen));
            };
            let action = parse_action(&rule.action)
                .map_err(|e| PackError::Invalid(format!("rule {:?}: {e}", rule.action)))?;
            if action.render() != rule.action {
                return bad(format!("rule action {:?} is not canonical", rule.action));
            }
            if !keys.insert((rule.screen.as_str(), rule.action.as_str())) {
                return bad(format!("duplicate rule ({}, {})", rule.screen, rule.action));
            }
            if let Some(index) = action.index() {
                if from.screen.element(index).is_none() {
                    return bad(format!("rule {} on {}: no element {index}", rule.action, rule.screen));
                }
            }
            if let Some(to) = &rule.goto {
                if !screen_in_app(to, &from.screen.app) {
                    return bad(format!("rule {} on {}: goto {to} unknown", rule.action, rule.screen));
                }
            }
            for w in &rule.set {
                let target = w.screen.as_deref().unwrap_or(&rule.screen);
                let ok = screens
                    .get(target)
                    .and_then(|s| s.screen.element(w.index))
                    .is_some_and(|e| matches!(e.kind, ElementKind::Toggle | ElementKind::Input));
                if !ok {
                    return bad(format!("rule {} on {}: bad write target", rule.action, rule.screen));
                }
            }
        }

        let mut task_ids = BTreeSet::new();
        for task in &self.tasks {
            if !task_ids.insert(task.id.as_str()) {
                return bad(format!("duplicate task {}", task.id));
            }
            if !app_ids.contains(task.app.as_str()) {
                return bad(format!("task {} references unknown app {}", task.id, task.app));
            }
            if task.max_steps == 0 {
                return bad(format!("task {}: max_steps must be positive", task.id));
            }
            match &task.success {
                Success::Operation { conditions } => {
                    if conditions.is_empty() {
                        return bad(format!("task {}: no success conditions", task.id));
                    }
                    for c in conditions {
                        let screen = match c {
                            Condition::Element { screen, .. } | Condition::CurrentScreen { screen } => screen,
                        };
                        if !screen_in_app(screen, &task.app) {
                            return bad(format!("task {}: condition on unknown screen {screen}", task.id));
                        }
                    }
                }
                Success::Query { threshold, .. } => {
                    if !(0.0..=1.0).contains(threshold) {
                        return bad(format!("task {}: threshold outside [0, 1]", task.id));
                    }
                }
            }
            task.gold_actions()?;
        }
        Ok(())
    }
}
