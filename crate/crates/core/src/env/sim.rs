//! Episode state and the deterministic transition function.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::pack::{AppPack, Condition, ElementKind, Screen, Success, TaskSpec};
use crate::actions::{validate_action, Action, Direction, ValidationError};

pub const BUDGET_REASON: &str = "step budget";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("unknown app {0}")]
    UnknownApp(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Running,
    Finished { message: Option<String> },
    Terminated { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub task_id: String,
    pub app: String,
    pub max_steps: usize,
    pub current: String,
    /// Every screen of the app with its live element states.
    pub screens: BTreeMap<String, Screen>,
    pub t: usize,
    pub status: Status,
}

impl EpisodeState {
    pub fn screen(&self) -> &Screen {
        &self.screens[&self.current]
    }

    pub fn is_over(&self) -> bool {
        self.status != Status::Running
    }

    pub fn finished(&self) -> bool {
        matches!(self.status, Status::Finished { .. })
    }

    pub fn finish_message(&self) -> Option<&str> {
        match &self.status {
            Status::Finished { message } => message.as_deref(),
            _ => None,
        }
    }

    /// Hex SHA-256 over the screen id and all element states.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&(&self.current, &self.screens)).expect("state serializes");
        hex::encode(Sha256::digest(bytes))
    }

    fn tick(&mut self) {
        self.t += 1;
        if self.status == Status::Running && self.t >= self.max_steps {
            self.status = Status::Terminated { reason: BUDGET_REASON.into() };
        }
    }
}

/// What happened to the environment in one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub screen_before: String,
    pub screen_after: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_error: Option<String>,
    pub ineffective: bool,
}

pub fn reset(pack: &AppPack, task: &TaskSpec) -> Result<EpisodeState, EnvError> {
    let app = pack.app(&task.app).ok_or_else(|| EnvError::UnknownApp(task.app.clone()))?;
    let screens = pack
        .screens
        .iter()
        .filter(|s| s.screen.app == app.id)
        .map(|s| (s.screen.id.clone(), s.screen.clone()))
        .collect();
    Ok(EpisodeState {
        task_id: task.id.clone(),
        app: app.id.clone(),
        max_steps: task.max_steps,
        current: app.initial_screen.clone(),
        screens,
        t: 0,
        status: Status::Running,
    })
}

pub fn reset_by_id(pack: &AppPack, task_id: &str) -> Result<EpisodeState, EnvError> {
    let task = pack.task(task_id).ok_or_else(|| EnvError::UnknownTask(task_id.into()))?;
    reset(pack, task)
}

/// Applies one action. Invalid actions leave the state untouched apart from
/// the step counter.
pub fn apply(pack: &AppPack, st: &mut EpisodeState, action: &Action) -> StepOutcome {
    let screen_before = st.current.clone();
    if st.is_over() {
        return StepOutcome {
            screen_after: screen_before.clone(),
            screen_before,
            validation_error: Some("episode already ended".into()),
            ineffective: true,
        };
    }
    if let Err(e) = validate_action(action, st.screen()) {
        st.tick();
        return failed(screen_before, e);
    }
    let before = (st.current.clone(), st.screens.clone());
    if let Action::Finish { message } = action {
        st.status = Status::Finished { message: message.clone() };
        st.t += 1;
        return StepOutcome {
            screen_after: st.current.clone(),
            screen_before,
            validation_error: None,
            ineffective: false,
        };
    }
    transition(pack, st, action);
    let ineffective = before.0 == st.current && before.1 == st.screens;
    st.tick();
    StepOutcome { screen_after: st.current.clone(), screen_before, validation_error: None, ineffective }
}

fn failed(screen: String, e: ValidationError) -> StepOutcome {
    StepOutcome {
        screen_after: screen.clone(),
        screen_before: screen,
        validation_error: Some(e.to_string()),
        ineffective: true,
    }
}

/// Records a step whose model output held no executable action.
pub fn fail_step(st: &mut EpisodeState, reason: &str) -> StepOutcome {
    let screen = st.current.clone();
    if !st.is_over() {
        st.tick();
    }
    StepOutcome {
        screen_after: screen.clone(),
        screen_before: screen,
        validation_error: Some(reason.to_string()),
        ineffective: true,
    }
}

fn transition(pack: &AppPack, st: &mut EpisodeState, action: &Action) {
    let canonical = action.render();
    if let Some(rule) = pack.rule(&st.current, &canonical) {
        for w in &rule.set {
            let target = w.screen.as_deref().unwrap_or(&rule.screen);
            if let Some(e) = st.screens.get_mut(target).and_then(|s| s.element_mut(w.index)) {
                e.state = Some(w.state.clone());
            }
        }
        if let Some(to) = &rule.goto {
            st.current = to.clone();
        }
        return;
    }
    let spec = pack.screen(&st.current).expect("current screen is in the pack");
    let screen = st.screens.get_mut(&st.current).expect("current screen is in the state");
    match action {
        Action::Tap { index } => {
            let kind = screen.element(*index).map(|e| e.kind);
            match kind {
                Some(ElementKind::Toggle) => {
                    let e = screen.element_mut(*index).expect("validated");
                    let on = e.state.as_deref() == Some("on");
                    e.state = Some(if on { "off" } else { "on" }.into());
                }
                Some(ElementKind::Input) => {
                    for e in screen.elements.iter_mut().filter(|e| e.kind == ElementKind::Input) {
                        e.focused = e.index == *index;
                    }
                }
                _ => {}
            }
        }
        Action::Text { input } => {
            if let Some(e) = screen.elements.iter_mut().find(|e| e.kind == ElementKind::Input && e.focused) {
                e.state = Some(input.clone());
            }
        }
        Action::Swipe { direction, distance, .. } if spec.max_scroll > 0 => {
            let delta = match direction {
                Direction::Up => distance.steps(),
                Direction::Down => -distance.steps(),
                Direction::Left | Direction::Right => 0,
            };
            screen.scroll_position = (screen.scroll_position + delta).clamp(0, spec.max_scroll);
        }
        Action::Back => {
            if let Some(back) = &spec.back {
                st.current = back.clone();
            }
        }
        Action::Home => {
            if let Some(app) = pack.app(&st.app) {
                st.current = app.home_screen.clone();
            }
        }
        _ => {}
    }
}

/// SoM listing of a screen, one line per element.
pub fn render_screen_text(screen: &Screen) -> String {
    if screen.elements.is_empty() {
        return "(no interactive elements)".into();
    }
    screen
        .elements
        .iter()
        .map(|e| {
            let mut line = format!("{}. {} '{}'", e.index, e.kind.as_str(), e.label);
            match (e.kind, &e.state) {
                (ElementKind::Input, Some(s)) => line.push_str(&format!(" state='{s}'")),
                (_, Some(s)) => line.push_str(&format!(" state={s}")),
                _ => {}
            }
            if e.kind == ElementKind::Input {
                line.push_str(&format!(" focused={}", e.focused));
            }
            line
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Optional external judge for task completion. None of the shipped
/// configurations enable one.
pub trait Judge: Send + Sync {
    fn judge(&self, task: &TaskSpec, final_state: &EpisodeState) -> Option<bool>;
}

pub fn evaluate(task: &TaskSpec, final_state: &EpisodeState) -> bool {
    evaluate_with(task, final_state, None)
}

/// Like [`evaluate`], deferring to `judge` when it returns a verdict for a
/// finished episode.
pub fn evaluate_with(task: &TaskSpec, final_state: &EpisodeState, judge: Option<&dyn Judge>) -> bool {
    if !final_state.finished() {
        return false;
    }
    if let Some(verdict) = judge.and_then(|j| j.judge(task, final_state)) {
        return verdict;
    }
    match &task.success {
        Success::Operation { conditions } => conditions.iter().all(|c| match c {
            Condition::CurrentScreen { screen } => &final_state.current == screen,
            Condition::Element { screen, index, state } => final_state
                .screens
                .get(screen)
                .and_then(|s| s.element(*index))
                .is_some_and(|e| e.state.as_deref() == Some(state.as_str())),
        }),
        Success::Query { answer, threshold, similarity } => {
            let said = final_state.finish_message().unwrap_or("");
            similarity.score(said, answer) >= *threshold
        }
    }
}
