//! Textual step memory.
//!
//! The history is an append-only list of per-step assessments, each paired
//! with the canonical text of the action executed at that step. Only the
//! most recent `window` entries are ever rendered into a prompt, so prompt
//! size does not grow with episode length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{StateAssessment, ASSESSMENT_LABELS};

pub const DEFAULT_WINDOW: usize = 16;
pub const MAX_WINDOW: usize = 64;
pub const EMPTY_HISTORY: &str = "No history yet.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("history window must be in 1..={MAX_WINDOW}, got {0}")]
pub struct WindowOutOfRange(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub assessment: StateAssessment,
    /// Canonical call text, or the raw call text when it did not parse.
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    entries: Vec<HistoryEntry>,
    window: usize,
}

impl Default for History {
    fn default() -> Self {
        History { entries: Vec::new(), window: DEFAULT_WINDOW }
    }
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_window(window: usize) -> Result<Self, WindowOutOfRange> {
        if !(1..=MAX_WINDOW).contains(&window) {
            return Err(WindowOutOfRange(window));
        }
        Ok(History { entries: Vec::new(), window })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn last(&self) -> Option<&HistoryEntry> {
        self.entries.last()
    }

    /// Appends the entry for the next step and returns its step number.
    pub fn append(&mut self, assessment: StateAssessment, action: impl Into<String>) -> usize {
        let step = self.entries.len();
        self.entries.push(HistoryEntry { step, assessment, action: action.into() });
        step
    }

    /// Functional form of [`History::append`].
    pub fn appended(mut self, assessment: StateAssessment, action: impl Into<String>) -> Self {
        self.append(assessment, action);
        self
    }

    /// The entries that fall inside the rendering window.
    pub fn visible(&self) -> &[HistoryEntry] {
        let start = self.entries.len().saturating_sub(self.window);
        &self.entries[start..]
    }

    pub fn render(&self) -> String {
        render_history(self)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One line per visible entry, oldest first.
pub fn render_history(history: &History) -> String {
    let visible = history.visible();
    if visible.is_empty() {
        return EMPTY_HISTORY.to_string();
    }
    visible
        .iter()
        .map(|e| {
            let fields = ASSESSMENT_LABELS
                .iter()
                .zip(e.assessment.fields())
                .map(|(label, value)| format!("{label}: {}", one_line(value)))
                .collect::<Vec<_>>()
                .join("; ");
            format!("Step {}: {} | Action: {}", e.step, fields, one_line(&e.action))
        })
        .collect::<Vec<_>>()
        .join("\n")
}
