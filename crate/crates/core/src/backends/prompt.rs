//! Prompt assembly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::templates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    OnDevice,
    Cloud,
    Assessor,
    Switcher,
}

impl TemplateId {
    pub const ALL: [TemplateId; 4] = [TemplateId::OnDevice, TemplateId::Cloud, TemplateId::Assessor, TemplateId::Switcher];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::OnDevice => "on_device",
            TemplateId::Cloud => "cloud",
            TemplateId::Assessor => "assessor",
            TemplateId::Switcher => "switcher",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::OnDevice => templates::ON_DEVICE,
            TemplateId::Cloud => templates::CLOUD,
            TemplateId::Assessor => templates::ASSESSOR,
            TemplateId::Switcher => templates::SWITCHER,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
}

impl FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

pub const TASK_HEADING: &str = "## Task";
pub const SCREEN_HEADING: &str = "## Current Screen";
pub const HISTORY_HEADING: &str = "## History";

/// System message with the template verbatim, then one user message with
/// the task, screen listing and history under fixed headings.
pub fn assemble_prompt(task: &str, screen_text: &str, history_text: &str, bundle: TemplateId) -> Vec<ChatMessage> {
    vec![
        ChatMessage { role: Role::System, content: bundle.text().to_string() },
        ChatMessage {
            role: Role::User,
            content: format!(
                "{TASK_HEADING}\n{task}\n\n{SCREEN_HEADING}\n{screen_text}\n\n{HISTORY_HEADING}\n{history_text}\n"
            ),
        },
    ]
}

pub fn assemble_prompt_named(
    task: &str,
    screen_text: &str,
    history_text: &str,
    bundle: &str,
) -> Result<Vec<ChatMessage>, PromptError> {
    Ok(assemble_prompt(task, screen_text, history_text, bundle.parse()?))
}
