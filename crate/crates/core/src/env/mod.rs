//! Simulated SoM-indexed mobile GUI environment.

pub mod pack;
pub mod sim;

pub use pack::{
    AppPack, AppSpec, Condition, Element, ElementKind, PackError, RiskTier, Rule, Screen, ScreenSpec,
    StateWrite, Success, TaskKind, TaskSpec, DEFAULT_MAX_STEPS,
};
pub use sim::{
    apply, evaluate, evaluate_with, fail_step, render_screen_text, reset, reset_by_id, EnvError,
    EpisodeState, Judge, Status, StepOutcome, BUDGET_REASON,
};
