//! Device-cloud collaborative GUI agent runtime.
//!
//! A small on-device model drives a simulated phone through a textual
//! reasoning loop; an adaptive monitor hands the episode to a larger cloud
//! model when the device model stalls. The [`grpo`] module holds the reward
//! and policy-optimization math used to train the device tier, exercised on
//! toy policies.

pub mod actions;
pub mod backends;
pub mod env;
pub mod grpo;
pub mod memory;
pub mod orchestrator;
pub mod protocol;
pub mod similarity;
pub mod telemetry;
pub mod templates;

pub use actions::{parse_action, render_action, validate_action, Action};
pub use protocol::{parse_turn, AgentTurn, ConformityReport, StateAssessment};
