//! Trace replay against an app pack.

use serde::{Deserialize, Serialize};

use super::trace::EpisodeTrace;
use crate::actions::parse_action;
use crate::env::{apply, evaluate, fail_step, reset, AppPack};
use crate::protocol::parse_turn;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Match,
    /// `step` is absent for divergences outside the step sequence.
    Divergence { step: Option<usize>, reason: String },
}

impl Verdict {
    pub fn is_match(&self) -> bool {
        *self == Verdict::Match
    }

    fn at(step: usize, reason: impl Into<String>) -> Self {
        Verdict::Divergence { step: Some(step), reason: reason.into() }
    }

    fn global(reason: impl Into<String>) -> Self {
        Verdict::Divergence { step: None, reason: reason.into() }
    }
}

/// Re-applies the recorded actions and reports the first divergence.
pub fn replay(trace: &EpisodeTrace, pack: &AppPack) -> Verdict {
    let hash = pack.hash();
    if trace.header.pack_hash != hash {
        return Verdict::global(format!("pack hash mismatch: trace {} vs pack {hash}", trace.header.pack_hash));
    }
    let Some(task) = pack.task(&trace.header.task_id) else {
        return Verdict::global(format!("task {} not in pack", trace.header.task_id));
    };
    let Ok(mut st) = reset(pack, task) else {
        return Verdict::global(format!("task {} cannot be reset", task.id));
    };
    for (i, e) in trace.events.iter().enumerate() {
        if e.t != i {
            return Verdict::at(i, format!("event numbered {}", e.t));
        }
        let call = parse_turn(&e.raw).0.call_text;
        let reparsed = parse_action(&call);
        let expected = match &reparsed {
            Ok(a) => a.render(),
            Err(_) => call.trim().to_string(),
        };
        if expected != e.action || reparsed.is_ok() != e.parsed {
            return Verdict::at(i, format!("action {:?} does not match model output {:?}", e.action, expected));
        }
        if st.current != e.screen_before {
            return Verdict::at(i, format!("screen before is {}, trace says {}", st.current, e.screen_before));
        }
        let outcome = match parse_action(&e.action) {
            Ok(a) if e.parsed => apply(pack, &mut st, &a),
            _ => fail_step(&mut st, "unparseable call"),
        };
        if outcome.screen_after != e.screen_after {
            return Verdict::at(i, format!("screen after is {}, trace says {}", outcome.screen_after, e.screen_after));
        }
        if outcome.ineffective != e.ineffective {
            return Verdict::at(i, "ineffective flag differs");
        }
        if st.digest() != e.state_digest {
            return Verdict::at(i, "state digest differs");
        }
    }
    let r = &trace.result;
    if r.result.total_steps != trace.events.len() {
        return Verdict::global("result step count differs from events");
    }
    // A backend failure ends an episode without an environment transition.
    let status_ok = st.status == r.status || (!st.is_over() && r.result.termination.starts_with("backend failure"));
    if !status_ok {
        return Verdict::global(format!("final status {:?}, trace says {:?}", st.status, r.status));
    }
    if st.digest() != r.final_digest {
        return Verdict::global("final state digest differs");
    }
    let success = evaluate(task, &st) && st.status == r.status;
    if success != r.result.success {
        return Verdict::global(format!("success {success}, trace says {}", r.result.success));
    }
    Verdict::Match
}
