//! Segmentation of a model turn into its three template blocks.
//!
//! A turn is expected to contain, in order, a reasoning block, a state
//! assessment block and a called-function block, each delimited by exact,
//! case-sensitive tags. Parsing is total: malformed output is reported
//! through [`ConformityReport`] rather than as an error, because it feeds the
//! format reward.
//!
//! Segmentation rules:
//! - The earliest opening tag starts a candidate block; it is well formed if
//!   its closing tag follows. Everything between the tags is the content,
//!   including any nested tags.
//! - An opening tag without a closing tag is plain text outside all blocks.
//! - Only the first well-formed occurrence of each block counts. Later
//!   duplicates, tags included, are outside text.

use serde::{Deserialize, Serialize};

use crate::templates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Reasoning,
    StateAssessment,
    CalledFunction,
}

impl BlockKind {
    pub const ALL: [BlockKind; 3] =
        [BlockKind::Reasoning, BlockKind::StateAssessment, BlockKind::CalledFunction];

    pub fn tag(self) -> &'static str {
        match self {
            BlockKind::Reasoning => "REASONING",
            BlockKind::StateAssessment => "STATE_ASSESSMENT",
            BlockKind::CalledFunction => "CALLED_FUNCTION",
        }
    }

    pub fn open(self) -> String {
        format!("<{}>", self.tag())
    }

    pub fn close(self) -> String {
        format!("</{}>", self.tag())
    }

    fn position(self) -> usize {
        self as usize
    }
}

/// Structured step summary kept in the agent's history.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StateAssessment {
    pub current_state: String,
    pub task_progress: String,
    pub next_required_action: String,
    pub expected_outcome: String,
    pub potential_issues: String,
}

pub const ASSESSMENT_LABELS: [&str; 5] = [
    "Current State",
    "Task Progress",
    "Next Required Action",
    "Expected Outcome",
    "Potential Issues",
];

const UNKNOWN: &str = "unknown";
const FALLBACK_STATE_CHARS: usize = 200;

impl StateAssessment {
    pub fn unknown() -> Self {
        StateAssessment {
            current_state: UNKNOWN.into(),
            task_progress: UNKNOWN.into(),
            next_required_action: UNKNOWN.into(),
            expected_outcome: UNKNOWN.into(),
            potential_issues: UNKNOWN.into(),
        }
    }

    /// Field values in label order.
    pub fn fields(&self) -> [&str; 5] {
        [
            &self.current_state,
            &self.task_progress,
            &self.next_required_action,
            &self.expected_outcome,
            &self.potential_issues,
        ]
    }

    fn field_mut(&mut self, i: usize) -> &mut String {
        match i {
            0 => &mut self.current_state,
            1 => &mut self.task_progress,
            2 => &mut self.next_required_action,
            3 => &mut self.expected_outcome,
            _ => &mut self.potential_issues,
        }
    }

    /// Parses labeled lines. Unlabeled lines are appended to `current_state`.
    pub fn parse(content: &str) -> Self {
        let mut out = StateAssessment::default();
        for line in content.lines() {
            let line = line.trim();
            let line = line.strip_prefix("- ").or_else(|| line.strip_prefix("* ")).unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let labeled = ASSESSMENT_LABELS.iter().enumerate().find_map(|(i, label)| {
                let head = line.get(..label.len())?;
                if !head.eq_ignore_ascii_case(label) {
                    return None;
                }
                line[label.len()..].trim_start().strip_prefix(':').map(|rest| (i, rest.trim()))
            });
            let (slot, value) = labeled.unwrap_or((0, line));
            let field = out.field_mut(slot);
            if !field.is_empty() {
                field.push('\n');
            }
            field.push_str(value);
        }
        out
    }

    /// Renders the five labeled lines.
    pub fn to_block_text(&self) -> String {
        ASSESSMENT_LABELS
            .iter()
            .zip(self.fields())
            .map(|(label, value)| format!("{label}: {value}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Block(BlockKind),
    Outside,
}

/// A contiguous byte range of the raw turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
}

/// A model turn split into template blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub reasoning: String,
    pub assessment: StateAssessment,
    pub call_text: String,
    pub raw: String,
    pub segments: Vec<Segment>,
}

impl AgentTurn {
    /// Concatenates every segment in order; always equals `raw`.
    pub fn reassemble(&self) -> String {
        self.segments.iter().map(|s| &self.raw[s.start..s.end]).collect()
    }

    /// Text lying outside all recognized blocks.
    pub fn outside_text(&self) -> String {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Outside)
            .map(|s| &self.raw[s.start..s.end])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformityReport {
    /// Number of distinct well-formed blocks present.
    pub k: u8,
    /// Non-whitespace characters outside all recognized blocks.
    pub c: usize,
    pub blocks_present: [bool; 3],
    pub out_of_order: bool,
}

impl ConformityReport {
    pub fn has(&self, kind: BlockKind) -> bool {
        self.blocks_present[kind.position()]
    }
}

fn find_open(raw: &str, from: usize) -> Option<(usize, BlockKind)> {
    BlockKind::ALL
        .iter()
        .filter_map(|k| raw[from..].find(&k.open()).map(|p| (from + p, *k)))
        .min_by_key(|(p, _)| *p)
}

fn non_ws(s: &str) -> usize {
    s.chars().filter(|c| !c.is_whitespace()).count()
}

/// Splits a raw turn into blocks and scores its template conformity.
pub fn parse_turn(raw: &str) -> (AgentTurn, ConformityReport) {
    let mut segments: Vec<Segment> = Vec::new();
    let mut contents: [Option<(usize, usize)>; 3] = [None; 3];
    let mut order: Vec<BlockKind> = Vec::new();
    let mut outside_start = 0;
    let mut pos = 0;

    let push_outside = |segments: &mut Vec<Segment>, start: usize, end: usize| {
        if end > start {
            match segments.last_mut() {
                Some(last) if last.kind == SegmentKind::Outside && last.end == start => last.end = end,
                _ => segments.push(Segment { kind: SegmentKind::Outside, start, end }),
            }
        }
    };

    while let Some((open_at, kind)) = find_open(raw, pos) {
        let body_start = open_at + kind.open().len();
        let Some(rel_close) = raw[body_start..].find(&kind.close()) else {
            // Unclosed tag: leave it in the outside text and keep scanning.
            pos = body_start;
            continue;
        };
        let body_end = body_start + rel_close;
        let block_end = body_end + kind.close().len();
        if contents[kind.position()].is_some() {
            pos = block_end;
            continue;
        }
        push_outside(&mut segments, outside_start, open_at);
        segments.push(Segment { kind: SegmentKind::Block(kind), start: open_at, end: block_end });
        contents[kind.position()] = Some((body_start, body_end));
        order.push(kind);
        outside_start = block_end;
        pos = block_end;
    }
    push_outside(&mut segments, outside_start, raw.len());

    let body = |kind: BlockKind| contents[kind.position()].map(|(s, e)| &raw[s..e]);
    let c = segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Outside)
        .map(|s| non_ws(&raw[s.start..s.end]))
        .sum();
    let blocks_present = [contents[0].is_some(), contents[1].is_some(), contents[2].is_some()];
    let report = ConformityReport {
        k: blocks_present.iter().filter(|b| **b).count() as u8,
        c,
        blocks_present,
        out_of_order: order.windows(2).any(|w| w[0].position() > w[1].position()),
    };
    let turn = AgentTurn {
        reasoning: body(BlockKind::Reasoning).map(str::trim).unwrap_or_default().to_string(),
        assessment: body(BlockKind::StateAssessment).map(StateAssessment::parse).unwrap_or_default(),
        call_text: body(BlockKind::CalledFunction).map(str::trim).unwrap_or_default().to_string(),
        raw: raw.to_string(),
        segments,
    };
    (turn, report)
}

/// The assessment to append to history for this turn.
pub fn summarize_for_history(turn: &AgentTurn) -> StateAssessment {
    let has_assessment = turn
        .segments
        .iter()
        .any(|s| s.kind == SegmentKind::Block(BlockKind::StateAssessment));
    if has_assessment {
        return turn.assessment.clone();
    }
    let mut fallback = StateAssessment::unknown();
    let head: String = turn.reasoning.chars().take(FALLBACK_STATE_CHARS).collect();
    if !head.is_empty() {
        fallback.current_state = head;
    }
    fallback
}

/// Builds a fully conforming turn around the given parts.
pub fn render_turn(reasoning: &str, assessment: &StateAssessment, call: &str) -> String {
    format!(
        "<REASONING>\n{reasoning}\n</REASONING>\n<STATE_ASSESSMENT>\n{}\n</STATE_ASSESSMENT>\n<CALLED_FUNCTION>\n{call}\n</CALLED_FUNCTION>",
        assessment.to_block_text()
    )
}

/// The output-format section every agent template embeds.
pub fn output_template() -> &'static str {
    templates::OUTPUT_FORMAT
}
