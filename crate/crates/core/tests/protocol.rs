mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tandem_core::protocol::{render_turn, SegmentKind, StateAssessment};
use tandem_core::{parse_action, parse_turn, render_action};

#[test]
fn corpus_scores_match_hand_counts() {
    let corpus = common::turn_corpus();
    assert_eq!(corpus.len(), 50);
    for case in corpus {
        let (turn, report) = parse_turn(&case.raw);
        assert_eq!(report.k, case.k, "{}: k", case.name);
        assert_eq!(report.c, case.c, "{}: c", case.name);
        assert_eq!(report.out_of_order, case.out_of_order, "{}: order", case.name);
        assert_eq!(report.k as usize, report.blocks_present.iter().filter(|b| **b).count(), "{}", case.name);
        assert_eq!(turn.raw, case.raw);
    }
}

#[test]
fn corpus_call_extraction() {
    let corpus = common::turn_corpus();
    let call = |name: &str| {
        let case = corpus.iter().find(|c| c.name == name).unwrap();
        parse_turn(&case.raw).0.call_text
    };
    assert_eq!(call("well_formed"), "tap(1)");
    assert_eq!(call("duplicate_call"), "tap(1)");
    assert_eq!(call("nested_and_real_call"), "tap(1)");
    assert_eq!(call("call_nested_in_reasoning"), "");
    assert_eq!(call("chatter_inside_call"), "tap(1) please");
    assert!(parse_action(&call("chatter_inside_call")).is_err());
}

#[test]
fn rendered_turns_are_fully_conforming() {
    for call in ["tap(1)", "back()", "finish(\"done\")", "text(\"a b\")"] {
        let raw = render_turn("thinking", &StateAssessment::unknown(), call);
        let (turn, report) = parse_turn(&raw);
        assert_eq!((report.k, report.c, report.out_of_order), (3, 0, false));
        assert_eq!(turn.call_text, call);
        assert_eq!(render_action(&parse_action(&turn.call_text).unwrap()), call);
    }
}

fn seeded_turn() -> impl Strategy<Value = (String, usize, usize, bool)> {
    any::<u64>().prop_map(|seed| common::random_turn(&mut ChaCha8Rng::seed_from_u64(seed)))
}

proptest! {
    #[test]
    fn segmentation_is_lossless(raw in ".{0,200}") {
        let (turn, _) = parse_turn(&raw);
        prop_assert_eq!(turn.reassemble(), raw);
    }

    #[test]
    fn interleavings_score_as_built((raw, k, c, ooo) in seeded_turn()) {
        let (turn, report) = parse_turn(&raw);
        prop_assert_eq!(turn.reassemble(), raw);
        prop_assert_eq!((report.k as usize, report.c, report.out_of_order), (k, c, ooo));
    }

    #[test]
    fn outside_text_never_changes_k((raw, _, _, _) in seeded_turn(), extra in "[a-z .!]{0,20}") {
        let (_, before) = parse_turn(&raw);
        let (_, after) = parse_turn(&format!("{raw}{extra}"));
        prop_assert_eq!(after.k, before.k);
        prop_assert!(after.c >= before.c);
    }

    #[test]
    fn deleting_a_block_never_raises_k((raw, _, _, _) in seeded_turn(), pick in 0usize..8) {
        let (turn, before) = parse_turn(&raw);
        let blocks: Vec<_> = turn.segments.iter().filter(|s| s.kind != SegmentKind::Outside).collect();
        prop_assume!(!blocks.is_empty());
        let s = blocks[pick % blocks.len()];
        let cut = format!("{}{}", &raw[..s.start], &raw[s.end..]);
        let (_, after) = parse_turn(&cut);
        prop_assert!(after.k <= before.k);
    }

    #[test]
    fn c_is_zero_iff_outside_is_blank(raw in "(<REASONING>|</REASONING>|<CALLED_FUNCTION>|</CALLED_FUNCTION>|x| |\n){0,12}") {
        let (turn, report) = parse_turn(&raw);
        prop_assert_eq!(report.c == 0, turn.outside_text().trim().is_empty());
    }
}
