mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use vidquiz::bank::{select_session_questions, SelectionError};
use vidquiz::{Strategy, StrategySet};

#[test]
fn all_strategies_spread_over_bins() {
    let bank = common::golden_bank();
    let plan = select_session_questions(&bank, StrategySet::ALL, 10, 42).unwrap();
    assert_eq!(plan.len(), 10);
    for s in Strategy::ALL {
        let n = plan.scheduled.iter().filter(|q| q.question.strategy == s).count();
        assert!((3..=4).contains(&n), "{s}: {n}");
    }
    let bins: BTreeSet<usize> = plan.scheduled.iter().map(|q| plan.bin_of(q.popup_ms)).collect();
    assert!(bins.len() >= 8, "{bins:?}");
}

#[test]
fn seed_changes_the_draw() {
    let bank = common::golden_bank();
    let mut draws: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for seed in 0..100 {
        let plan = select_session_questions(&bank, StrategySet::ALL, 10, seed).unwrap();
        *draws.entry(plan.scheduled.iter().map(|q| q.question.id.clone()).collect()).or_default() += 1;
    }
    assert!(draws.len() >= 15, "only {} distinct draws", draws.len());
    assert!(draws.values().all(|&n| n <= 25), "one draw dominates: {:?}", draws.values().max());
}

#[test]
fn degenerate_requests_fail() {
    let bank = common::golden_bank();
    assert_eq!(select_session_questions(&bank, StrategySet::EMPTY, 10, 1), Err(SelectionError::EmptyStrategySet));
    assert_eq!(select_session_questions(&bank, StrategySet::ALL, 0, 1), Err(SelectionError::ZeroQuestions));
    assert!(matches!(
        select_session_questions(&bank, StrategySet::single(Strategy::Visual), 11, 1),
        Err(SelectionError::InsufficientCandidates { .. })
    ));
}

fn subsets() -> impl proptest::strategy::Strategy<Value = StrategySet> {
    prop::sample::select(StrategySet::non_empty_subsets().collect::<Vec<_>>())
}

proptest! {
    #[test]
    fn plans_are_well_formed(set in subsets(), seed in any::<u64>()) {
        let bank = common::golden_bank();
        let plan = select_session_questions(&bank, set, 10, seed).unwrap();
        prop_assert_eq!(&plan, &select_session_questions(&bank, set, 10, seed).unwrap());
        prop_assert_eq!(plan.len(), 10);
        let ids: BTreeSet<_> = plan.scheduled.iter().map(|q| &q.question.id).collect();
        prop_assert_eq!(ids.len(), 10);
        let refs: BTreeSet<_> = plan.scheduled.iter().map(|q| q.question.transcript_reference.to_lowercase()).collect();
        prop_assert_eq!(refs.len(), 10);
        for q in &plan.scheduled {
            prop_assert!(set.contains(q.question.strategy));
            prop_assert!(q.popup_ms > q.question.transcript_timestamp_start);
            prop_assert!(q.popup_ms < plan.video_duration_ms);
        }
        prop_assert!(plan.scheduled.windows(2).all(|w| w[0].popup_ms < w[1].popup_ms));
    }
}
