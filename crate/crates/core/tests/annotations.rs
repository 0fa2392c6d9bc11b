mod common;

use proptest::prelude::*;
use vidquiz::annotations::{aggregate_emotion_cues, load_emotion_observations, load_visual_cues, AnnotationError, EmotionObservation, EnhancedKind};
use vidquiz::Strategy as Kind;

fn observations() -> impl Strategy<Value = Vec<EmotionObservation>> {
    prop::collection::vec((0u8..6, 0u64..10_000, 1u64..3_000), 1..25).prop_map(|v| {
        v.into_iter()
            .map(|(p, start_ms, len)| EmotionObservation { participant_id: format!("P{p}"), start_ms, end_ms: start_ms + len })
            .collect()
    })
}

proptest! {
    #[test]
    fn cues_are_disjoint_and_supported(obs in observations(), k in 1u32..5) {
        let cues = aggregate_emotion_cues(&obs, k).unwrap();
        for c in &cues {
            prop_assert!(c.start_ms < c.end_ms);
            prop_assert!(c.support_count >= k);
            let covering = obs.iter().filter(|o| o.start_ms <= c.start_ms && c.start_ms < o.end_ms).map(|o| &o.participant_id).collect::<std::collections::BTreeSet<_>>();
            prop_assert!(covering.len() as u32 >= c.support_count);
        }
        for w in cues.windows(2) {
            prop_assert!(w[0].end_ms < w[1].start_ms);
        }
    }

    #[test]
    fn raising_k_never_adds_coverage(obs in observations(), k in 1u32..4) {
        let covered = |k| aggregate_emotion_cues(&obs, k).unwrap().iter().map(|c| c.end_ms - c.start_ms).sum::<u64>();
        prop_assert!(covered(k + 1) <= covered(k));
    }
}

#[test]
fn bad_intervals_are_rejected() {
    let obs = [EmotionObservation { participant_id: "P1".into(), start_ms: 500, end_ms: 500 }];
    assert!(matches!(aggregate_emotion_cues(&obs, 1), Err(AnnotationError::InvalidInterval { .. })));
    assert!(aggregate_emotion_cues(&obs[..0], 1).is_err());
}

#[test]
fn fixture_annotations_mark_the_transcript() {
    let dir = common::fixtures().join("annotations");
    let emotion = load_emotion_observations(&std::fs::read_to_string(dir.join("emotion_observations.csv")).unwrap()).unwrap();
    let visual = load_visual_cues(&std::fs::read_to_string(dir.join("visual_annotations.csv")).unwrap()).unwrap();
    assert!(!emotion.is_empty() && !visual.is_empty());

    let (_, inputs) = common::video_inputs();
    for (strategy, kind) in [(Kind::Transcript, EnhancedKind::Plain), (Kind::Emotion, EnhancedKind::Emotion), (Kind::Visual, EnhancedKind::Visual)] {
        let enhanced = inputs.enhanced(strategy).unwrap();
        assert_eq!(enhanced.kind(), kind);
        assert_eq!(enhanced.markers().is_empty(), kind == EnhancedKind::Plain);
        for m in enhanced.markers() {
            assert!(m.first_segment <= m.last_segment && m.last_segment < enhanced.base().len());
            assert!(enhanced.render().contains(&m.label));
        }
    }
}
