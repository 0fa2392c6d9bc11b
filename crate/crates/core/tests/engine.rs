mod common;

use vidquiz::bank::select_session_questions;
use vidquiz::engine::{export_jsonl, parse_jsonl, start_session, EngineError, EventBody, Feedback};
use vidquiz::simulate::{run_script, Script};
use vidquiz::{Strategy, StrategySet};

fn script(name: &str) -> Script {
    serde_json::from_str(&std::fs::read_to_string(common::fixtures().join("sessions").join(name)).unwrap()).unwrap()
}

#[test]
fn scripted_sessions_are_deterministic() {
    let bank = common::golden_bank();
    for name in ["emotion_full.json", "p01_transcript.json", "p02_visual.json", "p03_all.json", "p04_emotion_visual.json"] {
        let a = run_script(&bank, &script(name)).unwrap();
        let b = run_script(&bank, &script(name)).unwrap();
        assert!(a.is_completed(), "{name}");
        let text = export_jsonl(a.log());
        assert_eq!(text, export_jsonl(b.log()));
        assert_eq!(parse_jsonl(&text).unwrap(), a.log());
    }
    assert_eq!(run_script(&bank, &script("emotion_full.json")).unwrap().log().len(), 36);
}

#[test]
fn wrong_answer_points_back_and_seek_is_gated() {
    let bank = common::golden_bank();
    let plan = select_session_questions(&bank, StrategySet::single(Strategy::Transcript), 10, 3).unwrap();
    let first = plan.scheduled[0].clone();
    let mut s = start_session(plan, 0);

    let update = s.on_time_update(100, first.popup_ms + 30_000).unwrap();
    assert_eq!(update.playhead_ms, first.popup_ms);
    assert_eq!(update.popup.unwrap().question_id, first.question.id);
    assert_eq!(s.on_time_update(200, first.popup_ms + 1), Err(EngineError::PausedForQuestion));

    let wrong = (first.question.correct_index().unwrap() + 1) % first.question.answers.len();
    let outcome = s.submit_answer(300, &first.question.id, wrong).unwrap();
    assert_eq!(outcome.feedback, Feedback::ReviewReference { reference_start_ms: first.question.transcript_timestamp_start });
    assert_eq!(s.request_seek(400, first.question.transcript_timestamp_start as i64).unwrap(), first.question.transcript_timestamp_start);
    assert_eq!(s.request_seek(500, 10_000_000).unwrap(), first.popup_ms);
    assert_eq!(s.request_seek(600, -1), Err(EngineError::NegativeTarget(-1)));

    let right = s.submit_answer(700, &first.question.id, first.question.correct_index().unwrap()).unwrap();
    assert_eq!(right.feedback, Feedback::Encouragement);
    assert_eq!(right.remaining_count, 9);
    let records: Vec<_> = s.answer_records().collect();
    assert_eq!(records.iter().map(|r| (r.attempt_index, r.correct)).collect::<Vec<_>>(), [(1, false), (2, true)]);
    assert_eq!(records[0].elapsed_ms, 200);
    let popups = s.log().iter().filter(|e| matches!(e.body, EventBody::PopupShown { .. })).count();
    assert_eq!(popups, 1);
}
