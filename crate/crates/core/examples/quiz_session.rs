//! Plays a session against the gating engine: the learner answers the third
//! question wrong, rewinds to the reference, then gets it right.
//!
//! cargo run --example quiz_session

use std::path::Path;

use vidquiz::bank::{load_bank, select_session_questions};
use vidquiz::engine::{export_jsonl, start_session, EngineError};
use vidquiz::StrategySet;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/banks/golden.json");
    let bank = load_bank(&std::fs::read(path).unwrap()).unwrap();
    let plan = select_session_questions(&bank, StrategySet::ALL, 10, 5).unwrap();
    let end = plan.video_duration_ms;
    let mut s = start_session(plan, 0);
    let mut wall = 0;

    while !s.is_completed() {
        wall += 5_000;
        let target = (s.playhead_ms() + 5_000).min(end);
        match s.on_time_update(wall, target) {
            Ok(update) => {
                let Some(popup) = update.popup else { continue };
                println!("{:>6} ms  Q{} {}", popup.popup_ms, popup.position, popup.question);
                let q = s.active_question().unwrap().clone();
                let right = q.correct_index().unwrap();
                if popup.position == 3 {
                    wall += 4_000;
                    let out = s.submit_answer(wall, &q.id, (right + 1) % q.answers.len()).unwrap();
                    println!("          wrong: {:?}", out.feedback);
                    let granted = s.request_seek(wall, popup.reference_start_ms as i64).unwrap();
                    println!("          rewound to {granted} ms");
                    let ahead = s.request_seek(wall, end as i64).unwrap();
                    println!("          seek to the end granted only up to {ahead} ms");
                }
                wall += 3_000;
                let out = s.submit_answer(wall, &q.id, right).unwrap();
                println!("          right, {} to go", out.remaining_count);
            }
            Err(EngineError::PausedForQuestion) => unreachable!("every popup is answered before playing on"),
            Err(e) => panic!("{e}"),
        }
    }
    let log = export_jsonl(s.log());
    println!("\ncompleted with {} events; last: {}", s.log().len(), log.lines().last().unwrap());
}
