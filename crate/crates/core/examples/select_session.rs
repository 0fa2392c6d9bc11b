//! Draws a session's questions from the bank for a set of strategies.
//!
//! cargo run --example select_session [-- emotion,visual 42]

use std::path::Path;

use vidquiz::bank::{load_bank, select_session_questions, DEFAULT_SESSION_SIZE};
use vidquiz::{Strategy, StrategySet};

fn main() {
    let mut args = std::env::args().skip(1);
    let strategies: StrategySet = match args.next() {
        Some(list) => list.split(',').map(|s| s.parse::<Strategy>().expect("unknown strategy")).collect(),
        None => StrategySet::ALL,
    };
    let seed: u64 = args.next().map_or(42, |s| s.parse().expect("seed must be an integer"));

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/banks/golden.json");
    let bank = load_bank(&std::fs::read(path).unwrap()).unwrap();
    let plan = select_session_questions(&bank, strategies, DEFAULT_SESSION_SIZE, seed).unwrap();

    println!("seed {seed}, strategies {strategies:?}");
    for s in &plan.scheduled {
        println!("{:>7} ms  bin {}  {:<14} {}", s.popup_ms, plan.bin_of(s.popup_ms), s.question.id, s.question.question);
    }
}
