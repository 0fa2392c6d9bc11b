//! Runs question generation for every strategy against the recorded model
//! replies, then prints what the revision loop did and a sample question.
//!
//! cargo run --example generate_questions

use std::path::Path;

use vidquiz::llm::{Gateway, ReplayBackend};
use vidquiz::pipeline::{generate_bank, tally, GenerateConfig, VideoInputs};
use vidquiz::StrategySet;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = GenerateConfig::load(&root.join("generate.toml")).unwrap();
    let inputs = VideoInputs::load(&config).unwrap();
    let gateway = Gateway::new(ReplayBackend::open(root.join("llm/generation")).unwrap());

    let (bank, outputs) = generate_bank(&inputs, &config.generation, StrategySet::ALL, &gateway).unwrap();
    for (strategy, out) in &outputs {
        let failing = tally(&out.initial_reports);
        println!("{strategy}: {} accepted, {} revision calls, first-round problems {failing:?}", out.questions.len(), out.revision_calls);
    }
    println!("{} questions from {} model calls\n", bank.questions().len(), gateway.call_count());

    let q = &bank.questions()[0];
    println!("{} ({:?}, pops up at {} ms)", q.id, q.kind, q.timestamp);
    println!("  {}", q.question);
    for a in &q.answers {
        println!("  [{}] {}", if a.is_correct { "x" } else { " " }, a.text);
    }
    println!("  reference @{} ms: {:?}", q.transcript_timestamp_start, q.transcript_reference);
}
