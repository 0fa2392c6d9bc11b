//! Walks the question-type dialog with scripted replies. Off-topic messages
//! get the recorded model reply; everything else is rule-based.
//!
//! cargo run --example chat_selection [-- "hello" "both" "emotion and visual" "yes"]

use std::path::Path;

use vidquiz::chat::{advance, ChatState, Redirector};
use vidquiz::llm::{Gateway, LlmSettings, ReplayBackend};

fn main() {
    let mut script: Vec<String> = std::env::args().skip(1).collect();
    if script.is_empty() {
        script = ["hello", "2", "yes"].map(String::from).to_vec();
    }
    let gateway = Gateway::new(ReplayBackend::open(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/llm/chat")).unwrap());
    let settings = LlmSettings::chat();
    let llm = Redirector { gateway: &gateway, settings: &settings };

    let (mut state, turn) = advance(&ChatState::new(), "", Some(&llm)).unwrap();
    println!("bot: {}", turn.text);
    for msg in &script {
        println!("you: {msg}");
        match advance(&state, msg, Some(&llm)) {
            Ok((next, turn)) => {
                println!("bot: {}", turn.text);
                state = next;
            }
            Err(e) => {
                println!("error: {e}");
                break;
            }
        }
    }
    println!("\nphase {:?}, selection {:?}", state.phase(), state.selection());
    if let Some(line) = state.token_line() {
        println!("{line}");
    }
}
