//! Rebuilds the recorded model replies under `fixtures/llm/` from the
//! hand-written question sets in `fixtures/authoring/`.
//!
//! A scripted backend plays the model: it answers a generation prompt with the
//! authored drafts and a revision prompt with the next authored revision. The
//! recording wrapper stores every exchange, so later runs can use `--replay`.
//!
//! cargo run --example record_fixtures

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;
use vidquiz::chat::{advance, ChatState, Redirector};
use vidquiz::llm::{CompletionRequest, FixtureStore, FnBackend, Gateway, LlmError, LlmSettings, RecordingBackend};
use vidquiz::pipeline::{generate_bank, run_pipeline, GenerateConfig, PipelineError, VideoInputs};
use vidquiz::strategy::{Strategy, StrategySet};

const RECORDED_AT: &str = "2025-01-01T00:00:00Z";

#[derive(Deserialize)]
struct Entry {
    draft: Value,
    #[serde(default)]
    revisions: Vec<Value>,
}

#[derive(Deserialize)]
struct AuthoredSet {
    strategy: Strategy,
    preamble: String,
    drafts: Vec<Entry>,
}

fn load_set(root: &Path, name: &str) -> AuthoredSet {
    let path = root.join("authoring").join(format!("{name}.json"));
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn strategy_of(request: &CompletionRequest) -> Strategy {
    let system = &request.messages[0].content;
    if system.contains("<<EMOTION") {
        Strategy::Emotion
    } else if system.contains("<<VISUAL") {
        Strategy::Visual
    } else {
        Strategy::Transcript
    }
}

/// Plays the model for one group of authored sets.
fn scripted_model(sets: Vec<AuthoredSet>) -> impl Fn(&CompletionRequest) -> Result<String, LlmError> + Send + Sync {
    let sets = Arc::new(sets);
    move |request| {
        let user = &request.messages.last().unwrap().content;
        if let Some(rest) = user.strip_prefix("Question:\n") {
            let quoted: Value = serde_json::from_str(rest.lines().next().unwrap()).unwrap();
            for entry in sets.iter().flat_map(|s| &s.drafts) {
                let chain: Vec<&Value> = std::iter::once(&entry.draft).chain(&entry.revisions).collect();
                if let Some(i) = chain.iter().position(|v| **v == quoted) {
                    let next = chain.get(i + 1).or(chain.last()).unwrap();
                    return Ok(next.to_string());
                }
            }
            panic!("no authored revision for {quoted}");
        }
        let set = sets.iter().find(|s| s.strategy == strategy_of(request)).expect("an authored set per strategy");
        let mut reply = set.preamble.clone();
        for entry in &set.drafts {
            reply.push_str(&entry.draft.to_string());
            reply.push('\n');
        }
        Ok(reply)
    }
}

fn recording(dir: &Path, model: impl Fn(&CompletionRequest) -> Result<String, LlmError> + Send + Sync + 'static) -> Gateway {
    if dir.exists() {
        std::fs::remove_dir_all(dir).unwrap();
    }
    let store = FixtureStore::new(dir);
    Gateway::new(RecordingBackend::new(FnBackend(model), store).unwrap().with_timestamp(|| RECORDED_AT.to_string()))
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = GenerateConfig::load(&root.join("generate.toml")).unwrap();
    let inputs = VideoInputs::load(&config).unwrap();

    let main_sets = ["transcript", "emotion", "visual"].map(|n| load_set(&root, n)).into_iter().collect();
    let gateway = recording(&root.join("llm/generation"), scripted_model(main_sets));
    let (bank, outputs) = generate_bank(&inputs, &config.generation, StrategySet::ALL, &gateway).unwrap();
    for (strategy, out) in &outputs {
        println!("{strategy}: {} questions, {} revision calls", out.questions.len(), out.revision_calls);
    }
    println!("generation: {} questions, {} calls", bank.questions().len(), gateway.call_count());

    let gateway = recording(&root.join("llm/never_pass"), scripted_model(vec![load_set(&root, "never_pass")]));
    let transcript = inputs.enhanced(Strategy::Transcript).unwrap();
    let generation = vidquiz::pipeline::GenerationConfig { strategy: Strategy::Transcript, ..config.generation.clone() };
    match run_pipeline(&transcript, &generation, &gateway) {
        Err(PipelineError::InsufficientValidQuestions { accepted, required, .. }) => {
            println!("never_pass: {accepted}/{required} accepted after {} calls", gateway.call_count())
        }
        other => panic!("never_pass set should fail, got {other:?}"),
    }

    let gateway = recording(&root.join("llm/chat"), |_| {
        Ok("I can help with that after the video. For now, let's pick the kinds of questions you want.".to_string())
    });
    let settings = LlmSettings::chat();
    let redirector = Redirector { gateway: &gateway, settings: &settings };
    for script in [&["hello", "2", "yes"][..], &["yes three questions", "3", "2", "yes"]] {
        let (mut state, _) = advance(&ChatState::new(), "", Some(&redirector)).unwrap();
        for message in script {
            state = advance(&state, message, Some(&redirector)).unwrap().0;
        }
        println!("chat {script:?}: {:?}", state.token_line());
    }
    println!("chat: {} calls", gateway.call_count());
}
