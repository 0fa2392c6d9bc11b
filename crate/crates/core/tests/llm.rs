mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use vidquiz::llm::{canonical_digest, ChatMessage, FixtureStore, FnBackend, Gateway, LlmError, LlmSettings, RecordingBackend, ReplayBackend};

#[test]
fn digest_depends_on_content_only() {
    let settings = LlmSettings::chat();
    let a = settings.request(vec![ChatMessage::user("hi")]);
    let b = settings.request(vec![ChatMessage::user("hi")]);
    let c = settings.request(vec![ChatMessage::user("hi ")]);
    assert_eq!(canonical_digest(&a), canonical_digest(&b));
    assert_ne!(canonical_digest(&a), canonical_digest(&c));
    assert_eq!(canonical_digest(&a).as_str().len(), 64);
}

#[test]
fn recorded_calls_replay_without_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = calls.clone();
    let model = FnBackend(move |_: &_| {
        counter.fetch_add(1, Ordering::SeqCst);
        Ok("recorded answer".to_string())
    });
    let request = LlmSettings::generation().request(vec![ChatMessage::system("sys"), ChatMessage::user("go")]);
    {
        let recorder = RecordingBackend::new(model, FixtureStore::new(dir.path())).unwrap();
        let gateway = Gateway::new(recorder);
        assert_eq!(gateway.complete(&request).unwrap().content, "recorded answer");
        assert_eq!(gateway.call_count(), 1);
    }
    assert_eq!(calls.load(Ordering::SeqCst), 1);

    let replay = Gateway::new(ReplayBackend::open(dir.path()).unwrap());
    assert_eq!(replay.complete(&request).unwrap().content, "recorded answer");
    let other = LlmSettings::generation().request(vec![ChatMessage::system("sys"), ChatMessage::user("something else")]);
    assert!(matches!(replay.complete(&other), Err(LlmError::FixtureMiss { .. })));
    let headless = LlmSettings::generation().request(vec![ChatMessage::user("go")]);
    assert!(matches!(replay.complete(&headless), Err(LlmError::InvalidRequest(_))));
}

#[test]
fn committed_fixtures_load() {
    for dir in ["generation", "never_pass", "chat"] {
        let backend = ReplayBackend::open(common::fixtures().join("llm").join(dir)).unwrap();
        assert!(!backend.is_empty(), "{dir}");
    }
}
