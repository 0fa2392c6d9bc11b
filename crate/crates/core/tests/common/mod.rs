#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vidquiz::bank::{load_bank, QuestionBank};
use vidquiz::engine::ManualClock;
use vidquiz::llm::{Gateway, ReplayBackend};
use vidquiz::pipeline::{GenerateConfig, VideoInputs};
use vidquiz::service::{router, AppState, MemoryStore, SequentialIds, ServiceConfig, VideoMetadata};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn golden_bank() -> QuestionBank {
    load_bank(&std::fs::read(fixtures().join("banks/golden.json")).unwrap()).unwrap()
}

pub fn video_inputs() -> (GenerateConfig, VideoInputs) {
    let config = GenerateConfig::load(&fixtures().join("generate.toml")).unwrap();
    let inputs = VideoInputs::load(&config).unwrap();
    (config, inputs)
}

pub fn replay(dir: &str) -> Gateway {
    Gateway::new(ReplayBackend::open(fixtures().join("llm").join(dir)).unwrap())
}

/// Compares against a file in `tests/golden`, or rewrites it when `UPDATE_GOLDEN` is set.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b).unwrap_or(expected.lines().count().min(actual.lines().count()));
    Err(format!("{name} differs from the golden file at line {}", line + 1))
}

pub struct Client {
    app: axum::Router,
    pub clock: Arc<ManualClock>,
    pub transcript: String,
    pub token: Option<String>,
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
    pub raw: String,
}

impl Client {
    pub fn new(config: ServiceConfig, gateway: Option<Gateway>) -> Self {
        let clock = Arc::new(ManualClock::new(1_000_000));
        let bank = golden_bank();
        let video = VideoMetadata {
            video_id: bank.video_id().to_string(),
            title: "Introduction to augmented reality".into(),
            duration_ms: bank.video_duration_ms(),
            url: None,
        };
        let state = AppState::new(config, bank, Box::new(MemoryStore::default()), gateway, clock.clone(), Box::new(SequentialIds::default()))
            .with_video(video);
        Client { app: router(Arc::new(state)), clock, transcript: String::new(), token: None }
    }

    pub fn golden() -> Self {
        Client::new(ServiceConfig::default(), Some(replay("chat")))
    }

    pub async fn send(&mut self, method: Method, uri: &str, body: Option<Value>, headers: &[(&str, &str)]) -> Reply {
        let mut req = Request::builder().method(method.clone()).uri(uri);
        if let Some(t) = &self.token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let text = body.as_ref().map(Value::to_string);
        let req = match &text {
            Some(t) => req.header("content-type", "application/json").body(Body::from(t.clone())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let raw = String::from_utf8(bytes.to_vec()).unwrap();
        self.transcript.push_str(&format!(">>> {method} {uri}\n"));
        if let Some(t) = &text {
            self.transcript.push_str(t);
            self.transcript.push('\n');
        }
        self.transcript.push_str(&format!("<<< {}\n", status.as_u16()));
        if !raw.is_empty() {
            self.transcript.push_str(raw.trim_end());
            self.transcript.push('\n');
        }
        self.transcript.push('\n');
        let body = serde_json::from_str(&raw).unwrap_or(Value::Null);
        Reply { status, body, raw }
    }

    pub async fn post(&mut self, uri: &str, body: Value) -> Reply {
        self.send(Method::POST, uri, Some(body), &[]).await
    }

    pub async fn get(&mut self, uri: &str) -> Reply {
        self.send(Method::GET, uri, None, &[]).await
    }
}

pub const GOLDEN_STEP_MS: u64 = 10_000;
/// Positions (1-based) answered wrong once before the right answer.
pub const GOLDEN_WRONG_FIRST: [usize; 2] = [3, 7];

pub struct GoldenRun {
    pub transcript: String,
    pub log: String,
    pub session_id: String,
}

/// The scripted learner: chat, choose emotion questions, watch, answer, rate.
pub async fn golden_run() -> GoldenRun {
    let bank = golden_bank();
    let mut c = Client::golden();
    let created = c.send(Method::POST, "/sessions", None, &[]).await;
    assert_eq!(created.status, StatusCode::CREATED);
    let id = created.body["session_id"].as_str().unwrap().to_string();
    let base = format!("/sessions/{id}");
    for text in ["hello", "2", "yes"] {
        c.clock.advance(4_000);
        let r = c.post(&format!("{base}/chat"), json!({ "text": text })).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.raw);
    }
    c.get("/video").await;
    let mut playhead = 0u64;
    let duration = bank.video_duration_ms();
    loop {
        let target = (playhead + GOLDEN_STEP_MS).min(duration);
        c.clock.advance(GOLDEN_STEP_MS);
        let r = c.post(&format!("{base}/time"), json!({ "playhead_ms": target })).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.raw);
        let state = &r.body["state"];
        playhead = state["playhead_ms"].as_u64().unwrap();
        if state["completed"].as_bool().unwrap() {
            break;
        }
        let Some(popup) = r.body["popup"].as_object().cloned() else {
            continue;
        };
        let qid = popup["question_id"].as_str().unwrap().to_string();
        let position = popup["position"].as_u64().unwrap() as usize;
        let q = bank.get(&qid).unwrap();
        let correct = q.correct_index().unwrap();
        if GOLDEN_WRONG_FIRST.contains(&position) {
            let wrong = q.answers.iter().position(|a| !a.is_correct).unwrap();
            c.clock.advance(6_500);
            let r = c.post(&format!("{base}/answer"), json!({ "question_id": qid, "chosen_index": wrong })).await;
            let back_to = r.body["feedback"]["reference_start_ms"].as_u64().unwrap();
            c.clock.advance(1_500);
            c.post(&format!("{base}/seek"), json!({ "target_ms": back_to })).await;
            let gate = popup["popup_ms"].as_u64().unwrap();
            let mut at = back_to;
            while at < gate {
                at = (at + GOLDEN_STEP_MS).min(gate);
                c.clock.advance(GOLDEN_STEP_MS);
                c.post(&format!("{base}/time"), json!({ "playhead_ms": at })).await;
            }
            c.clock.advance(2_000);
        } else {
            c.clock.advance(3_000 + 500 * position as u64);
        }
        let r = c.post(&format!("{base}/answer"), json!({ "question_id": qid, "chosen_index": correct })).await;
        assert_eq!(r.body["feedback"]["kind"], "Encouragement", "{}", r.raw);
    }
    c.get(&base).await;
    let scores = json!({
        "reduce_irrelevant": 5, "focus_essential": 6, "connect_text_image": 4,
        "recall_facts": 6, "understand_explain": 5, "apply_new": 5
    });
    let r = c.post(&format!("{base}/ratings"), json!({ "forms": [{ "participant_id": "P01", "strategy": "emotion", "scores": scores }] })).await;
    assert_eq!(r.status, StatusCode::NO_CONTENT, "{}", r.raw);
    let survey = json!({ "survey": { "type": "self_efficacy", "participant_id": "P01", "scores": [5, 6, 4, 5, 6, 5, 4, 6] } });
    let r = c.post(&format!("{base}/surveys"), survey).await;
    assert_eq!(r.status, StatusCode::NO_CONTENT, "{}", r.raw);
    let log = c.get(&format!("{base}/log")).await.raw;
    c.get("/report").await;
    GoldenRun { transcript: c.transcript, log, session_id: id }
}
