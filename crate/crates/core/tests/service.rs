mod common;

use axum::http::{Method, StatusCode};
use common::{golden_run, Client};
use serde_json::json;
use vidquiz::engine::{parse_jsonl, EventBody};
use vidquiz::service::ServiceConfig;

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn golden_run_matches_files() {
    let run = golden_run().await;
    common::check_golden("http_transcript.txt", &run.transcript).unwrap();
    common::check_golden("event_log.jsonl", &run.log).unwrap();
    let events = parse_jsonl(&run.log).unwrap();
    assert!(matches!(events.last().unwrap().body, EventBody::SessionCompleted { answered: 10, attempts: 12 }));
}

async fn chosen(client: &mut Client) -> String {
    let id = client.post("/sessions", json!({})).await.body["session_id"].as_str().unwrap().to_string();
    for text in ["1", "yes"] {
        assert_eq!(client.post(&format!("/sessions/{id}/chat"), json!({ "text": text })).await.status, StatusCode::OK);
    }
    id
}

#[tokio::test]
async fn replayed_key_returns_cached_response() {
    let mut c = Client::golden();
    let id = c.post("/sessions", json!({})).await.body["session_id"].as_str().unwrap().to_string();
    c.post(&format!("/sessions/{id}/chat"), json!({"text": "2"})).await;
    let uri = format!("/sessions/{id}/chat");
    let first = c.send(Method::POST, &uri, Some(json!({"text": "yes"})), &[("idempotency-key", "k1")]).await;
    let again = c.send(Method::POST, &uri, Some(json!({"text": "yes"})), &[("idempotency-key", "k1")]).await;
    assert_eq!(first.status, StatusCode::OK);
    assert_eq!(first.raw, again.raw);
    let fresh = c.send(Method::POST, &uri, Some(json!({"text": "yes"})), &[("idempotency-key", "k2")]).await;
    assert_eq!(fresh.status, StatusCode::CONFLICT);
    assert_eq!(fresh.body["code"], "CHAT_FINISHED");
}

#[tokio::test]
async fn bearer_token_guards_api_but_not_health() {
    let config = ServiceConfig { bearer_token: Some("sesame".into()), ..ServiceConfig::default() };
    let mut c = Client::new(config, None);
    assert_eq!(c.post("/sessions", json!({})).await.status, StatusCode::UNAUTHORIZED);
    assert_eq!(c.get("/health").await.status, StatusCode::OK);
    c.token = Some("wrong".into());
    assert_eq!(c.get("/video").await.status, StatusCode::UNAUTHORIZED);
    c.token = Some("sesame".into());
    assert_eq!(c.post("/sessions", json!({})).await.status, StatusCode::CREATED);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let mut c = Client::golden();
    let reply = c.post("/sessions/s-9999/time", json!({"playhead_ms": 0})).await;
    assert_eq!(reply.status, StatusCode::NOT_FOUND);
    assert_eq!(reply.body["code"], "SESSION_NOT_FOUND");
    assert_eq!(c.get("/sessions/..%2Fetc/log").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn ratings_wait_for_completion_and_match_selection() {
    let mut c = Client::golden();
    let id = chosen(&mut c).await;
    let form = |strategy: &str| {
        json!({"forms": [{"participant_id": "P09", "strategy": strategy, "scores": {
            "recall_facts": 4, "understand_explain": 4, "apply_new": 4,
            "focus_essential": 4, "reduce_irrelevant": 4, "connect_text_image": 4}}]})
    };
    let early = c.post(&format!("/sessions/{id}/ratings"), form("transcript")).await;
    assert_eq!((early.status, early.body["code"].as_str()), (StatusCode::CONFLICT, Some("NOT_COMPLETED")));

    let bank = common::golden_bank();
    let mut playhead = 0;
    loop {
        let state = c.post(&format!("/sessions/{id}/time"), json!({ "playhead_ms": playhead })).await.body;
        if state["state"]["completed"] == true {
            break;
        }
        if let Some(qid) = state["popup"]["question_id"].as_str() {
            let correct = bank.get(qid).unwrap().correct_index().unwrap();
            let reply = c.post(&format!("/sessions/{id}/answer"), json!({"question_id": qid, "chosen_index": correct})).await;
            assert_eq!(reply.status, StatusCode::OK);
        }
        playhead = (state["state"]["gate_ms"].as_u64().unwrap()).min(playhead + 50_000);
    }
    let wrong = c.post(&format!("/sessions/{id}/ratings"), form("visual")).await;
    assert_eq!(wrong.status, StatusCode::UNPROCESSABLE_ENTITY);
    let ok = c.post(&format!("/sessions/{id}/ratings"), form("transcript")).await;
    assert_eq!(ok.status, StatusCode::NO_CONTENT);
}

#[tokio::test]
async fn playback_before_selection_is_refused() {
    let mut c = Client::golden();
    let id = c.post("/sessions", json!({})).await.body["session_id"].as_str().unwrap().to_string();
    let reply = c.post(&format!("/sessions/{id}/time"), json!({"playhead_ms": 1000})).await;
    assert_eq!((reply.status, reply.body["code"].as_str()), (StatusCode::CONFLICT, Some("CHAT_NOT_DONE")));
}

#[tokio::test]
async fn wrong_option_index_is_422() {
    let mut c = Client::golden();
    let id = chosen(&mut c).await;
    let state = c.post(&format!("/sessions/{id}/time"), json!({"playhead_ms": 900_000})).await.body;
    let qid = state["popup"]["question_id"].as_str().expect("first transcript popup").to_string();
    let reply = c.post(&format!("/sessions/{id}/answer"), json!({"question_id": qid, "chosen_index": 9})).await;
    assert_eq!((reply.status, reply.body["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("OPTION_OUT_OF_RANGE")));
    let seek = c.post(&format!("/sessions/{id}/seek"), json!({"target_ms": -5})).await;
    assert_eq!(seek.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[test]
fn sample_config_loads() {
    let config = ServiceConfig::load(&common::fixtures().join("service.toml")).unwrap();
    let state = vidquiz::service::AppState::from_config(config).unwrap();
    assert_eq!(state.store().list().unwrap().len(), 0);
}
