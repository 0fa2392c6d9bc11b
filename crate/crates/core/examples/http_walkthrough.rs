//! Drives the HTTP API in-process: create a session, pick question types,
//! watch until the first popup, answer it, and fetch the session state.
//! `vidquiz serve --config fixtures/service.toml` exposes the same routes.
//!
//! cargo run --example http_walkthrough

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vidquiz::service::{router, AppState, ServiceConfig};

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    println!("{method} {uri} -> {status}");
    value
}

#[tokio::main(flavor = "multi_thread", worker_threads = 2)]
async fn main() {
    let config = ServiceConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/service.toml")).unwrap();
    let state = tokio::task::block_in_place(|| AppState::from_config(config)).unwrap();
    let app = router(Arc::new(state));

    let created = call(&app, "POST", "/sessions", Some(json!({}))).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    for text in ["hello", "2", "yes"] {
        let reply = call(&app, "POST", &format!("/sessions/{id}/chat"), Some(json!({ "text": text }))).await;
        println!("  bot: {}", reply["bot_turn"]["text"].as_str().unwrap_or_default());
    }

    let mut playhead = 0;
    let popup = loop {
        playhead += 15_000;
        let update = call(&app, "POST", &format!("/sessions/{id}/time"), Some(json!({ "playhead_ms": playhead }))).await;
        if !update["popup"].is_null() {
            break update["popup"].clone();
        }
    };
    println!("  popup: {}", popup["question"]);
    for (i, option) in popup["options"].as_array().unwrap().iter().enumerate() {
        println!("    {i}. {option}");
    }
    let answer = json!({"question_id": popup["question_id"], "chosen_index": 0});
    let outcome = call(&app, "POST", &format!("/sessions/{id}/answer"), Some(answer)).await;
    println!("  feedback: {}", outcome["feedback"]);

    let session = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    println!("  {}", serde_json::to_string_pretty(&session["state"]).unwrap());
}
