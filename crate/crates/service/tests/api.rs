// Copyright 2026 The evqa Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use evqa::generation::scripted::EchoBackend;
use evqa::generation::{BackendError, Capabilities, DecodeConfig, GeneratorBackend};
use evqa::session::{parse_log, LogKind};
use evqa_service::{router, Clock, ServiceConfig, SessionStore};

#[derive(Default)]
struct ManualClock(AtomicU64);

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

struct Broken;

impl GeneratorBackend for Broken {
    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }
    fn description(&self) -> String {
        "broken".into()
    }
    fn sample(&self, _: &str, _: usize, _: &DecodeConfig) -> Result<Vec<String>, BackendError> {
        Err(BackendError::Failure("model server down".into()))
    }
}

struct Harness {
    app: Router,
    store: Arc<SessionStore>,
    clock: Arc<ManualClock>,
}

fn harness_with(backend: Arc<dyn GeneratorBackend>, log_dir: Option<std::path::PathBuf>) -> Harness {
    let clock = Arc::new(ManualClock::default());
    let store = Arc::new(
        SessionStore::open(
            backend,
            ServiceConfig {
                log_dir,
                ..ServiceConfig::default()
            },
            clock.clone(),
        )
        .unwrap(),
    );
    Harness {
        app: router(store.clone()),
        store,
        clock,
    }
}

fn harness() -> Harness {
    harness_with(Arc::new(EchoBackend), None)
}

impl Harness {
    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(match body {
                Some(b) => Body::from(b.to_string()),
                None => Body::empty(),
            })
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, v)
    }

    async fn create(&self, variant: &str) -> String {
        let (s, v) = self
            .call("POST", "/sessions", Some(json!({"seed": "police evacuated buildings", "variant": variant})))
            .await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v["session_id"].as_str().unwrap().to_string()
    }

    async fn act(&self, id: &str, action: Value) -> (StatusCode, Value) {
        self.call("POST", &format!("/sessions/{id}/actions"), Some(action)).await
    }

    async fn entity(&self, id: &str, entity: Value) -> (StatusCode, Value) {
        self.call("POST", &format!("/sessions/{id}/entity"), Some(json!({ "entity": entity }))).await
    }
}

#[tokio::test]
async fn create_qgelm_awaits_entity() {
    let h = harness();
    let (s, v) = h
        .call("POST", "/sessions", Some(json!({"seed": "police evacuated buildings", "variant": "qgelm"})))
        .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["state"], "AWAITING_ENTITY");
    assert_eq!(v["candidates"].as_array().unwrap().len(), 0);
    assert_eq!(v["seconds_remaining"], 240);
    assert_eq!(v["tree"]["event"], "police evacuated buildings");
}

#[tokio::test]
async fn create_elm_has_four_candidates() {
    let h = harness();
    let (_, v) = h.call("POST", "/sessions", Some(json!({"seed": "a b", "variant": "elm"}))).await;
    assert_eq!(v["state"], "AWAITING_ACTION");
    assert_eq!(v["candidates"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn two_creates_have_distinct_ids() {
    let h = harness();
    assert_ne!(h.create("qgelm").await, h.create("qgelm").await);
}

#[tokio::test]
async fn bad_create_bodies_are_400() {
    let h = harness();
    let (s, _) = h.call("POST", "/sessions", Some(json!({"seed": "  ", "variant": "qgelm"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = h.call("POST", "/sessions", Some(json!({"seed": "a b", "variant": "gpt"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = h.call("POST", "/sessions", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn backend_failure_is_503() {
    let h = harness_with(Arc::new(Broken), None);
    let (s, v) = h.call("POST", "/sessions", Some(json!({"seed": "a b", "variant": "elm"}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE, "{v}");
    let id = h.create("qgelm").await;
    let (s, _) = h.entity(&id, json!("the police")).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    // nothing was applied
    let (_, v) = h.call("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["state"], "AWAITING_ENTITY");
}

#[tokio::test]
async fn entity_gives_four_candidates_two_per_question() {
    let h = harness();
    let id = h.create("qgelm").await;
    let (s, v) = h.entity(&id, json!("the police")).await;
    assert_eq!(s, StatusCode::OK);
    let c = v["candidates"].as_array().unwrap();
    assert_eq!(c.len(), 4);
    assert_eq!(c[2]["index"], 2);
    assert_eq!(v["entity"], "the police");
}

#[tokio::test]
async fn entity_errors() {
    let h = harness();
    let (s, _) = h.entity("nope", json!("x")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let id = h.create("qgelm").await;
    assert_eq!(h.entity(&id, json!(null)).await.0, StatusCode::OK);
    assert_eq!(h.entity(&id, json!("the police")).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn select_and_return() {
    let h = harness();
    let id = h.create("qgelm").await;
    h.entity(&id, json!("the police")).await;
    let (s, v) = h.act(&id, json!({"kind": "SELECT", "index": 2})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["metrics"]["accepted_events"], 1);
    assert_eq!(v["cursor"], 1);
    let (s, v) = h.act(&id, json!({"kind": "RETURN", "step": 0})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["cursor"], 0);
    assert_eq!(v["metrics"]["rejected_steps"], 1);
}

#[tokio::test]
async fn action_errors() {
    let h = harness();
    let (s, _) = h.act("nope", json!({"kind": "STOP"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let id = h.create("elm").await;
    let (s, _) = h.act(&id, json!({"kind": "SELECT", "index": 7})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = h.act(&id, json!({"kind": "JUMP"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let qid = h.create("qgelm").await;
    let (s, _) = h.act(&qid, json!({"kind": "REGENERATE"})).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn action_after_expiry_is_410() {
    let h = harness();
    let id = h.create("elm").await;
    h.clock.0.store(240_000, Ordering::SeqCst);
    let (s, _) = h.act(&id, json!({"kind": "SELECT", "index": 0})).await;
    assert_eq!(s, StatusCode::GONE);
    let (_, v) = h.call("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["state"], "FINISHED");
    assert_eq!(v["seconds_remaining"], 0);
}

#[tokio::test]
async fn fresh_metrics_are_zero() {
    let h = harness();
    let id = h.create("qgelm").await;
    let (s, v) = h.call("GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        v,
        json!({"accepted_events": 0, "rejected_steps": 0, "pct_rejected": 0.0, "resamples": 0, "total_steps": 0, "tree_depth": 0})
    );
    let (s, _) = h.call("GET", "/sessions/nope/metrics", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

async fn drive_golden(h: &Harness, id: &str) {
    let steps = [
        ("entity", json!("the thief")),
        ("action", json!({"kind": "SELECT", "index": 0})),
        ("entity", json!("the police")),
        ("action", json!({"kind": "SELECT", "index": 1})),
        ("entity", json!(null)),
        ("action", json!({"kind": "REGENERATE"})),
        ("action", json!({"kind": "SELECT", "index": 2})),
        ("action", json!({"kind": "RETURN", "step": 1})),
        ("entity", json!("the thief")),
        ("action", json!({"kind": "SELECT", "index": 3})),
        ("action", json!({"kind": "STOP"})),
    ];
    for (i, (kind, body)) in steps.into_iter().enumerate() {
        h.clock.0.store(1000 * (i as u64 + 1), Ordering::SeqCst);
        let (s, v) = if kind == "entity" { h.entity(id, body).await } else { h.act(id, body).await };
        assert_eq!(s, StatusCode::OK, "step {i}: {v}");
    }
}

#[tokio::test]
async fn golden_session_metrics() {
    let h = harness();
    let id = h.create("qgelm").await;
    drive_golden(&h, &id).await;
    let (_, m) = h.call("GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(m["accepted_events"], 4);
    assert_eq!(m["rejected_steps"], 2);
    assert_eq!(m["resamples"], 1);
    assert_eq!(m["total_steps"], 6);
    assert_eq!(m["tree_depth"], 3);
    assert!((m["pct_rejected"].as_f64().unwrap() - 100.0 / 3.0).abs() < 1e-9);
    let (_, v) = h.call("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["state"], "FINISHED");
    assert_eq!(v["tree"]["children"][0]["children"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn retried_request_id_applies_once() {
    let h = harness();
    let id = h.create("elm").await;
    let body = json!({"kind": "SELECT", "index": 0, "request_id": "r-1"});
    let (_, a) = h.act(&id, body.clone()).await;
    let (_, b) = h.act(&id, body).await;
    assert_eq!(a, b);
    assert_eq!(b["metrics"]["accepted_events"], 1);
    let create = json!({"seed": "a b", "variant": "elm", "request_id": "c-1"});
    let (s1, v1) = h.call("POST", "/sessions", Some(create.clone())).await;
    let (s2, v2) = h.call("POST", "/sessions", Some(create)).await;
    assert_eq!((s1, s2), (StatusCode::CREATED, StatusCode::OK));
    assert_eq!(v1["session_id"], v2["session_id"]);
}

#[tokio::test]
async fn log_is_written_and_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let h = harness_with(Arc::new(EchoBackend), Some(dir.path().to_path_buf()));
    let id = h.create("qgelm").await;
    drive_golden(&h, &id).await;
    let before = h.store.snapshot(&id).unwrap();

    let text = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    let log = parse_log(&text).unwrap();
    assert_eq!(log.len(), 12);
    assert_eq!(log[0].kind, LogKind::Start);

    let restarted = harness_with(Arc::new(EchoBackend), Some(dir.path().to_path_buf()));
    assert_eq!(restarted.store.snapshot(&id).unwrap(), before);
    let (_, m) = restarted.call("GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(m["tree_depth"], 3);
}

#[tokio::test]
async fn rejected_actions_are_logged_and_replayed() {
    let dir = tempfile::tempdir().unwrap();
    let h = harness_with(Arc::new(EchoBackend), Some(dir.path().to_path_buf()));
    let id = h.create("elm").await;
    h.clock.0.store(500_000, Ordering::SeqCst);
    assert_eq!(h.act(&id, json!({"kind": "REGENERATE"})).await.0, StatusCode::GONE);
    let restarted = harness_with(Arc::new(EchoBackend), Some(dir.path().to_path_buf()));
    assert_eq!(restarted.store.snapshot(&id).unwrap(), h.store.snapshot(&id).unwrap());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_reads_see_whole_actions() {
    let h = Arc::new(harness());
    let id = h.create("elm").await;
    let writer = {
        let h = h.clone();
        let id = id.clone();
        tokio::spawn(async move {
            for i in 0..40 {
                let a = if i % 3 == 0 { json!({"kind": "REGENERATE"}) } else { json!({"kind": "SELECT", "index": i % 4}) };
                assert_eq!(h.act(&id, a).await.0, StatusCode::OK);
            }
        })
    };
    let mut readers = Vec::new();
    for _ in 0..4 {
        let h = h.clone();
        let id = id.clone();
        readers.push(tokio::spawn(async move {
            for _ in 0..40 {
                let (_, v) = h.call("GET", &format!("/sessions/{id}"), None).await;
                let m = &v["metrics"];
                assert_eq!(
                    m["total_steps"].as_u64().unwrap(),
                    m["accepted_events"].as_u64().unwrap() + m["rejected_steps"].as_u64().unwrap()
                );
                assert_eq!(v["candidates"].as_array().unwrap().len(), 4);
            }
        }));
    }
    writer.await.unwrap();
    for r in readers {
        r.await.unwrap();
    }
    // different sessions proceed independently
    let other = h.create("elm").await;
    assert_eq!(h.act(&other, json!({"kind": "STOP"})).await.0, StatusCode::OK);
    let (_, v) = h.call("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["state"], "AWAITING_ACTION");
}
