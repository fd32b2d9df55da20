use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use preftree::explain::ExplanationNode;
use preftree::{FeatureSchema, Instance, SessionTrace};
use preftree_service::api::{ErrorBody, FinishResponse};
use preftree_service::store::{ModelView, SessionState, SessionView};
use preftree_service::{router, Store};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

fn schema_json() -> Value {
    json!({
        "features": [
            {"name": "sweetness", "kind": "continuous", "bounds": [0.0, 10.0]},
            {"name": "color", "kind": "categorical", "labels": ["red", "green", "blue"]}
        ]
    })
}

fn app(dir: &std::path::Path) -> Router {
    router(Arc::new(Store::open(dir).unwrap()))
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>, key: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(k) = key {
        req = req.header("Idempotency-Key", k);
    }
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

fn decode<T: DeserializeOwned>(bytes: &[u8]) -> T {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

async fn create(app: &Router, config: Value) -> SessionView {
    let (status, body) = send(app, "POST", "/sessions", Some(json!({"schema": schema_json(), "config": config})), None).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    decode(&body)
}

async fn answer(app: &Router, id: &str, choice: &str) -> SessionView {
    let (status, body) = send(app, "POST", &format!("/sessions/{id}/answer"), Some(json!({"choice": choice})), None).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    decode(&body)
}

/// Prefers the sweeter option.
fn sweeter(view: &SessionView) -> &'static str {
    let p = view.pending.as_ref().unwrap();
    if p.a.get(0) >= p.b.get(0) {
        "A"
    } else {
        "B"
    }
}

#[tokio::test]
async fn create_serves_a_valid_first_pair() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let view = create(&app, json!({})).await;
    assert_eq!(view.state, SessionState::AwaitingAnswer);
    assert_eq!(view.answered, 0);
    assert_eq!(view.model_version, 0);
    let schema: FeatureSchema = serde_json::from_value(schema_json()).unwrap();
    let pending = view.pending.unwrap();
    assert_eq!(pending.step, 0);
    assert!(schema.is_valid(&pending.a) && schema.is_valid(&pending.b));
    assert!(dir.path().join(format!("{}.session.json", view.id)).exists());
}

#[tokio::test]
async fn idempotency_key_returns_the_same_session() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let body = json!({"schema": schema_json()});
    let (s1, b1) = send(&app, "POST", "/sessions", Some(body.clone()), Some("k-1")).await;
    let (s2, b2) = send(&app, "POST", "/sessions", Some(body.clone()), Some("k-1")).await;
    let (_, b3) = send(&app, "POST", "/sessions", Some(body), Some("k-2")).await;
    assert_eq!(s1, StatusCode::CREATED);
    assert_eq!(s2, StatusCode::OK);
    let (v1, v2, v3): (SessionView, SessionView, SessionView) = (decode(&b1), decode(&b2), decode(&b3));
    assert_eq!(v1.id, v2.id);
    assert_ne!(v1.id, v3.id);
    // the key survives a restart
    let app = self::app(dir.path());
    let (s4, b4) = send(&app, "POST", "/sessions", Some(json!({"schema": schema_json()})), Some("k-1")).await;
    assert_eq!(s4, StatusCode::OK);
    assert_eq!(decode::<SessionView>(&b4).id, v1.id);
}

#[tokio::test]
async fn malformed_requests_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let cases = [
        (
            json!({"schema": {"features": [{"name": "x", "kind": "continuous", "bounds": [0.0, "one"]}]}}),
            "schema.features[0]",
        ),
        (json!({"schema": {"features": [{"name": "x", "kind": "continuous", "bounds": [1.0, 0.0]}]}}), "schema"),
        (json!({"scheme": schema_json()}), "."),
        (json!({"schema": schema_json(), "config": {"pool_size": 1}}), "config.pool_size"),
        (json!({"schema": schema_json(), "config": {"sigma_noise": -1.0}}), "config.sigma_noise"),
        (json!({"schema": schema_json(), "config": {"bogus": 1}}), "config"),
    ];
    for (body, field) in cases {
        let (status, bytes) = send(&app, "POST", "/sessions", Some(body.clone()), None).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        let err: ErrorBody = decode(&bytes);
        assert_eq!(err.error, "bad_request");
        match field {
            "." => assert!(err.message.contains("schema"), "{}", err.message),
            f => assert!(err.field.as_deref().unwrap_or("").starts_with(f), "{body}: {err:?}"),
        }
    }
    let (status, bytes) = send(&app, "POST", "/sessions", Some(json!({"schema": {"features": [{"name": "x", "kind": "continuous", "bounds": [1.0, 0.0]}]}})), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(decode::<ErrorBody>(&bytes).message.contains("`x`"));
}

#[tokio::test]
async fn first_model_pair_comes_with_version_one() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut view = create(&app, json!({"initial_pairs": 20, "iterations": 5})).await;
    let id = view.id.clone();
    for step in 0..20 {
        assert_eq!(view.model_version, 0, "no fit during the initial pairs (step {step})");
        let (_, body) = send(&app, "GET", &format!("/sessions/{id}/model"), None, None).await;
        assert!(decode::<ModelView>(&body).empty);
        view = answer(&app, &id, sweeter(&view)).await;
    }
    assert_eq!(view.model_version, 1);
    assert_eq!(view.pending.as_ref().unwrap().step, 20);
    let (_, body) = send(&app, "GET", &format!("/sessions/{id}/model"), None, None).await;
    let model: ModelView = decode(&body);
    assert!(!model.empty);
    assert_eq!(model.model_version, 1);
    assert!(model.explanation.unwrap().leaf_count >= 1);
}

#[tokio::test]
async fn trace_file_has_one_line_per_answer() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut view = create(&app, json!({"initial_pairs": 4, "iterations": 20})).await;
    let id = view.id.clone();
    for _ in 0..10 {
        view = answer(&app, &id, sweeter(&view)).await;
    }
    let text = std::fs::read_to_string(dir.path().join(format!("{id}.trace.jsonl"))).unwrap();
    assert_eq!(text.lines().count(), 10);
    let (status, body) = send(&app, "GET", &format!("/sessions/{id}/trace"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    let trace: SessionTrace = decode(&body);
    assert_eq!(trace.len(), 10);
    assert_eq!(trace.records.iter().map(|r| r.step).collect::<Vec<_>>(), (0..10).collect::<Vec<_>>());
    assert!(trace.records.iter().all(|r| r.regret.is_none()));
}

#[tokio::test]
async fn restart_resumes_with_the_identical_pending_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before) = {
        let app = app(dir.path());
        let mut view = create(&app, json!({"initial_pairs": 3, "iterations": 20, "seed": 5})).await;
        for _ in 0..8 {
            view = answer(&app, &view.id.clone(), sweeter(&view)).await;
        }
        let (_, model) = send(&app, "GET", &format!("/sessions/{}/model", view.id), None, None).await;
        (view.id.clone(), (view, decode::<ModelView>(&model)))
    };
    let app = app(dir.path());
    let (status, body) = send(&app, "GET", &format!("/sessions/{id}/pending"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    let after: SessionView = decode(&body);
    assert_eq!(after, before.0);
    let (_, model) = send(&app, "GET", &format!("/sessions/{id}/model"), None, None).await;
    assert_eq!(decode::<ModelView>(&model), before.1);
}

#[tokio::test]
async fn torn_trace_line_is_dropped_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let app = app(dir.path());
        let mut view = create(&app, json!({"initial_pairs": 3, "iterations": 5})).await;
        for _ in 0..2 {
            view = answer(&app, &view.id.clone(), sweeter(&view)).await;
        }
        view.id
    };
    let path = dir.path().join(format!("{id}.trace.jsonl"));
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"step\":2,\"queri");
    std::fs::write(&path, text).unwrap();
    let app = app(dir.path());
    let (_, body) = send(&app, "GET", &format!("/sessions/{id}/pending"), None, None).await;
    let view: SessionView = decode(&body);
    assert_eq!(view.answered, 2);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
}

#[tokio::test]
async fn model_recommendation_has_the_highest_mean() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut view = create(&app, json!({"initial_pairs": 6, "iterations": 24, "seed": 3})).await;
    let id = view.id.clone();
    while view.state == SessionState::AwaitingAnswer {
        view = answer(&app, &id, sweeter(&view)).await;
    }
    assert_eq!(view.state, SessionState::Idle);
    let (_, body) = send(&app, "GET", &format!("/sessions/{id}/model"), None, None).await;
    let model: ModelView = decode(&body);
    let explanation = model.explanation.unwrap();
    let rec = model.recommendation.unwrap();
    // scan every observed instance through the explanation's leaves
    let (_, body) = send(&app, "GET", &format!("/sessions/{id}/trace"), None, None).await;
    let trace: SessionTrace = decode(&body);
    let tree = explanation.root.to_tree_node();
    let means: Vec<f64> = explanation
        .root
        .leaves()
        .iter()
        .map(|l| match l {
            ExplanationNode::Leaf { mean, .. } => *mean,
            ExplanationNode::Rule { .. } => unreachable!(),
        })
        .collect();
    let observed: Vec<Instance> = trace
        .records
        .iter()
        .flat_map(|r| [r.queried.a.clone(), r.queried.b.clone()])
        .collect();
    for x in &observed {
        assert!(rec.mean >= means[tree.route(x)]);
    }
    assert_eq!(means[tree.route(&rec.instance)], rec.mean);
}

#[tokio::test]
async fn finished_sessions_reject_answers() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let view = create(&app, json!({"initial_pairs": 2, "iterations": 2})).await;
    let id = view.id.clone();
    let choice = sweeter(&view);
    let first = view.pending.clone().unwrap();
    answer(&app, &id, choice).await;
    let (status, body) = send(&app, "POST", &format!("/sessions/{id}/finish"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    let done: FinishResponse = decode(&body);
    assert_eq!(done.session.state, SessionState::Finished);
    assert!(done.session.pending.is_none());
    // one answer: the winner is the earliest observation and never ranks below the loser
    let winner = if choice == "A" { first.a } else { first.b };
    assert_eq!(done.model.recommendation.unwrap().instance, winner);
    let (status, body) = send(&app, "POST", &format!("/sessions/{id}/answer"), Some(json!({"choice": "A"})), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(decode::<ErrorBody>(&body).error, "conflict");
    let (status, _) = send(&app, "POST", &format!("/sessions/{id}/finish"), None, None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    // finished state survives a restart
    let app = self::app(dir.path());
    let (_, body) = send(&app, "GET", &format!("/sessions/{id}/pending"), None, None).await;
    assert_eq!(decode::<SessionView>(&body).state, SessionState::Finished);
}

#[tokio::test]
async fn unknown_sessions_and_bad_answers() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for (method, uri) in [
        ("GET", "/sessions/nope/pending"),
        ("GET", "/sessions/nope/model"),
        ("GET", "/sessions/nope/trace"),
        ("POST", "/sessions/nope/finish"),
    ] {
        let (status, body) = send(&app, method, uri, None, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(decode::<ErrorBody>(&body).error, "not_found");
    }
    let (status, _) = send(&app, "POST", "/sessions/nope/answer", Some(json!({"choice": "A"})), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let view = create(&app, json!({})).await;
    let (status, body) = send(&app, "POST", &format!("/sessions/{}/answer", view.id), Some(json!({"choice": "C"})), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(decode::<ErrorBody>(&body).field.as_deref(), Some("choice"));
}

#[tokio::test]
async fn stale_step_is_a_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let view = create(&app, json!({})).await;
    let uri = format!("/sessions/{}/answer", view.id);
    let (s1, _) = send(&app, "POST", &uri, Some(json!({"choice": "A", "step": 0})), None).await;
    let (s2, body) = send(&app, "POST", &uri, Some(json!({"choice": "A", "step": 0})), None).await;
    assert_eq!(s1, StatusCode::OK);
    assert_eq!(s2, StatusCode::CONFLICT);
    assert!(decode::<ErrorBody>(&body).message.contains("step 1"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submits_have_one_winner() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for round in 0..10 {
        let view = create(&app, json!({"initial_pairs": 30, "seed": round})).await;
        let uri = format!("/sessions/{}/answer", view.id);
        let requests = (0..4).map(|_| {
            let app = app.clone();
            let uri = uri.clone();
            tokio::spawn(async move { send(&app, "POST", &uri, Some(json!({"choice": "B", "step": 0})), None).await.0 })
        });
        let mut statuses = Vec::new();
        for r in requests {
            statuses.push(r.await.unwrap());
        }
        assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1, "{statuses:?}");
        assert!(statuses.iter().all(|s| *s == StatusCode::OK || *s == StatusCode::CONFLICT));
        let text = std::fs::read_to_string(dir.path().join(format!("{}.trace.jsonl", view.id))).unwrap();
        assert_eq!(text.lines().count(), 1);
    }
}
