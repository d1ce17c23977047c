use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use futures_util::StreamExt;
use http_body_util::BodyExt;
use porgysim::service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

const STAR: &str = "c l0\nc l1\nc l2\n";
const PATH: &str = "a b\nb c\nc d\n";

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

fn ic(edges: &str, seed: &str) -> Value {
    json!({
        "edgeList": edges,
        "config": {"model": {"kind": "ic"}, "init": {"seeds": [seed], "p": "const:1.0"}, "rng": {"seed": 42}}
    })
}

async fn create(app: &Router, body: Value) -> String {
    let (st, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_owned()
}

#[tokio::test]
async fn two_rounds_give_two_metric_rows() {
    let app = router(AppState::new(None));
    let id = create(&app, ic(STAR, "c")).await;
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/rounds"), Some(json!({"n": 2}))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let (st, m) = call(&app, "GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(st, StatusCode::OK);
    let steps = m["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 2);
    assert_eq!(steps[1]["active"], 4);
    assert_eq!(steps[1]["visited"], 3);
}

#[tokio::test]
async fn session_info_and_default_round() {
    let app = router(AppState::new(None));
    let id = create(&app, ic(PATH, "a")).await;
    let (_, info) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(info["model"], "IC");
    assert_eq!(info["cursor"], 0);
    assert!(info["strategy"].as_str().unwrap().contains("repeat(IC activate)"));
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/rounds"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["rounds"].as_array().unwrap().len(), 1);
    let (_, info) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(info["cursor"], v["cursor"]);
}

#[tokio::test]
async fn branching_from_an_earlier_state() {
    let app = router(AppState::new(None));
    let id = create(&app, ic(PATH, "a")).await;
    call(&app, "POST", &format!("/sessions/{id}/rounds"), Some(json!({"n": 2}))).await;
    let (_, tree) = call(&app, "GET", &format!("/sessions/{id}/tree"), None).await;
    assert_eq!(tree["leaves"].as_array().unwrap().len(), 1);
    let first_round_end = tree["groups"][0]["states"].as_array().unwrap().last().unwrap().clone();

    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/branch"), Some(json!({"state": first_round_end}))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["cursor"], first_round_end);
    call(&app, "POST", &format!("/sessions/{id}/rounds"), Some(json!({"n": 1}))).await;

    let (_, tree) = call(&app, "GET", &format!("/sessions/{id}/tree"), None).await;
    assert_eq!(tree["leaves"].as_array().unwrap().len(), 2);
    let node = tree["states"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["id"] == first_round_end)
        .unwrap();
    assert_eq!(node["children"].as_array().unwrap().len(), 2);
    assert_eq!(tree["groups"].as_array().unwrap().len(), 3);
    assert_eq!(tree["groups"][2]["start"], first_round_end);
}

#[tokio::test]
async fn states_and_traces() {
    let app = router(AppState::new(None));
    let id = create(&app, ic(STAR, "c")).await;
    call(&app, "POST", &format!("/sessions/{id}/rounds"), None).await;
    let (_, tree) = call(&app, "GET", &format!("/sessions/{id}/tree"), None).await;
    let states = tree["states"].as_array().unwrap();
    let last = states.last().unwrap();
    assert_eq!(last["rule"], "IC activate");
    assert_eq!(last["parent"], states[states.len() - 2]["id"]);
    let (st, full) = call(&app, "GET", &format!("/sessions/{id}/states/{}", last["id"]), None).await;
    assert_eq!(st, StatusCode::OK);
    let active = full["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|n| n["properties"]["active"] == json!({"kind": "bool", "v": true}))
        .count();
    assert_eq!(active, 4);

    let leaf = last["image"][0].as_u64().unwrap();
    let (st, tr) = call(&app, "GET", &format!("/sessions/{id}/trace/{leaf}"), None).await;
    assert_eq!(st, StatusCode::OK);
    let snaps = tr["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), states.len());
    assert!(snaps.last().unwrap()["changed"].as_bool().unwrap());
}

#[tokio::test]
async fn interactive_apply_and_setpos() {
    let app = router(AppState::new(None));
    let id = create(&app, ic(STAR, "c")).await;
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/apply"), Some(json!({"rule": "IC trial d2s", "match": "random"}))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let image = v["applied"]["image"].clone();
    assert_eq!(v["cursor"], v["applied"]["child"]);

    // The same trial cannot fire twice on one edge.
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/apply"), Some(json!({"rule": "IC trial d2s", "match": image}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{v}");
    assert_eq!(v["error"]["code"], "match");

    let (st, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/setpos"),
        Some(json!({"filter": "Property(CrtGraph,Node,sigma>=\"1\")"})),
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["selected"].as_array().unwrap().len(), 1);
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/apply"), Some(json!({"rule": "IC activate"}))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/apply"), Some(json!({"rule": "IC activate"}))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert!(v["applied"].is_null());
}

#[tokio::test]
async fn replacing_the_strategy() {
    let app = router(AppState::new(None));
    let id = create(&app, ic(STAR, "c")).await;
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/strategy"), Some(json!({"text": "repeat(IC trial d2s)"}))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["strategy"], "repeat(IC trial d2s)");
    call(&app, "POST", &format!("/sessions/{id}/rounds"), None).await;
    let (_, m) = call(&app, "GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(m["steps"][1]["active"], 1);
    assert_eq!(m["steps"][1]["visited"], 3);
}

#[tokio::test]
async fn error_statuses() {
    let app = router(AppState::new(None));
    let (st, v) = call(&app, "GET", "/sessions/nope/metrics", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "not-found");
    let id = create(&app, ic(STAR, "c")).await;
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}/states/99"), None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}/metrics?leaf=99"), None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(
        call(&app, "POST", &format!("/sessions/{id}/branch"), Some(json!({"state": 99}))).await.0,
        StatusCode::NOT_FOUND
    );
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/setpos"), Some(json!({"filter": "Property(Oops"}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "filter");
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/strategy"), Some(json!({"text": "repeat("}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "strategy");
    let (st, _) = call(&app, "POST", &format!("/sessions/{id}/strategy"), Some(json!({"text": "repeat(Nope)"}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/apply"), Some(json!({"rule": "IC activate", "match": "best"}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{v}");
    let lt = json!({"edgeList": STAR, "config": {"model": {"kind": "lt"}, "init": {"seeds": ["c"]}}});
    let (st, v) = call(&app, "POST", "/sessions", Some(lt)).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert!(v["error"]["message"].as_str().unwrap().contains("theta required for LT"));
    let (st, _) = call(&app, "POST", "/sessions", Some(json!({"edgeList": "a", "config": {"model": {"kind": "ic"}}}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn concurrent_rounds_conflict() {
    let app = router(AppState::new(None));
    let mut edges = String::new();
    for i in 1..400 {
        edges.push_str(&format!("v{} v{i}\n", (i - 1) / 2));
    }
    let id = create(&app, ic(&edges, "v0")).await;
    let uri = format!("/sessions/{id}/rounds");
    let body = Some(json!({"n": 20}));
    let (a, b) = tokio::join!(call(&app, "POST", &uri, body.clone()), call(&app, "POST", &uri, body.clone()));
    let mut codes = [a.0, b.0];
    codes.sort();
    assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
    let busy = if a.0 == StatusCode::CONFLICT { a.1 } else { b.1 };
    assert_eq!(busy["error"]["code"], "busy");

    // The winner's run is intact: a complete binary tree of depth 8 activates level by level.
    let (_, m) = call(&app, "GET", &format!("/sessions/{id}/metrics"), None).await;
    let active: Vec<u64> = m["steps"].as_array().unwrap().iter().map(|s| s["active"].as_u64().unwrap()).collect();
    assert_eq!(active, [1, 3, 7, 15, 31, 63, 127, 255, 400]);
}

#[tokio::test]
async fn persisted_sessions_reload() {
    let dir = tempfile::TempDir::new().unwrap();
    let first = router(AppState::new(Some(dir.path().to_owned())));
    let id = create(&first, ic(PATH, "a")).await;
    call(&first, "POST", &format!("/sessions/{id}/rounds"), Some(json!({"n": 2}))).await;
    let (_, before) = call(&first, "GET", &format!("/sessions/{id}/metrics"), None).await;
    assert!(dir.path().join(format!("{id}.json")).exists());

    let second = router(AppState::new(Some(dir.path().to_owned())));
    let (st, after) = call(&second, "GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(before, after);
    call(&second, "POST", &format!("/sessions/{id}/rounds"), None).await;
    let (_, more) = call(&second, "GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(more["steps"].as_array().unwrap().len(), 4);
    let other = create(&second, ic(STAR, "c")).await;
    assert_ne!(other, id);
    assert_eq!(call(&second, "GET", "/sessions/..%2Fx", None).await.0, StatusCode::NOT_FOUND);
}

async fn next_event(ws: &mut (impl StreamExt<Item = Result<tokio_tungstenite::tungstenite::Message, tokio_tungstenite::tungstenite::Error>> + Unpin)) -> Value {
    let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.unwrap().unwrap().unwrap();
    serde_json::from_str(msg.to_text().unwrap()).unwrap()
}

#[tokio::test]
async fn events_reach_every_subscriber() {
    let state = AppState::new(None);
    let app = router(Arc::clone(&state));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let served = router(Arc::clone(&state));
    tokio::spawn(async move { axum::serve(listener, served).await.unwrap() });

    let id = create(&app, ic(STAR, "c")).await;
    let url = format!("ws://{addr}/sessions/{id}/events");
    let (mut one, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let (mut two, _) = tokio_tungstenite::connect_async(&url).await.unwrap();

    let (st, _) = call(&app, "POST", &format!("/sessions/{id}/selection"), Some(json!({"elements": ["n5"]}))).await;
    assert_eq!(st, StatusCode::OK);
    for ws in [&mut one, &mut two] {
        let ev = next_event(ws).await;
        assert_eq!(ev, json!({"type": "selection", "payload": {"elements": ["n5"]}}));
    }

    call(&app, "POST", &format!("/sessions/{id}/rounds"), None).await;
    let (_, tree) = call(&app, "GET", &format!("/sessions/{id}/tree"), None).await;
    let applied = tree["states"].as_array().unwrap().len() - 1;
    for _ in 0..applied {
        let ev = next_event(&mut one).await;
        assert_eq!(ev["type"], "applied");
        assert!(ev["payload"]["rule"].as_str().unwrap().starts_with("IC "));
    }
    call(&app, "POST", &format!("/sessions/{id}/branch"), Some(json!({"state": 0}))).await;
    let ev = next_event(&mut one).await;
    assert_eq!(ev, json!({"type": "branch", "payload": {"cursor": 0}}));

    let err = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/missing/events")).await;
    assert!(err.is_err());
}
