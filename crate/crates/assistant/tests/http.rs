use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use gridplan::EngineConfig;
use gridplan_assistant::{router, AppState, Registry};

fn app() -> (Router, Arc<AppState>) {
    let state = AppState::new(Registry::builtin(), EngineConfig::default());
    (router(state.clone()), state)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(app: &Router, chronic: &str) -> String {
    let (status, body) = call(app, Method::POST, "/api/sessions", Some(json!({"grid": "grid14", "chronic": chronic}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

fn assert_error_shape(body: &Value) {
    assert!(body["code"].is_string());
    assert!(body["message"].is_string());
    assert!(body.get("detail").is_some());
}

#[tokio::test]
async fn create_gives_distinct_sessions_at_step_zero() {
    let (app, _) = app();
    let a = create(&app, "grid14-congested-2").await;
    let b = create(&app, "grid14-congested-2").await;
    assert_ne!(a, b);
    let (status, snap) = call(&app, Method::GET, &format!("/api/sessions/{a}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snap["step"], 0);
    assert_eq!(snap["mode"], "paused");
    assert_eq!(snap["lines"].as_array().unwrap().len(), 20);
}

#[tokio::test]
async fn errors_have_code_message_detail() {
    let (app, _) = app();
    let (status, body) = call(&app, Method::POST, "/api/sessions", Some(json!({"grid": "grid14", "chronic": "nope"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error_shape(&body);
    assert_eq!(body["code"], "unknown_chronic");
    assert!(body["message"].as_str().unwrap().contains("nope"));

    let (status, body) = call(&app, Method::GET, "/api/sessions/s999/state", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_session");

    let (status, body) = call(&app, Method::POST, "/api/sessions", Some(json!({"grid": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error_shape(&body);

    let id = create(&app, "grid14-calm-1").await;
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/api/sessions/{id}/simulate"),
        Some(json!({"action": {"type": "set_line_status", "line": "L99", "in_service": false}})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error_shape(&body);
}

#[tokio::test]
async fn safe_state_has_no_candidates() {
    let (app, _) = app();
    let id = create(&app, "grid14-calm-1").await;
    let (status, list) = call(&app, Method::GET, &format!("/api/sessions/{id}/candidates"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list["recommendations"].as_array().unwrap().len(), 0);
    assert_eq!(list["note"], "grid is safe");
}

#[tokio::test]
async fn operator_loop_over_http() {
    let (app, _) = app();
    let id = create(&app, "grid14-congested-7").await;
    let base = format!("/api/sessions/{id}");
    let list = loop {
        let (_, list) = call(&app, Method::GET, &format!("{base}/candidates"), None).await;
        if !list["recommendations"].as_array().unwrap().is_empty() {
            break list;
        }
        let (status, _) = call(&app, Method::POST, &format!("{base}/advance"), Some(json!({"steps": 1}))).await;
        assert_eq!(status, StatusCode::OK);
    };
    let recs = list["recommendations"].as_array().unwrap();
    let rank1 = &recs[0];
    assert_eq!(rank1["rank"], 1);
    assert_eq!(rank1["n1"]["screened"], 20);
    assert!(rank1["checks"]["n1"].is_object());

    let (_, warm) = call(&app, Method::GET, &format!("{base}/candidates"), None).await;
    assert_eq!(warm["cached"], true);
    assert_eq!(warm["recommendations"], list["recommendations"]);

    let (status, what_if) = call(&app, Method::POST, &format!("{base}/simulate"), Some(json!({"action": rank1["action"]}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(&what_if, rank1);

    let rank2 = &recs[1];
    let (status, staged) = call(
        &app,
        Method::POST,
        &format!("{base}/apply"),
        Some(json!({"candidate_id": rank2["candidate_id"]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(staged["candidate_id"], rank2["candidate_id"]);
    let (_, snap) = call(&app, Method::GET, &format!("{base}/state"), None).await;
    assert_eq!(snap["staged"]["candidate_id"], rank2["candidate_id"]);

    let step = list["step"].as_u64().unwrap();
    let (_, snap) = call(&app, Method::POST, &format!("{base}/advance"), Some(json!({"steps": 1}))).await;
    assert_eq!(snap["step"].as_u64().unwrap(), step + 1);
    assert!(snap["staged"].is_null());
    assert!(snap["substations"].as_array().unwrap().iter().any(|s| s["split"] == true));

    let (_, audit) = call(&app, Method::GET, &format!("{base}/audit"), None).await;
    let last = audit.as_array().unwrap().last().unwrap();
    assert_eq!(last["actor"], "operator");
    assert_eq!(last["event"], "advance");
    assert_eq!(last["action"], rank2["action"]);

    let (status, body) = call(&app, Method::POST, &format!("{base}/simulate"), Some(json!({"action": rank2["action"]}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "illegal_action");
    assert!(body["message"].as_str().unwrap().starts_with("cooldown: 3 steps remaining"));
    assert_eq!(body["detail"]["reason"], "substation_cooldown");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn snapshots_are_never_torn() {
    let (app, _) = app();
    let id = create(&app, "grid14-congested-5").await;
    let uri = format!("/api/sessions/{id}/state");
    let advancer = {
        let app = app.clone();
        let id = id.clone();
        tokio::spawn(async move {
            for _ in 0..10 {
                call(&app, Method::POST, &format!("/api/sessions/{id}/advance"), Some(json!({"steps": 5}))).await;
            }
        })
    };
    let mut seen = Vec::new();
    while !advancer.is_finished() {
        let (_, snap) = call(&app, Method::GET, &uri, None).await;
        let step = snap["step"].as_u64().unwrap();
        assert_eq!(step % 5, 0, "snapshot between two steps of one advance");
        assert_eq!(snap["history"].as_array().unwrap().len() as u64, step);
        let advances = snap["audit_tail"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|a| a["event"] == "advance")
            .map(|a| a["step"].as_u64().unwrap())
            .max();
        assert_eq!(advances.map(|s| s + 1), (step > 0).then_some(step));
        seen.push(step);
        tokio::task::yield_now().await;
    }
    advancer.await.unwrap();
    let (_, snap) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(snap["step"], 50);
    assert!(!seen.is_empty());
}

#[tokio::test]
async fn snapshots_persist_to_disk() {
    let (app, state) = app();
    let id = create(&app, "grid14-calm-3").await;
    call(&app, Method::POST, &format!("/api/sessions/{id}/advance"), Some(json!({"steps": 3}))).await;
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(state.save_snapshots(dir.path()).unwrap(), 1);
    let text = std::fs::read_to_string(dir.path().join(format!("{id}.json"))).unwrap();
    let snap: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(snap["step"], 3);
}
