use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use planverify_core::replan::LoopConfig;
use planverify_core::translator::{MockLlm, PlannerScript};
use planverify_service::{
    router, AppState, SessionStore, ERROR_SCHEMA, REPORT_SCHEMA, SESSION_SCHEMA,
};
use serde_json::{json, Value};
use tower::ServiceExt;

const PROMPT: &str = include_str!("../../../fixtures/scenario_prompt.txt");

fn state(dir: &std::path::Path, script: PlannerScript) -> Arc<AppState> {
    let store = SessionStore::open(dir).unwrap();
    Arc::new(AppState::new(
        store,
        Arc::new(MockLlm::new(script)),
        LoopConfig::default(),
    ))
}

async fn call(
    state: &Arc<AppState>,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn assert_valid(schema: &str, doc: &Value) {
    let schema: Value = serde_json::from_str(schema).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}

async fn confirmed_session(state: &Arc<AppState>, id: &str, seed: u64) -> Value {
    let (status, session) = call(
        state,
        "POST",
        "/sessions",
        Some(json!({"prompt": PROMPT, "id": id, "seed": seed})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{session}");
    assert_valid(SESSION_SCHEMA, &session);
    let selections: Vec<Value> = session["drafts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| json!({"draft_id": d["id"], "action": "accept"}))
        .collect();
    let (status, session) = call(
        state,
        "POST",
        &format!("/sessions/{id}/rules/confirm"),
        Some(json!({ "selections": selections })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{session}");
    assert_eq!(session["status"], "running");
    assert_eq!(session["confirmed"].as_array().unwrap().len(), 5);
    session
}

#[tokio::test]
async fn failing_script_exhausts_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), PlannerScript::Failure);
    confirmed_session(&st, "esc", 7).await;
    let (status, run) = call(&st, "POST", "/sessions/esc/run", Some(json!({}))).await;
    assert_eq!(status, StatusCode::OK, "{run}");
    assert_eq!(run["status"], "exhausted_invalid");
    assert_eq!(run["iterations"].as_array().unwrap().len(), 3);
    assert_valid(SESSION_SCHEMA, &run["session"]);

    let (status, report) = call(&st, "GET", "/sessions/esc/report", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_valid(REPORT_SCHEMA, &report);
    assert_eq!(report["plan_valid"], false);
    let r4 = report["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["constraint_id"] == "R4")
        .unwrap();
    assert_eq!(r4["verdict"], json!({"holds": false, "violation_index": 1}));
}

#[tokio::test]
async fn success_script_reaches_a_valid_plan() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), PlannerScript::Success);
    confirmed_session(&st, "ok", 1).await;
    let (status, run) = call(&st, "POST", "/sessions/ok/run", None).await;
    assert_eq!(status, StatusCode::OK, "{run}");
    assert_eq!(run["status"], "valid");
    assert_eq!(run["iterations"].as_array().unwrap().len(), 2);
    let (_, report) = call(&st, "GET", "/sessions/ok/report", None).await;
    assert_eq!(report["plan_valid"], true);
}

#[tokio::test]
async fn relaxing_a_rule_then_rerunning_accepts_the_same_plan() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), PlannerScript::Failure);
    confirmed_session(&st, "flex", 3).await;
    call(&st, "POST", "/sessions/flex/run", None).await;
    let (status, session) = call(
        &st,
        "POST",
        "/sessions/flex/strictness",
        Some(json!({"constraint_id": "R4", "weight": 0.0})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{session}");
    let (_, run) = call(&st, "POST", "/sessions/flex/run", None).await;
    assert_eq!(run["status"], "valid");
    assert_eq!(run["run"], 1);
    assert_eq!(run["iterations"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn errors_carry_codes_and_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), PlannerScript::Failure);
    confirmed_session(&st, "e", 0).await;

    let cases = [
        (
            "POST",
            "/sessions/e/strictness",
            Some(json!({"constraint_id": "R4", "weight": 1.5})),
            StatusCode::UNPROCESSABLE_ENTITY,
            "weight_out_of_range",
        ),
        (
            "POST",
            "/sessions/e/strictness",
            Some(json!({"constraint_id": "R9", "weight": 0.5})),
            StatusCode::NOT_FOUND,
            "unknown_constraint",
        ),
        (
            "GET",
            "/sessions/nope",
            None,
            StatusCode::NOT_FOUND,
            "unknown_session",
        ),
        (
            "POST",
            "/sessions/nope/run",
            None,
            StatusCode::NOT_FOUND,
            "unknown_session",
        ),
        (
            "GET",
            "/sessions/e/report",
            None,
            StatusCode::NOT_FOUND,
            "no_report",
        ),
        (
            "POST",
            "/sessions",
            Some(json!({"prompt": "x", "id": "e"})),
            StatusCode::CONFLICT,
            "session_exists",
        ),
        (
            "POST",
            "/sessions",
            Some(json!({"prompt": "x", "bogus": 1})),
            StatusCode::BAD_REQUEST,
            "invalid_request",
        ),
        (
            "POST",
            "/sessions",
            Some(json!({"prompt": "x", "id": "../etc"})),
            StatusCode::BAD_REQUEST,
            "invalid_request",
        ),
        (
            "GET",
            "/schemas/other",
            None,
            StatusCode::NOT_FOUND,
            "unknown_schema",
        ),
    ];
    for (method, uri, body, want, code) in cases {
        let (status, err) = call(&st, method, uri, body).await;
        assert_eq!(status, want, "{method} {uri}: {err}");
        assert_eq!(err["code"], code, "{method} {uri}");
        assert_valid(ERROR_SCHEMA, &err);
    }
}

#[tokio::test]
async fn held_lock_yields_busy() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), PlannerScript::Failure);
    confirmed_session(&st, "busy", 0).await;
    let lock = st.lock_for("busy");
    let guard = lock.lock().await;
    let (status, err) = call(&st, "POST", "/sessions/busy/run", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "session_busy");
    // Reads do not take the lock.
    let (status, _) = call(&st, "GET", "/sessions/busy", None).await;
    assert_eq!(status, StatusCode::OK);
    drop(guard);
    let (status, _) = call(&st, "POST", "/sessions/busy/run", None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn sessions_survive_a_restart_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let before = {
        let st = state(dir.path(), PlannerScript::Success);
        confirmed_session(&st, "keep", 99).await;
        call(&st, "POST", "/sessions/keep/run", None).await;
        let (_, s) = call(&st, "GET", "/sessions/keep", None).await;
        s
    };
    let st = state(dir.path(), PlannerScript::Success);
    let (status, after) = call(&st, "GET", "/sessions/keep", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before, after);
    let (_, list) = call(&st, "GET", "/sessions", None).await;
    assert_eq!(list, json!({"sessions": ["keep"]}));
    // No temporary files are left behind.
    let names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, vec!["keep.json".to_string()]);
}

#[tokio::test]
async fn restart_and_ask() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), PlannerScript::Failure);
    confirmed_session(&st, "r", 5).await;
    call(&st, "POST", "/sessions/r/run", None).await;
    let (status, session) = call(&st, "POST", "/sessions/r/restart", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(session["current_plan"], Value::Null);
    let (status, answer) = call(
        &st,
        "POST",
        "/sessions/r/ask",
        Some(json!({"question": "why did the plan fail?"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(
        answer["answer"].as_str().unwrap().contains("R4"),
        "{answer}"
    );
}

#[tokio::test]
async fn schemas_are_served() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), PlannerScript::Success);
    for name in ["session", "report", "error"] {
        let (status, doc) = call(&st, "GET", &format!("/schemas/{name}"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(
            doc["$schema"],
            "https://json-schema.org/draft/2020-12/schema"
        );
        jsonschema::validator_for(&doc).unwrap();
    }
}
