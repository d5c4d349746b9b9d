use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use dqm_core::simulator::{builtin_scenario, replay, MeasurementEvent};
use dqm_service::{Service, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn schema(name: &str) -> Value {
    let path = format!("{}/../../schemas/{name}.schema.json", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_schema(name: &str, instance: &Value) {
    if let Err(e) = jsonschema::validate(&schema(name), instance) {
        panic!("{name}: {e}\n{instance:#}");
    }
}

fn app(reveal_state: bool) -> Router {
    Service::new(ServiceConfig {
        reveal_state,
        ..Default::default()
    })
    .unwrap()
    .router()
    .unwrap()
}

async fn call_raw(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, bytes.to_vec())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(app: &Router, body: Value) -> Value {
    let (status, view) = call(app, "POST", "/api/sessions", Some(&body.to_string())).await;
    assert_eq!(status, StatusCode::CREATED, "{view}");
    view
}

async fn measure(app: &Router, id: &str, name: &str) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/api/sessions/{id}/measurements"),
        Some(&json!({ "measurement": name }).to_string()),
    )
    .await
}

fn probabilities(view: &Value, measurement: usize) -> Vec<f64> {
    view["measurements"][measurement]["predictions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["probability"].as_f64().unwrap())
        .collect()
}

#[tokio::test]
async fn same_seed_gives_identical_initial_predictions() {
    let app = app(false);
    let a = create(&app, json!({"scenario": "table1-pair", "seed": 7})).await;
    let b = create(&app, json!({"scenario": "table1-pair", "seed": 7})).await;
    assert_ne!(a["id"], b["id"]);
    assert_eq!(a["measurements"], b["measurements"]);
    assert_eq!(a["seed"], 7);
    for view in [&a, &b] {
        assert_schema("session_view_hidden", view);
        for m in 0..2 {
            let total: f64 = probabilities(view, m).iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
}

#[tokio::test]
async fn spin_scenario_exposes_z_and_x() {
    let app = app(false);
    let view = create(&app, json!({"scenario": "spin-zx", "seed": 1})).await;
    let names: Vec<&str> = view["measurements"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["Z", "X"]);
    for m in view["measurements"].as_array().unwrap() {
        assert_eq!(m["predictions"].as_array().unwrap().len(), 2);
    }
}

#[tokio::test]
async fn repeat_measurement_is_certain_and_collapses_predictions() {
    let app = app(false);
    let view = create(&app, json!({"scenario": "spin-zx", "seed": 3})).await;
    let id = view["id"].as_str().unwrap();
    let (status, first) = measure(&app, id, "Z").await;
    assert_eq!(status, StatusCode::OK);
    assert_schema("measurement_response", &first);
    assert_schema("session_view_hidden", &first["session"]);
    let (_, second) = measure(&app, id, "Z").await;
    assert_eq!(first["event"]["outcome_label"], second["event"]["outcome_label"]);
    assert_eq!(second["event"]["probability"], 1.0);
    assert_eq!(second["event"]["invalidated"], json!([]));
    let label = second["event"]["outcome_label"].as_str().unwrap();
    let dist = second["session"]["measurements"][0]["predictions"].as_array().unwrap();
    for entry in dist {
        let p = entry["probability"].as_f64().unwrap();
        assert_eq!(p, if entry["label"] == label { 1.0 } else { 0.0 });
    }
}

#[tokio::test]
async fn z_x_z_disagrees_about_half_the_time() {
    let app = app(false);
    let sessions = 400;
    let mut flips = 0;
    for seed in 0..sessions {
        let view = create(&app, json!({"scenario": "spin-zx", "seed": seed})).await;
        let id = view["id"].as_str().unwrap().to_string();
        let (_, a) = measure(&app, &id, "Z").await;
        measure(&app, &id, "X").await;
        let (_, c) = measure(&app, &id, "Z").await;
        let changed = a["event"]["outcome_label"] != c["event"]["outcome_label"];
        assert_eq!(changed, !c["event"]["invalidated"].as_array().unwrap().is_empty());
        flips += usize::from(changed);
    }
    let rate = flips as f64 / sessions as f64;
    let sigma = (0.25 / sessions as f64).sqrt();
    assert!((rate - 0.5).abs() <= 3.0 * sigma, "rate {rate}");
}

#[tokio::test]
async fn get_is_read_only_and_ordered() {
    let app = app(false);
    let view = create(&app, json!({"scenario": "table1-pair", "seed": 11})).await;
    let id = view["id"].as_str().unwrap();
    measure(&app, id, "A").await;
    measure(&app, id, "B").await;
    let (status, first) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(first, second);
    let history = first["history"].as_array().unwrap();
    assert_eq!(history.len(), 2);
    assert_eq!(history[0]["measurement"], "A");
    assert_eq!(history[1]["measurement"], "B");
    assert_eq!(history[1]["step_index"], 1);
}

#[tokio::test]
async fn delete_is_idempotent_in_the_404_sense() {
    let app = app(false);
    let view = create(&app, json!({"scenario": "table1-pair"})).await;
    let id = view["id"].as_str().unwrap();
    let uri = format!("/api/sessions/{id}");
    let (status, body) = call(&app, "DELETE", &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_schema("delete_response", &body);
    let (status, body) = call(&app, "GET", &uri, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_schema("error", &body);
    let (status, _) = call(&app, "DELETE", &uri, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn scenario_list_has_the_presets() {
    let app = app(false);
    let (status, body) = call(&app, "GET", "/api/scenarios", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_schema("scenario_list", &body);
    let names: Vec<&str> = body["scenarios"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["table1-pair", "spin-zx", "fourier-n"]);
    assert!(!body.to_string().contains("eigenstate"));
}

#[tokio::test]
async fn error_statuses() {
    let app = app(false);
    let cases = [
        (
            "POST",
            "/api/sessions".to_string(),
            Some(r#"{"scenario": "no-such"}"#),
            StatusCode::NOT_FOUND,
        ),
        (
            "POST",
            "/api/sessions".to_string(),
            Some("{not json"),
            StatusCode::BAD_REQUEST,
        ),
        ("POST", "/api/sessions".to_string(), None, StatusCode::BAD_REQUEST),
        (
            "POST",
            "/api/sessions".to_string(),
            Some(r#"{"seed": 1}"#),
            StatusCode::BAD_REQUEST,
        ),
        (
            "POST",
            "/api/sessions".to_string(),
            Some(r#"{"scenario": "spin-zx", "bogus": 1}"#),
            StatusCode::BAD_REQUEST,
        ),
        (
            "POST",
            "/api/sessions".to_string(),
            Some(r#"{"scenario": "spin-zx", "seed": -4}"#),
            StatusCode::BAD_REQUEST,
        ),
        (
            "POST",
            "/api/sessions".to_string(),
            Some(r#"{"scenario": "spin-zx", "dim": 3}"#),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        ("GET", "/api/sessions/deadbeef".to_string(), None, StatusCode::NOT_FOUND),
        (
            "POST",
            "/api/sessions/deadbeef/measurements".to_string(),
            Some(r#"{"measurement": "Z"}"#),
            StatusCode::NOT_FOUND,
        ),
        ("GET", "/api/nothing".to_string(), None, StatusCode::NOT_FOUND),
    ];
    for (method, uri, body, want) in cases {
        let (status, value) = call(&app, method, &uri, body).await;
        assert_eq!(status, want, "{method} {uri} {body:?}: {value}");
        assert_schema("error", &value);
    }

    let view = create(&app, json!({"scenario": "fourier-n", "dim": 4, "seed": 2})).await;
    assert_eq!(view["dim"], 4);
    let id = view["id"].as_str().unwrap();
    let (status, value) = measure(&app, id, "Q").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_schema("error", &value);
    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/measurements"),
        Some(r#"{"name": "A"}"#),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, after) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(after["history"], json!([]));
}

#[tokio::test]
async fn hidden_views_carry_no_amplitudes() {
    let app = app(false);
    let view = create(&app, json!({"scenario": "spin-zx", "seed": 5})).await;
    assert!(view.get("state").is_none());
    let id = view["id"].as_str().unwrap();
    let (_, response) = measure(&app, id, "X").await;
    assert_schema("session_view_hidden", &response["session"]);
    let revealed = app_with_state_of(&view).await;
    assert!(!jsonschema::is_valid(&schema("session_view_hidden"), &revealed));
}

async fn app_with_state_of(view: &Value) -> Value {
    let app = app(true);
    create(&app, json!({"scenario": view["scenario"], "seed": view["seed"]})).await
}

#[tokio::test]
async fn revealed_state_is_consistent_with_predictions() {
    let app = app(true);
    let view = create(&app, json!({"scenario": "table1-pair", "seed": 9})).await;
    assert_schema("session_view", &view);
    let state = view["state"].as_array().unwrap();
    let norm: f64 = state
        .iter()
        .map(|z| z[0].as_f64().unwrap().powi(2) + z[1].as_f64().unwrap().powi(2))
        .sum();
    assert!((norm - 1.0).abs() < 1e-9);
    // Measurement A is the standard basis, so its predictions are |amplitude|².
    let p = probabilities(&view, 0);
    for (z, p) in state.iter().zip(p) {
        let modulus = z[0].as_f64().unwrap().powi(2) + z[1].as_f64().unwrap().powi(2);
        assert!((modulus - p).abs() < 1e-12);
    }
    let id = view["id"].as_str().unwrap();
    let (_, response) = measure(&app, id, "A").await;
    let label = response["event"]["outcome_label"].as_str().unwrap();
    let k = if label == "a+" { 0 } else { 1 };
    let collapsed = response["session"]["state"].as_array().unwrap();
    assert_eq!(collapsed[k], json!([1.0, 0.0]));
}

#[tokio::test]
async fn custom_scenarios_enter_through_the_api() {
    let app = app(false);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let definition = json!({
        "name": "qubit-pair",
        "measurements": [
            {"name": "P", "outcomes": [
                {"label": "0", "value": 0.0, "eigenstate": [[1.0, 0.0], [0.0, 0.0]]},
                {"label": "1", "value": 1.0, "eigenstate": [[0.0, 0.0], [1.0, 0.0]]}]},
            {"name": "Y", "outcomes": [
                {"label": "+i", "value": 1.0, "eigenstate": [[h, 0.0], [0.0, h]]},
                {"label": "-i", "value": -1.0, "eigenstate": [[h, 0.0], [0.0, -h]]}]}
        ],
        "initial_state": {"kind": "fixed", "state": [[1.0, 0.0], [0.0, 0.0]]}
    });
    let view = create(&app, json!({"scenario": definition, "seed": 4})).await;
    assert_eq!(view["scenario"], "qubit-pair");
    assert_eq!(probabilities(&view, 0), vec![1.0, 0.0]);
    let y = probabilities(&view, 1);
    assert!((y[0] - 0.5).abs() < 1e-12);

    let mut broken = definition.clone();
    broken["measurements"][1]["outcomes"][1]["eigenstate"] = json!([[h, 0.0], [0.0, h]]);
    let (status, body) = call(
        &app,
        "POST",
        "/api/sessions",
        Some(&json!({"scenario": broken}).to_string()),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
}

#[tokio::test]
async fn library_replay_reproduces_the_history_bytes() {
    let app = app(false);
    let view = create(&app, json!({"scenario": "spin-zx", "seed": 123})).await;
    let id = view["id"].as_str().unwrap();
    let actions = ["Z", "X", "X", "Z", "X", "Z", "Z"];
    for a in actions {
        measure(&app, id, a).await;
    }
    let (_, session) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    let served: Vec<MeasurementEvent> = serde_json::from_value(session["history"].clone()).unwrap();
    let actions: Vec<String> = actions.iter().map(|s| s.to_string()).collect();
    let replayed = replay(Arc::new(builtin_scenario("spin-zx", None).unwrap()), 123, &actions).unwrap();
    assert_eq!(
        serde_json::to_string(&served).unwrap(),
        serde_json::to_string(&replayed).unwrap()
    );
    assert_history_bytes(&app, id, &replayed).await;
}

/// The served body embeds the replayed history verbatim.
async fn assert_history_bytes(app: &Router, id: &str, replayed: &[MeasurementEvent]) {
    let (_, raw) = call_raw(app, "GET", &format!("/api/sessions/{id}"), None).await;
    let raw = String::from_utf8(raw).unwrap();
    let expected = format!("\"history\":{}", serde_json::to_string(replayed).unwrap());
    assert!(raw.contains(&expected), "{raw}\n{expected}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_measurements_are_serialized() {
    let app = app(false);
    let view = create(&app, json!({"scenario": "table1-pair", "seed": 77})).await;
    let id = view["id"].as_str().unwrap().to_string();
    let mut tasks = Vec::new();
    for i in 0..64 {
        let app = app.clone();
        let id = id.clone();
        tasks.push(tokio::spawn(async move {
            measure(&app, &id, if i % 2 == 0 { "A" } else { "B" }).await
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap().0, StatusCode::OK);
    }
    let (_, session) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    let history = session["history"].as_array().unwrap();
    assert_eq!(history.len(), 64);
    for (i, e) in history.iter().enumerate() {
        assert_eq!(e["step_index"], i);
    }
    // Whatever order the server chose, replaying it reproduces the same log.
    let actions: Vec<String> = history
        .iter()
        .map(|e| e["measurement"].as_str().unwrap().to_string())
        .collect();
    let replayed = replay(Arc::new(builtin_scenario("table1-pair", None).unwrap()), 77, &actions).unwrap();
    assert_history_bytes(&app, &id, &replayed).await;
}

#[tokio::test]
async fn cors_headers_are_present() {
    let app = app(false);
    let request = Request::builder()
        .method("OPTIONS")
        .uri("/api/sessions")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let response = app.oneshot(request).await.unwrap();
    assert!(response.headers().contains_key("access-control-allow-origin"));
}

#[tokio::test]
async fn snapshot_round_trip_restores_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sessions.json");
    let config = ServiceConfig {
        snapshot_path: Some(path.clone()),
        ..Default::default()
    };
    let service = Service::new(config.clone()).unwrap();
    let app = service.router().unwrap();
    let view = create(&app, json!({"scenario": "spin-zx", "seed": 31})).await;
    let id = view["id"].as_str().unwrap().to_string();
    for a in ["Z", "X", "Z"] {
        measure(&app, &id, a).await;
    }
    let (_, before) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    service.save_snapshot().unwrap();

    let restored = Service::new(config).unwrap();
    assert_eq!(restored.store().len(), 1);
    let app = restored.router().unwrap();
    let (status, after) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before, after);
    // The restored random stream continues where the original left off.
    let (_, next) = measure(&app, &id, "X").await;
    let actions: Vec<String> = ["Z", "X", "Z", "X"].iter().map(|s| s.to_string()).collect();
    let replayed = replay(Arc::new(builtin_scenario("spin-zx", None).unwrap()), 31, &actions).unwrap();
    assert_eq!(next["event"], serde_json::to_value(&replayed[3]).unwrap());
}
