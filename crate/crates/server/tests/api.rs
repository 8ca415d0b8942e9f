// SPDX-License-Identifier: Apache-2.0

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = beacon_server::app().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn health_reports_ok() {
    let (status, body) = call("GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn evaluate_perfect_detections() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    let dets = dir.path().join("detections.csv");
    std::fs::write(&truth, "frame_id,object_id,kind,dist_m,angle_deg\n0,0,beacon,5.0,2.0\n0,1,person_vest,9.0,-4.0\n").unwrap();
    std::fs::write(&dets, "frame_id,source,dist_m,angle_deg,conf\n0,fused,5.0,2.0,0.9\n").unwrap();
    let body = json!({
        "metrics": {},
        "detections": dets,
        "truth": truth,
        "out_dir": dir.path(),
    });
    let (status, out) = call("POST", "/v1/evaluate", Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["report"]["overall"]["tpr"], 1.0);
    assert_eq!(out["report"]["overall"]["fpr"], 0.0);
    assert!(dir.path().join("metrics.json").exists());
}

#[tokio::test]
async fn missing_input_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let body = json!({
        "metrics": {},
        "detections": dir.path().join("nope.csv"),
        "truth": dir.path().join("truth.csv"),
        "out_dir": dir.path(),
    });
    let (status, out) = call("POST", "/v1/evaluate", Some(body)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(out["error"].as_str().unwrap().contains("nope.csv"));
}

#[tokio::test]
async fn bad_scenario_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let body = json!({
        "scenario": "name = \"x\"\n[[random]]\nframes = -3\n",
        "seed": 1,
        "out_dir": dir.path(),
    });
    let (status, out) = call("POST", "/v1/simulate", Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(out["error"].as_str().unwrap().contains(":3:"), "{out}");
}

#[tokio::test]
async fn run_without_models_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let body = json!({
        "config": {},
        "dataset": dir.path(),
        "out_dir": dir.path(),
        "strict": false,
    });
    let (status, out) = call("POST", "/v1/run", Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(out["error"].as_str().unwrap().contains("svm_model"));
}

#[tokio::test]
async fn malformed_json_is_a_client_error() {
    let (status, _) = call("POST", "/v1/grid-search", Some(json!({"alphas": "x"}))).await;
    assert!(status.is_client_error());
}
