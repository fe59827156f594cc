use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use shadowtale::script::Session;
use shadowtale::{Dictionary, Engine, EngineConfig};
use shadowtale_service::{router, ServiceOptions};
use tower::ServiceExt;

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(repo().join(rel)).unwrap()
}

fn session(config: EngineConfig) -> Session {
    let dict = Dictionary::load(&read("scenarios/restaurant.dict")).unwrap();
    Session::new(Engine::new(Arc::new(dict), config))
}

fn app() -> Router {
    router(session(EngineConfig::default()), ServiceOptions::default())
}

fn oracle_app() -> Router {
    router(session(EngineConfig::oracle()), ServiceOptions::default())
}

fn schema_errors(def: &str, body: &Value) -> Vec<String> {
    let doc: Value = serde_json::from_str(&read("docs/api-schema.json")).unwrap();
    let schema = json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "$defs": doc["$defs"],
        "$ref": format!("#/$defs/{def}"),
    });
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator.iter_errors(body).map(|e| e.to_string()).collect()
}

/// Validates `body` against a definition of the published schema.
fn assert_schema(def: &str, body: &Value) {
    let errors = schema_errors(def, body);
    assert!(errors.is_empty(), "{def}: {errors:?}\n{body:#}");
}

/// Sends a request and checks the body against the schema of `ok_def`
/// (or ApiError when the status is not 200).
async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
    ok_def: &str,
) -> (StatusCode, Value) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => request
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value: Value = serde_json::from_slice(&bytes).unwrap();
    if status == StatusCode::OK {
        assert_schema(ok_def, &value);
    } else {
        assert_schema("ApiError", &value);
        assert_eq!(value["httpStatus"], status.as_u16());
    }
    (status, value)
}

async fn narrate(app: &Router, text: &str) -> (StatusCode, Value) {
    call(
        app,
        Method::POST,
        "/api/narrate",
        Some(json!({ "text": text })),
        "NarrateResponse",
    )
    .await
}

async fn hash(app: &Router) -> String {
    let (_, v) = call(app, Method::GET, "/api/state/hash", None, "HashResponse").await;
    v["hash"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn narrate_single_sentence() {
    let app = app();
    let (status, body) = narrate(&app, "A man / waves.").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({ "inserted": [2], "diagnostics": [] }));
}

#[tokio::test]
async fn narrate_resolves_references() {
    let app = app();
    let (_, body) = narrate(&app, "A man / waves.\nThe man / sits.").await;
    let ids = body["inserted"].as_array().unwrap();
    assert_eq!(ids.len(), 2);
    let (_, focus) = call(&app, Method::GET, "/api/focus", None, "FocusListing").await;
    let vis = focus["vis"].as_array().unwrap();
    assert_eq!(vis[0]["subject"], vis[1]["subject"]);
    assert_eq!(vis[1]["id"], ids[1]);
}

#[tokio::test]
async fn unknown_word_leaves_state_unchanged() {
    let app = app();
    let before = hash(&app).await;
    let (status, body) = narrate(&app, "A xyzzy / waves.").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "unknown_word");
    assert_eq!(body["location"], json!({ "line": 1, "col": 3 }));
    assert_eq!(body["inserted"], json!([]));
    assert_eq!(hash(&app).await, before);
}

#[tokio::test]
async fn earlier_lines_persist_after_an_error() {
    let app = app();
    let (status, body) = narrate(&app, "A man / waves.\nman / sits.\nThe man / sits.").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "parse_error");
    assert_eq!(body["location"]["line"], 2);
    assert_eq!(body["inserted"], json!([2]));
    let (_, focus) = call(&app, Method::GET, "/api/focus", None, "FocusListing").await;
    assert_eq!(focus["vis"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn no_referent_and_directives_are_rejected() {
    let app = app();
    let (status, body) = narrate(&app, "The dog / sits.").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "no_referent");
    let (status, body) = narrate(&app, "A man / waves.\n  !hls 3").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");
    assert_eq!(body["location"], json!({ "line": 2, "col": 3 }));
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let app = app();
    for (uri, body) in [
        ("/api/narrate", json!({ "txt": "A man / waves." })),
        ("/api/narrate", json!("A man / waves.")),
        ("/api/confabulate", json!({ "steps": -1 })),
        ("/api/cloze", json!({})),
    ] {
        let (status, v) = call(&app, Method::POST, uri, Some(body), "").await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_eq!(v["code"], "bad_request");
    }
}

#[tokio::test]
async fn fresh_engine_views() {
    let app = app();
    let (_, focus) = call(&app, Method::GET, "/api/focus", None, "FocusListing").await;
    assert_eq!(focus["instances"], json!([]));
    assert_eq!(focus["vis"], json!([]));
    let (status, body) = call(&app, Method::GET, "/api/shadow/1", None, "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_id");
    let (status, _) = call(&app, Method::GET, "/api/shadow/one", None, "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, hls) = call(&app, Method::GET, "/api/hls", None, "CandidateListing").await;
    assert_eq!(hls["candidates"], json!([]));
    let (_, mem) = call(&app, Method::GET, "/api/memory", None, "MemoryListing").await;
    assert_eq!(mem["records"], json!([]));
    let (status, _) = call(&app, Method::GET, "/api/nothing", None, "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn reads_never_change_the_hash() {
    let app = oracle_app();
    narrate(&app, &read("scenarios/restaurant-corpus.pidgin")).await;
    narrate(
        &app,
        "A customer / enters.\nThe customer / orders / a soup.",
    )
    .await;
    let first = hash(&app).await;
    assert_eq!(hash(&app).await, first);
    call(&app, Method::GET, "/api/focus", None, "FocusListing").await;
    call(
        &app,
        Method::GET,
        "/api/hls?top=3",
        None,
        "CandidateListing",
    )
    .await;
    call(
        &app,
        Method::GET,
        "/api/memory?from=1&to=40",
        None,
        "MemoryListing",
    )
    .await;
    call(&app, Method::GET, "/api/shadow/1", None, "ShadowListing").await;
    call(
        &app,
        Method::POST,
        "/api/cloze",
        Some(json!({ "position": 1 })),
        "CandidateListing",
    )
    .await;
    assert_eq!(hash(&app).await, first);
}

#[tokio::test]
async fn query_validation() {
    let app = app();
    for uri in [
        "/api/hls?top=x",
        "/api/hls?top=-1",
        "/api/hls?n=3",
        "/api/memory?from=5&to=2",
        "/api/memory?from=a",
    ] {
        let (status, body) = call(&app, Method::GET, uri, None, "").await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_eq!(body["code"], "bad_request");
    }
}

#[tokio::test]
async fn memory_range_filters_by_id() {
    let app = app();
    narrate(&app, "A man / waves.\n----\nA dog / sits.").await;
    let (_, all) = call(&app, Method::GET, "/api/memory", None, "MemoryListing").await;
    assert_eq!(all["records"].as_array().unwrap().len(), 4);
    let (_, some) = call(
        &app,
        Method::GET,
        "/api/memory?from=2&to=3",
        None,
        "MemoryListing",
    )
    .await;
    let ids: Vec<_> = some["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["id"].clone())
        .collect();
    assert_eq!(ids, [json!(2), json!(3)]);
}

#[tokio::test]
async fn shadow_of_a_focus_entity() {
    let app = app();
    narrate(&app, "A man / waves.\n----\nA man / waves.").await;
    let (status, body) = call(&app, Method::GET, "/api/shadow/4", None, "ShadowListing").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["owner"], 4);
    assert_eq!(body["entries"][0]["id"], 2);
}

#[tokio::test]
async fn confabulate_needs_steps() {
    let app = app();
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/confabulate",
        Some(json!({ "steps": 0 })),
        "",
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");
}

#[tokio::test]
async fn restaurant_cloze_and_confabulation() {
    let app = oracle_app();
    narrate(&app, &read("scenarios/restaurant-corpus.pidgin")).await;
    let before = hash(&app).await;
    narrate(
        &app,
        "A customer / enters.\nThe customer / orders / a soup.\nThe customer / pays / a bill.",
    )
    .await;
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/cloze",
        Some(json!({ "position": 2 })),
        "CandidateListing",
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let top = &body["candidates"][0];
    assert_eq!(top["verbs"], json!({ "eats": 1.0 }));
    assert!((top["score"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/cloze",
        Some(json!({ "position": 9, "top": 1 })),
        "",
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_position");
    assert_ne!(hash(&app).await, before);

    let app = oracle_app();
    narrate(&app, &read("scenarios/restaurant-corpus.pidgin")).await;
    narrate(&app, "A customer / enters.").await;
    let (_, hls) = call(
        &app,
        Method::GET,
        "/api/hls?top=1",
        None,
        "CandidateListing",
    )
    .await;
    assert_eq!(hls["candidates"][0]["verbs"], json!({ "orders": 1.0 }));
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/confabulate",
        Some(json!({ "steps": 4 })),
        "ConfabulateResponse",
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["inserted"].as_array().unwrap().len(), 4);
    let verbs: Vec<String> = body["vis"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| {
            v["verbs"]
                .as_object()
                .unwrap()
                .keys()
                .next()
                .unwrap()
                .clone()
        })
        .collect();
    assert_eq!(verbs, ["orders", "eats", "pays", "leaves"]);
    assert!(body["vis"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v["provenance"] == "confabulated"));
}

#[tokio::test]
async fn full_write_queue_answers_503() {
    let app = router(
        session(EngineConfig::default()),
        ServiceOptions {
            queue_depth: 0,
            static_dir: None,
        },
    );
    let (status, body) = narrate(&app, "A man / waves.").await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["httpStatus"], 503);
    // Reads are not queued.
    let (status, _) = call(&app, Method::GET, "/api/focus", None, "FocusListing").await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_narrations_do_not_interleave() {
    let app = app();
    let story = "A man / enters.\nThe man / orders / a soup.\nThe man / eats / the soup.\nThe man / pays / a bill.\nThe man / leaves.\n----";
    let mut tasks = Vec::new();
    for _ in 0..16 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move { narrate(&app, story).await }));
    }
    let mut blocks = Vec::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        let ids: Vec<u64> = body["inserted"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        assert_eq!(ids.len(), 5);
        blocks.push(ids);
    }
    // Each request's VIs are consecutive in the memory log.
    let (_, mem) = call(&app, Method::GET, "/api/memory", None, "MemoryListing").await;
    let mut tick_of = std::collections::BTreeMap::new();
    for r in mem["records"].as_array().unwrap() {
        if r["kind"] == "vi" {
            tick_of.insert(r["id"].as_u64().unwrap(), r["tick"].as_u64().unwrap());
        }
    }
    for ids in blocks {
        let ticks: Vec<u64> = ids.iter().map(|id| tick_of[id]).collect();
        assert!(ticks.windows(2).all(|w| w[1] == w[0] + 1), "{ticks:?}");
    }
}

#[tokio::test]
async fn serves_static_ui() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>ui</h1>").unwrap();
    let app = router(
        session(EngineConfig::default()),
        ServiceOptions {
            static_dir: Some(dir.path().to_path_buf()),
            ..ServiceOptions::default()
        },
    );
    let response = app
        .clone()
        .oneshot(Request::get("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<h1>ui</h1>");
    let (status, _) = call(&app, Method::GET, "/api/focus", None, "FocusListing").await;
    assert_eq!(status, StatusCode::OK);
}

#[test]
fn schema_rejects_malformed_bodies() {
    let instance = json!({
        "id": 1, "overlay": {"man": 1.0}, "salience": 1.0,
        "createdTick": 0, "lastReferencedTick": 0, "demoted": false
    });
    assert!(schema_errors("Instance", &instance).is_empty());
    let mut extra = instance.clone();
    extra["color"] = json!("red");
    assert!(!schema_errors("Instance", &extra).is_empty());
    let mut record = instance.clone();
    record["kind"] = json!("instance");
    assert!(!schema_errors("MemoryRecord", &record).is_empty());
    record["memorySalience"] = json!(null);
    assert!(schema_errors("MemoryRecord", &record).is_empty());
    record["kind"] = json!("vi");
    assert!(!schema_errors("MemoryRecord", &record).is_empty());
    let error = json!({"httpStatus": 400, "code": "oops", "message": "m"});
    assert!(!schema_errors("ApiError", &error).is_empty());
    assert!(!schema_errors("HashResponse", &json!({"hash": "abc"})).is_empty());
}
