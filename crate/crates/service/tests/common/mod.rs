use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use dosefind_service::{router, AppState, Options};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub fn app(dir: &std::path::Path) -> Router {
    router(AppState::open(dir, &Options::default()).expect("open data dir"))
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: axum::http::HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }
}

pub async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    Reply {
        status,
        headers,
        bytes,
    }
}

pub async fn create_trial(app: &Router, params: Value, num_doses: usize) -> (String, Value) {
    let r = send(
        app,
        "POST",
        "/api/trials",
        Some(serde_json::json!({ "params": params, "num_doses": num_doses })),
    )
    .await;
    assert_eq!(
        r.status,
        StatusCode::CREATED,
        "{}",
        String::from_utf8_lossy(&r.bytes)
    );
    let v = r.json();
    (v["id"].as_str().unwrap().to_owned(), v)
}

pub async fn post_cohort(app: &Router, id: &str, x: u32, n: u32, version: u64) -> Reply {
    send(
        app,
        "POST",
        &format!("/api/trials/{id}/cohorts"),
        Some(serde_json::json!({ "dlt_count": x, "cohort_n": n, "expected_version": version })),
    )
    .await
}
