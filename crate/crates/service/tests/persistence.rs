#[allow(dead_code)]
mod common;

use std::fs::{self, OpenOptions};
use std::io::Write;

use axum::http::StatusCode;
use common::{app, create_trial, post_cohort, send};
use dosefind_service::{AppState, Options};
use serde_json::json;

fn log_path(dir: &std::path::Path, id: &str) -> std::path::PathBuf {
    dir.join("sessions").join(id).join("events.jsonl")
}

#[tokio::test]
async fn reopen_restores_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before) = {
        let app = app(dir.path());
        let (id, _) = create_trial(&app, json!({ "p_T": 0.3, "max_n": 30 }), 5).await;
        for (v, x) in [(1, 0), (2, 0), (3, 1)] {
            assert_eq!(post_cohort(&app, &id, x, 3, v).await.status, StatusCode::OK);
        }
        let before = send(&app, "GET", &format!("/api/trials/{id}"), None)
            .await
            .json();
        (id, before)
    };
    let app = app(dir.path());
    let after = send(&app, "GET", &format!("/api/trials/{id}"), None)
        .await
        .json();
    assert_eq!(after, before);
    assert_eq!(post_cohort(&app, &id, 2, 3, 4).await.status, StatusCode::OK);
}

#[tokio::test]
async fn snapshots_agree_with_full_replay() {
    let dir = tempfile::tempdir().unwrap();
    let app1 = app(dir.path());
    let (id, _) = create_trial(
        &app1,
        json!({ "p_T": 0.3, "max_n": 30, "cohort_size": 1 }),
        4,
    )
    .await;
    for v in 1..=20 {
        let x = u32::from(v % 4 == 0);
        assert_eq!(
            post_cohort(&app1, &id, x, 1, v).await.status,
            StatusCode::OK
        );
    }
    let before = send(&app1, "GET", &format!("/api/trials/{id}"), None)
        .await
        .json();
    drop(app1);
    let session_dir = dir.path().join("sessions").join(&id);
    assert!(session_dir.join("snapshot.json").exists());

    let from_snapshot = send(&app(dir.path()), "GET", &format!("/api/trials/{id}"), None)
        .await
        .json();
    assert_eq!(from_snapshot, before);
    fs::remove_file(session_dir.join("snapshot.json")).unwrap();
    let from_log = send(&app(dir.path()), "GET", &format!("/api/trials/{id}"), None)
        .await
        .json();
    assert_eq!(from_log, before);
}

#[tokio::test]
async fn torn_trailing_record_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let app = app(dir.path());
        let (id, _) = create_trial(&app, json!({ "p_T": 0.3, "max_n": 30 }), 3).await;
        post_cohort(&app, &id, 0, 3, 1).await;
        id
    };
    let path = log_path(dir.path(), &id);
    let good = fs::read(&path).unwrap();
    OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap()
        .write_all(br#"{"type":"cohort","version":3,"at":"2026"#)
        .unwrap();

    let app = app(dir.path());
    assert_eq!(fs::read(&path).unwrap(), good);
    let trial = send(&app, "GET", &format!("/api/trials/{id}"), None)
        .await
        .json();
    assert_eq!(trial["version"], 2);
    assert_eq!(post_cohort(&app, &id, 1, 3, 2).await.status, StatusCode::OK);
    drop(app);
    let trial = send(
        &common::app(dir.path()),
        "GET",
        &format!("/api/trials/{id}"),
        None,
    )
    .await
    .json();
    assert_eq!(trial["version"], 3);
}

#[tokio::test]
async fn corrupt_record_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let app = app(dir.path());
        let (id, _) = create_trial(&app, json!({ "p_T": 0.3, "max_n": 30 }), 3).await;
        post_cohort(&app, &id, 0, 3, 1).await;
        id
    };
    let path = log_path(dir.path(), &id);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.insert(1, "{not json}");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let err = AppState::open(dir.path(), &Options::default())
        .err()
        .expect("must fail");
    assert!(err.to_string().contains("record 2"), "{err}");
}
