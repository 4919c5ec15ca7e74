mod common;

use common::{feedback, full_session, query, start_server, SESSIONS};
use futures::future::join_all;
use serde_json::json;

#[tokio::test]
async fn lifecycle_reaches_completion() {
    let server = start_server().await;
    let (status, body) = server.create(json!({ "query": query(0) })).await;
    assert_eq!(status, 201);
    let id = body["session_id"].as_str().unwrap().to_string();

    let view = server.wait_for(&id, &["AwaitingFeedback"]).await;
    assert_eq!(view["pending_questions"].as_array().unwrap().len(), 3);
    assert_eq!(view["config"]["m_select"], 3);
    let v0 = view["variance_history"][0].as_f64().unwrap();
    assert!(v0 > 0.005, "variance {v0}");
    assert!(view.get("transcript").is_none());

    // Wrong arity is rejected and leaves the session waiting.
    assert_eq!(server.feedback(&id, &[feedback(0)]).await, 422);
    let answers = vec![feedback(0); 3];
    assert_eq!(server.feedback(&id, &answers).await, 200);

    let done = server.wait_for(&id, &["Completed", "Failed"]).await;
    assert_eq!(done["state"], "Completed", "{done}");
    assert_eq!(done["final_answer"], "answer-0");
    assert_eq!(done["rounds"], 1);
    assert!(done["transcript"].is_object());

    // A finished session no longer takes feedback.
    assert_eq!(server.feedback(&id, &answers).await, 409);
}

#[tokio::test]
async fn error_paths() {
    let server = start_server().await;
    assert_eq!(server.get("missing").await.0, 404);
    assert_eq!(server.feedback("missing", &[]).await, 404);
    assert_eq!(server.delete("missing").await, 404);

    let (status, body) = server.create(json!({ "query": "   " })).await;
    assert_eq!(status, 400, "{body}");
    assert!(!body["errors"].as_array().unwrap().is_empty());

    let (status, body) = server
        .create(json!({ "query": query(1), "config": { "m_select": 0, "bogus": 1 } }))
        .await;
    assert_eq!(status, 400);
    assert_eq!(body["errors"].as_array().unwrap().len(), 1, "{body}");

    let (status, body) = server
        .create(json!({ "query": query(1), "config": { "m_select": 20 } }))
        .await;
    assert_eq!(status, 400, "{body}");
}

#[tokio::test]
async fn per_session_config_override() {
    let server = start_server().await;
    let (status, body) = server
        .create(json!({ "query": query(2), "config": { "delta": 0.010, "m_select": 2 } }))
        .await;
    assert_eq!(status, 201);
    let id = body["session_id"].as_str().unwrap();
    let view = server.wait_for(id, &["AwaitingFeedback"]).await;
    assert_eq!(view["config"]["delta"], 0.010);
    assert_eq!(view["pending_questions"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn delete_removes_a_waiting_session() {
    let server = start_server().await;
    let (_, body) = server.create(json!({ "query": query(3) })).await;
    let id = body["session_id"].as_str().unwrap();
    server.wait_for(id, &["AwaitingFeedback"]).await;
    assert_eq!(server.delete(id).await, 204);
    assert_eq!(server.get(id).await.0, 404);
    assert!(server.store.is_empty());
}

#[tokio::test]
async fn concurrent_sessions_do_not_interfere() {
    let server = start_server().await;
    let views = join_all((0..SESSIONS).map(|k| full_session(&server, k))).await;
    let mut ids = std::collections::HashSet::new();
    for (k, view) in views.iter().enumerate() {
        assert_eq!(view["state"], "Completed", "{view}");
        assert_eq!(view["final_answer"], format!("answer-{k}"));
        assert!(ids.insert(view["session_id"].as_str().unwrap().to_string()));
    }
    assert_eq!(server.store.len(), SESSIONS);
}

#[tokio::test]
async fn static_files_are_served() {
    let server = start_server().await;
    let r = server.client.get(format!("{}/", server.base)).send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert!(r.text().await.unwrap().contains("<html"));
}
