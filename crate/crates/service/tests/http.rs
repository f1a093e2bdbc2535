//! The HTTP contract: the paper session end to end, masking, error codes,
//! idempotent joins and concurrent judgments.

mod common;

use common::{paper_session, Client, Member, Server};
use gci_core::Session;
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};

fn texts(voice: &Value) -> Vec<String> {
    voice["ideas"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["text"].as_str().unwrap().to_owned())
        .collect()
}

#[tokio::test]
async fn paper_session_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), |_| {}).await;
    let client = server.client();
    let run = paper_session(&client, 1).await;
    let fac = &run.facilitator;

    let state = client.state(fac).await;
    assert_eq!(state["judgments"], 30);
    assert_eq!(state["phase"], "converged");

    let voice = client.get(fac, "voice").await.json();
    assert_eq!(texts(&voice), ["A", "B", "C"]);
    let full = client.get(fac, "voice?view=facilitator").await.json();
    assert_eq!(texts(&full), ["A", "B", "C"]);
    let means: Vec<f64> = full["ideas"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["mean"].as_f64().unwrap())
        .collect();
    for (m, mle) in means.iter().zip([0.4708, 0.3547, 0.1744]) {
        assert!((m - mle).abs() <= 0.05, "{means:?}");
    }

    let ranking = client.get(fac, "contributions").await;
    assert_eq!(ranking.status, StatusCode::OK);
    let ranking = ranking.json();
    assert_eq!(ranking[0]["participant"], run.authors[0].id.as_str());
    assert_eq!(ranking[1]["participant"], run.authors[1].id.as_str());
    assert_eq!(ranking[2]["participant"], run.authors[2].id.as_str());

    // the log served to the facilitator replays to the live state
    let log = client.get(fac, "log").await;
    assert_eq!(log.status, StatusCode::OK);
    let replayed = Session::replay_jsonl(&log.bytes).unwrap();
    assert_eq!(replayed.state_hash(), state["state_hash"].as_str().unwrap());
}

#[tokio::test]
async fn contributor_payloads_never_carry_foreign_ids() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), |_| {}).await;
    let client = server.client();
    let run = paper_session(&client, 2).await;
    let ids = run.all_ids();
    let checks = run.transcript.assert_no_foreign_ids(&ids);
    assert!(checks > 1000, "{checks}");

    // converged voice shows scores but still no authors
    let voice = client.get(&run.reviewers[0], "voice").await.json();
    assert!(voice["ideas"][0]["mean"].is_number());
    assert!(voice["ideas"][0].get("contributor").is_none());

    // after the facilitator reveals, authorship becomes visible to everyone
    assert_eq!(client.phase(&run.facilitator, "revealed").await.status, StatusCode::OK);
    let voice = client.get(&run.reviewers[0], "voice").await.json();
    assert_eq!(voice["ideas"][0]["contributor"], run.authors[0].id.as_str());
}

async fn reviewing_session(client: &Client, ideas: &[&str]) -> (Member, Member, Vec<String>) {
    let fac = client.create_session(json!({ "particles": 200 })).await;
    let author = client.join(&fac.session).await;
    let mut items = Vec::new();
    for text in ideas {
        items.push(client.submit(&author, text).await);
    }
    assert_eq!(client.phase(&fac, "reviewing").await.status, StatusCode::OK);
    (fac, author, items)
}

#[tokio::test]
async fn error_contract() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), |_| {}).await;
    let client = server.client();
    let (fac, author, items) = reviewing_session(&client, &["one", "two", "three"]).await;
    let reviewer = client.join(&fac.session).await;
    let s = &fac.session;

    // 401: missing and unknown tokens
    let r = client
        .send(Method::GET, &format!("/sessions/{s}/voice"), None, None)
        .await;
    assert_eq!(
        (r.status, r.code().as_str()),
        (StatusCode::UNAUTHORIZED, "unauthorized")
    );
    let r = client
        .send(Method::GET, &format!("/sessions/{s}/voice"), Some("not-a-token"), None)
        .await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    // a token is only valid for its own session
    let other = client.create_session(json!({ "particles": 10 })).await;
    let r = client
        .send(
            Method::GET,
            &format!("/sessions/{}/voice", other.session),
            Some(&fac.token),
            None,
        )
        .await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);

    // 403: contributor on facilitator routes
    for route in ["log", "contributions", "state", "voice?view=facilitator"] {
        let r = client.get(&reviewer, route).await;
        assert_eq!(
            (r.status, r.code().as_str()),
            (StatusCode::FORBIDDEN, "facilitator_only"),
            "{route}"
        );
    }
    for (route, body) in [
        ("phase", json!({"to": "converged"})),
        ("decision-matrix", json!({"candidates": [], "criteria": []})),
    ] {
        assert_eq!(
            client.post(&reviewer, route, body).await.status,
            StatusCode::FORBIDDEN,
            "{route}"
        );
    }

    // 404: unknown session and unknown item
    let r = client
        .send(Method::GET, "/sessions/s-nope/voice", Some(&fac.token), None)
        .await;
    assert_eq!(
        (r.status, r.code().as_str()),
        (StatusCode::NOT_FOUND, "unknown_session")
    );
    let r = client
        .post(
            &reviewer,
            "judgments",
            json!({"winner": "idea-0000000000000000", "loser": items[0]}),
        )
        .await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::NOT_FOUND, "unknown_item"));
    let r = client.send(Method::GET, "/nowhere", None, None).await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::NOT_FOUND, "no_route"));

    // 409: judgment on a pair that was never assigned
    let r = client
        .post(&reviewer, "judgments", json!({"winner": items[0], "loser": items[1]}))
        .await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::CONFLICT, "unassigned_pair"));
    // 409: answering the same assignment twice
    let task = client.get(&reviewer, "task").await.json();
    let body = json!({"winner": task["first"]["item"], "loser": task["second"]["item"]});
    assert_eq!(
        client.post(&reviewer, "judgments", body.clone()).await.status,
        StatusCode::OK
    );
    let r = client.post(&reviewer, "judgments", body).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert!(
        ["duplicate_judgment", "unassigned_pair"].contains(&r.code().as_str()),
        "{}",
        r.text()
    );
    // 409: phases only move forward; contributions need convergence
    assert_eq!(client.phase(&fac, "collecting").await.status, StatusCode::CONFLICT);
    let r = client.get(&fac, "contributions").await;
    assert_eq!(
        (r.status, r.code().as_str()),
        (StatusCode::CONFLICT, "ranking_unavailable")
    );

    // 422: malformed bodies
    let r = client.post(&reviewer, "judgments", json!({"winner": items[0]})).await;
    assert_eq!(
        (r.status, r.code().as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, "malformed_body")
    );
    let r = client.post(&author, "ideas", json!({"text": "x", "extra": 1})).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = client.get(&fac, "voice?view=everything").await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = client
        .send(
            Method::POST,
            "/sessions",
            None,
            Some(json!({"config": {"particles": 0}})),
        )
        .await;
    assert_eq!(
        (r.status, r.code().as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config")
    );

    // 204: the author of every idea has nothing to review
    let r = client.get(&author, "task").await;
    assert_eq!(r.status, StatusCode::NO_CONTENT);
    assert_eq!(r.signal.as_deref(), Some("no_eligible_pairs"));
    assert!(r.bytes.is_empty());
}

#[tokio::test]
async fn budget_exhaustion_and_phase_signals() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), |_| {}).await;
    let client = server.client();
    let fac = client
        .create_session(json!({ "particles": 100, "comparison_budget": 1 }))
        .await;
    let author = client.join(&fac.session).await;
    let reviewers = [client.join(&fac.session).await, client.join(&fac.session).await];
    let r = client.get(&reviewers[0], "task").await;
    assert_eq!(
        (r.status, r.signal.as_deref()),
        (StatusCode::NO_CONTENT, Some("collecting"))
    );
    for text in ["x", "y", "z"] {
        client.submit(&author, text).await;
    }
    client.phase(&fac, "reviewing").await;
    assert_eq!(client.get(&reviewers[0], "task").await.status, StatusCode::OK);
    let r = client.get(&reviewers[1], "task").await;
    assert_eq!(
        (r.status, r.signal.as_deref()),
        (StatusCode::NO_CONTENT, Some("awaiting_convergence"))
    );
    client.phase(&fac, "converged").await;
    let r = client.get(&reviewers[1], "task").await;
    assert_eq!(r.signal.as_deref(), Some("converged"));
}

#[tokio::test]
async fn joins_are_idempotent_per_credential() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), |_| {}).await;
    let client = server.client();
    let fac = client.create_session(json!({ "particles": 10 })).await;
    let path = format!("/sessions/{}/participants", fac.session);
    let body = json!({ "credential": "correct-horse-battery-staple" });
    let first = client.send(Method::POST, &path, None, Some(body.clone())).await;
    assert_eq!(first.status, StatusCode::CREATED);
    let again = client.send(Method::POST, &path, None, Some(body)).await;
    assert_eq!(again.status, StatusCode::OK);
    let (a, b) = (first.json(), again.json());
    assert_eq!(a["participant_id"], b["participant_id"]);
    assert_eq!(a["alias"], b["alias"]);
    assert_eq!(a["token"], "correct-horse-battery-staple");
    let state = client.state(&fac).await;
    assert_eq!(state["seq"], 2, "the rejoin appended nothing");

    let weak = client
        .send(Method::POST, &path, None, Some(json!({ "credential": "short" })))
        .await;
    assert_eq!(weak.status, StatusCode::UNPROCESSABLE_ENTITY);
    // the credential never reaches the log, only its hash
    let log = client.get(&fac, "log").await.text();
    assert!(!log.contains("correct-horse-battery-staple"));
    assert!(!log.contains(&fac.token));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_judgments_are_all_recorded() {
    const N: usize = 24;
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), |_| {}).await;
    let client = server.client();
    let texts: Vec<String> = (0..8).map(|i| format!("idea {i}")).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let (fac, _author, _) = reviewing_session(&client, &refs).await;
    let mut reviewers = Vec::new();
    for _ in 0..N {
        reviewers.push(client.join(&fac.session).await);
    }
    let mut answers = Vec::new();
    for r in &reviewers {
        let t = client.get(r, "task").await.json();
        answers.push(json!({"winner": t["first"]["item"], "loser": t["second"]["item"]}));
    }
    let handles: Vec<_> = reviewers
        .into_iter()
        .zip(answers)
        .map(|(r, body)| {
            let client = client.clone();
            tokio::spawn(async move { client.post(&r, "judgments", body).await.status })
        })
        .collect();
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    let log = client.get(&fac, "log").await.text();
    let judged = log
        .lines()
        .filter(|l| l.contains(r#""kind":"judgment-recorded""#))
        .count();
    assert_eq!(judged, N);
    assert_eq!(client.state(&fac).await["judgments"], N);
}

#[tokio::test]
async fn decision_matrix_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), |_| {}).await;
    let client = server.client();
    let (fac, _, items) = reviewing_session(&client, &["p", "q"]).await;
    let body = json!({
        "candidates": items,
        "criteria": [
            {"name": "cost", "weight": 0.5, "judgments": [{"winner": items[0], "loser": items[1], "count": 3}]},
            {"name": "impact", "weight": 0.5, "judgments": [{"winner": items[0], "loser": items[1], "count": 2},
                                                            {"winner": items[1], "loser": items[0], "count": 1}]}
        ]
    });
    let r = client.post(&fac, "decision-matrix", body).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    let log = client.get(&fac, "log").await.text();
    assert!(log.lines().last().unwrap().contains(r#""kind":"criterion-scored""#));

    let bad = json!({"candidates": items, "criteria": [{"name": "cost", "weight": 0.7, "judgments": []}]});
    assert_eq!(
        client.post(&fac, "decision-matrix", bad).await.status,
        StatusCode::UNPROCESSABLE_ENTITY
    );
}

#[tokio::test]
async fn request_cap_applies_per_token() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path(), |c| c.token_request_cap = 3).await;
    let client = server.client();
    let fac = client.create_session(json!({ "particles": 10 })).await;
    let member = client.join(&fac.session).await;
    for _ in 0..2 {
        assert_eq!(client.get(&member, "me").await.status, StatusCode::OK);
    }
    let r = client.get(&member, "me").await;
    assert_eq!(
        (r.status, r.code().as_str()),
        (StatusCode::TOO_MANY_REQUESTS, "request_cap_exceeded")
    );
    assert_eq!(client.get(&fac, "me").await.status, StatusCode::OK);
}
