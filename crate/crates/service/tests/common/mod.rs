//! In-process server and a small JSON client for the integration tests.
#![allow(dead_code)]

use std::path::Path;

use gci_service::{AppState, ServiceConfig};
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};
use tokio::task::JoinHandle;

pub struct Server {
    pub base: String,
    pub state: AppState,
    handle: JoinHandle<()>,
}

impl Server {
    /// Recovers `data_dir` and serves it on an ephemeral port.
    pub async fn start(data_dir: &Path, tweak: impl FnOnce(&mut ServiceConfig)) -> Self {
        let mut config = ServiceConfig::new(data_dir);
        tweak(&mut config);
        let state = AppState::recover(config).unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let handle = tokio::spawn({
            let state = state.clone();
            async move { gci_service::serve(listener, state).await.unwrap() }
        });
        Self { base, state, handle }
    }

    pub fn client(&self) -> Client {
        Client::new(&self.base)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

/// A response reduced to what the tests look at.
#[derive(Debug, Clone)]
pub struct Reply {
    pub status: StatusCode,
    pub signal: Option<String>,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }

    pub fn code(&self) -> String {
        self.json()["code"].as_str().unwrap_or_default().to_owned()
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.bytes).into_owned()
    }
}

#[derive(Clone)]
pub struct Client {
    http: reqwest::Client,
    pub base: String,
}

/// A participant's handle on a session.
#[derive(Debug, Clone)]
pub struct Member {
    pub session: String,
    pub id: String,
    pub alias: String,
    pub token: String,
}

impl Client {
    pub fn new(base: &str) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: base.to_owned(),
        }
    }

    pub async fn send(&self, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let res = req.send().await.unwrap();
        let status = res.status();
        let signal = res
            .headers()
            .get(gci_service::SIGNAL_HEADER)
            .map(|v| v.to_str().unwrap().to_owned());
        let bytes = res.bytes().await.unwrap().to_vec();
        Reply { status, signal, bytes }
    }

    pub async fn get(&self, m: &Member, route: &str) -> Reply {
        self.send(
            Method::GET,
            &format!("/sessions/{}/{route}", m.session),
            Some(&m.token),
            None,
        )
        .await
    }

    pub async fn post(&self, m: &Member, route: &str, body: Value) -> Reply {
        self.send(
            Method::POST,
            &format!("/sessions/{}/{route}", m.session),
            Some(&m.token),
            Some(body),
        )
        .await
    }

    /// Creates a session and returns its facilitator.
    pub async fn create_session(&self, config: Value) -> Member {
        let r = self
            .send(Method::POST, "/sessions", None, Some(json!({ "config": config })))
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        let v = r.json();
        Member {
            session: v["session_id"].as_str().unwrap().to_owned(),
            id: v["participant_id"].as_str().unwrap().to_owned(),
            alias: v["alias"].as_str().unwrap().to_owned(),
            token: v["token"].as_str().unwrap().to_owned(),
        }
    }

    pub async fn join(&self, session: &str) -> Member {
        let r = self
            .send(Method::POST, &format!("/sessions/{session}/participants"), None, None)
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        let v = r.json();
        Member {
            session: session.to_owned(),
            id: v["participant_id"].as_str().unwrap().to_owned(),
            alias: v["alias"].as_str().unwrap().to_owned(),
            token: v["token"].as_str().unwrap().to_owned(),
        }
    }

    pub async fn submit(&self, m: &Member, text: &str) -> String {
        let r = self.post(m, "ideas", json!({ "text": text })).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        r.json()["item"].as_str().unwrap().to_owned()
    }

    pub async fn phase(&self, m: &Member, to: &str) -> Reply {
        self.post(m, "phase", json!({ "to": to })).await
    }

    pub async fn state(&self, fac: &Member) -> Value {
        let r = self.get(fac, "state").await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text());
        r.json()
    }
}

/// Reviewer `r` of the A/B/C example: prefers A over B for r < 7, A over C
/// for r < 6, and B over C for r < 8.
pub fn paper_preference(r: usize, x: &str, y: &str) -> bool {
    match (x, y) {
        ("A", "B") => r < 7,
        ("A", "C") => r < 6,
        ("B", "C") => r < 8,
        (a, b) => !paper_preference(r, b, a),
    }
}

/// Everything a contributor received, for byte-scanning.
#[derive(Default)]
pub struct Transcript {
    pub responses: Vec<(String, Vec<u8>)>,
}

impl Transcript {
    pub fn record(&mut self, who: &Member, reply: &Reply) {
        self.responses.push((who.id.clone(), reply.bytes.clone()));
    }

    /// Number of (response, foreign id) checks made; panics on a leak.
    pub fn assert_no_foreign_ids(&self, all_ids: &[String]) -> usize {
        let mut checks = 0;
        for (owner, bytes) in &self.responses {
            let text = String::from_utf8_lossy(bytes);
            for id in all_ids.iter().filter(|id| *id != owner) {
                assert!(!text.contains(id.as_str()), "{owner} saw {id}: {text}");
                checks += 1;
            }
        }
        checks
    }
}

pub struct PaperRun {
    pub facilitator: Member,
    pub authors: Vec<Member>,
    pub reviewers: Vec<Member>,
    pub transcript: Transcript,
}

impl PaperRun {
    pub fn all_ids(&self) -> Vec<String> {
        std::iter::once(&self.facilitator)
            .chain(&self.authors)
            .chain(&self.reviewers)
            .map(|m| m.id.clone())
            .collect()
    }
}

/// Three authors submit A, B and C; ten reviewers each answer all three
/// pairs over HTTP, reproducing the 7/10, 6/10, 8/10 tally.
pub async fn paper_session(client: &Client, seed: u64) -> PaperRun {
    let facilitator = client
        .create_session(json!({ "seed": seed, "min_judgments": 30, "particles": 1000 }))
        .await;
    let mut transcript = Transcript::default();
    let mut authors = Vec::new();
    for text in ["A", "B", "C"] {
        let m = client.join(&facilitator.session).await;
        let r = client.post(&m, "ideas", json!({ "text": text })).await;
        assert_eq!(r.status, StatusCode::CREATED);
        transcript.record(&m, &r);
        authors.push(m);
    }
    let mut reviewers = Vec::new();
    for _ in 0..10 {
        reviewers.push(client.join(&facilitator.session).await);
    }
    assert_eq!(client.phase(&facilitator, "reviewing").await.status, StatusCode::OK);

    for (r, reviewer) in reviewers.iter().enumerate() {
        for _ in 0..3 {
            let task = client.get(reviewer, "task").await;
            assert_eq!(task.status, StatusCode::OK, "{}", task.text());
            transcript.record(reviewer, &task);
            let t = task.json();
            let (x, y) = (&t["first"], &t["second"]);
            let (winner, loser) = if paper_preference(r, x["text"].as_str().unwrap(), y["text"].as_str().unwrap()) {
                (x, y)
            } else {
                (y, x)
            };
            let res = client
                .post(
                    reviewer,
                    "judgments",
                    json!({ "winner": winner["item"], "loser": loser["item"] }),
                )
                .await;
            assert_eq!(res.status, StatusCode::OK, "{}", res.text());
            transcript.record(reviewer, &res);
            for route in ["voice", "me"] {
                let view = client.get(reviewer, route).await;
                assert_eq!(view.status, StatusCode::OK);
                transcript.record(reviewer, &view);
            }
        }
        let done = client.get(reviewer, "task").await;
        assert_eq!(done.status, StatusCode::NO_CONTENT);
        transcript.record(reviewer, &done);
    }
    for author in &authors {
        for route in ["voice", "me", "task"] {
            let view = client.get(author, route).await;
            transcript.record(author, &view);
        }
    }
    PaperRun {
        facilitator,
        authors,
        reviewers,
        transcript,
    }
}
