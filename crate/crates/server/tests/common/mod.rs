#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use reqwest::{Client, Method, Response, StatusCode};
use serde_json::{json, Value};
use triadtale_core::character::DEFAULT_STYLE_TOKENS;
use triadtale_core::ids::{FixedClock, SequentialIds};
use triadtale_core::pipeline::ChapterGenerator;
use triadtale_core::session::ScenarioRegistry;
use triadtale_core::{Engine, EngineConfig};

pub struct Server {
    pub base: String,
    pub client: Client,
    pub engine: Engine,
    _dir: tempfile::TempDir,
}

pub async fn start_with(generator: ChapterGenerator) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::open(EngineConfig {
        data_dir: dir.path().to_path_buf(),
        scenarios: ScenarioRegistry::defaults(),
        generator,
        clock: Arc::new(FixedClock::default()),
        ids: Arc::new(SequentialIds::default()),
        style_tokens: DEFAULT_STYLE_TOKENS.to_string(),
    })
    .await
    .unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = triadtale_server::router(engine.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server {
        base: format!("http://{addr}"),
        client: Client::new(),
        engine,
        _dir: dir,
    }
}

pub async fn start() -> Server {
    start_with(ChapterGenerator::mock()).await
}

pub fn selfie() -> Vec<u8> {
    let img = image::RgbImage::from_fn(40, 40, |x, y| image::Rgb([x as u8 * 6, y as u8 * 6, 90]));
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

impl Server {
    pub async fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> Response {
        let mut request = self.client.request(method, format!("{}{path}", self.base));
        if let Some(token) = token {
            request = request.bearer_auth(token);
        }
        if let Some(body) = body {
            request = request.json(&body);
        }
        request.send().await.unwrap()
    }

    pub async fn post(&self, path: &str, token: Option<&str>, body: Value) -> (StatusCode, Value) {
        let response = self.call(Method::POST, path, token, Some(body)).await;
        let status = response.status();
        (status, response.json().await.unwrap())
    }

    pub async fn get(&self, path: &str) -> (StatusCode, Value) {
        let response = self.call(Method::GET, path, None, None).await;
        let status = response.status();
        (status, response.json().await.unwrap())
    }

    pub async fn wait_job(&self, job: &Value) -> Value {
        let id = job["job_id"].as_str().unwrap();
        for _ in 0..4000 {
            let (status, body) = self.get(&format!("/jobs/{id}")).await;
            assert_eq!(status, StatusCode::OK);
            if matches!(body["state"].as_str(), Some("done" | "failed")) {
                return body;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        panic!("job {id} never finished");
    }
}

pub struct Table {
    pub session: String,
    /// Tokens for Protagonist, Opportunity, Challenge.
    pub tokens: [String; 3],
}

impl Table {
    pub fn token_for_chapter(&self, n: u8) -> &str {
        match n {
            1 | 4 => &self.tokens[0],
            2 => &self.tokens[1],
            _ => &self.tokens[2],
        }
    }
}

/// Drives a session to Chapter(1, AwaitingInput) over HTTP.
pub async fn setup_table(server: &Server) -> Table {
    let (status, created) = server.post("/sessions", None, json!({})).await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    let session = created["session_id"].as_str().unwrap().to_string();
    let path = |p: &str| format!("/sessions/{session}{p}");

    let (status, _) = server.post(&path("/scenario"), None, json!({"scenario_id": "high_school"})).await;
    assert_eq!(status, StatusCode::OK);
    let mut tokens = Vec::new();
    for (name, role) in [("Ana", "Protagonist"), ("Ben", "Opportunity"), ("Cai", "Challenge")] {
        let (status, joined) = server.post(&path("/participants"), None, json!({"display_name": name})).await;
        assert_eq!(status, StatusCode::CREATED, "{joined}");
        let (status, body) = server
            .post(
                &path("/roles"),
                None,
                json!({"participant_id": joined["participant_id"], "role": role}),
            )
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        tokens.push(joined["token"].as_str().unwrap().to_string());
    }

    let upload = server
        .client
        .post(format!("{}{}", server.base, path("/character/source")))
        .header("content-type", "image/png")
        .body(selfie())
        .send()
        .await
        .unwrap();
    assert_eq!(upload.status(), StatusCode::CREATED);
    let (status, job) = server.post(&path("/character/avatar"), None, json!({})).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    assert_eq!(server.wait_job(&job).await["state"], "done");
    let (status, body) = server.post(&path("/character/confirm"), None, json!({"name": "Mei"})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    Table {
        session,
        tokens: tokens.try_into().unwrap(),
    }
}

pub async fn play_chapter(server: &Server, table: &Table, n: u8, text: &str) {
    let session = &table.session;
    let (status, job) = server
        .post(
            &format!("/sessions/{session}/chapters/{n}/input"),
            Some(table.token_for_chapter(n)),
            json!({"text": text}),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    assert_eq!(server.wait_job(&job).await["state"], "done");
    let (status, body) = server
        .post(&format!("/sessions/{session}/chapters/{n}/accept"), None, json!({}))
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
}
