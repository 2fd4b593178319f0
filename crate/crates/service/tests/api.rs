use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mosaic_core::llm::ScriptedClient;
use mosaic_core::mosaic::{Connection, Edit};
use mosaic_core::studio::{Studio, StudioOptions};
use mosaic_core::walkthrough::{self, CONCEPT, STAIRCASE_INSTRUCTION};
use mosaic_core::{Catalog, ContentHash, Mosaic};
use mosaic_service::{router, AppState};
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

struct Server {
    app: Router,
    _dir: TempDir,
}

fn server_with(llm: Option<ScriptedClient>) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let options = StudioOptions {
        workspace: dir.path().to_path_buf(),
        llm: llm.map(|c| Arc::new(c) as _),
        ..StudioOptions::default()
    };
    let studio = Studio::open(options).unwrap();
    Server { app: router(AppState::new(studio, 2)), _dir: dir }
}

fn server() -> Server {
    server_with(None)
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }
}

impl Server {
    async fn send(&self, method: Method, uri: &str, content_type: &str, body: Vec<u8>) -> Reply {
        let request = Request::builder()
            .method(method)
            .uri(uri)
            .header(header::CONTENT_TYPE, content_type)
            .body(Body::from(body))
            .unwrap();
        let response = self.app.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let headers = response.headers().clone();
        let body = response.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, headers, body }
    }

    async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, "application/json", Vec::new()).await
    }

    async fn post(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::POST, uri, "application/json", body.to_string().into_bytes()).await
    }

    async fn put(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::PUT, uri, "application/json", body.to_string().into_bytes()).await
    }

    async fn create(&self, mosaic: &Mosaic) -> String {
        let reply = self.post("/mosaics", json!({ "title": "t", "mosaic": mosaic.graph() })).await;
        assert_eq!(reply.status, StatusCode::CREATED, "{}", reply.text());
        reply.json()["id"].as_str().unwrap().to_string()
    }

    /// Follows the event stream to its end and returns the events by name.
    async fn follow(&self, run_id: &str) -> Vec<(String, Value)> {
        let reply = self.get(&format!("/runs/{run_id}/events")).await;
        assert_eq!(reply.status, StatusCode::OK);
        assert!(reply.headers[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/event-stream"));
        let mut events = Vec::new();
        for block in reply.text().split("\n\n").filter(|b| !b.trim().is_empty()) {
            let field = |name: &str| {
                block.lines().find_map(|l| l.strip_prefix(name).map(|v| v.trim_start().to_string()))
            };
            if let (Some(name), Some(data)) = (field("event:"), field("data:")) {
                events.push((name, serde_json::from_str(&data).unwrap()));
            }
        }
        events
    }
}

#[tokio::test]
async fn catalog_and_search() {
    let s = server();
    let catalog = s.get("/catalog").await.json();
    assert_eq!(catalog["specs"].as_array().unwrap().len(), 45);
    assert!(catalog["groups"]["image"].as_array().unwrap().iter().any(|v| v == "tag_image"));

    let hits = s.get("/catalog/search?q=tag%20image&k=3").await.json();
    assert_eq!(hits["results"][0]["spec_id"], "tag_image");
    assert_eq!(hits["results"].as_array().unwrap().len(), 3);

    let missing = s.get("/catalog/search").await;
    assert_eq!(missing.status, StatusCode::BAD_REQUEST);
    assert_eq!(missing.json()["error"], "BadRequest");
}

#[tokio::test]
async fn mosaic_versions_conflict() {
    let s = server();
    let catalog = Catalog::load_builtin();
    let (mosaic, _) = walkthrough::build(&catalog).unwrap();
    let id = s.create(&mosaic).await;

    let doc = s.get(&format!("/mosaics/{id}")).await.json();
    assert_eq!(doc["version"], 1);
    assert_eq!(doc["unknown_specs"], json!([]));
    assert_eq!(serde_json::from_value::<mosaic_core::MosaicGraph>(doc["mosaic"].clone()).unwrap(), *mosaic.graph());

    let empty = json!({ "pieces": [], "connections": [] });
    let first = s.put(&format!("/mosaics/{id}"), json!({ "version": 1, "title": "renamed", "mosaic": empty })).await;
    assert_eq!(first.status, StatusCode::OK);
    assert_eq!(first.json()["version"], 2);
    let stale = s.put(&format!("/mosaics/{id}"), json!({ "version": 1, "mosaic": empty })).await;
    assert_eq!(stale.status, StatusCode::CONFLICT);
    assert_eq!(stale.json()["error"], "VersionConflict");

    assert_eq!(s.get("/mosaics/nope").await.status, StatusCode::NOT_FOUND);
    let list = s.get("/mosaics").await.json();
    assert_eq!(list[0]["title"], "renamed");
}

#[tokio::test]
async fn run_on_invalid_mosaic_is_refused_with_the_violation() {
    let s = server();
    let catalog = Catalog::load_builtin();
    let mut mosaic = Mosaic::new();
    let text = mosaic.apply_edit(&catalog, Edit::add("type_text", 0.0, 0.0)).unwrap().created().unwrap();
    let depth = mosaic.apply_edit(&catalog, Edit::add("get_depth_map", 6.0, 0.0)).unwrap().created().unwrap();
    // Editing refuses text into an image channel, so write the graph directly.
    let mut graph = serde_json::to_value(mosaic.graph()).unwrap();
    graph["connections"] = json!([Connection::new(text, depth, 0)]);
    let reply = s.post("/mosaics", json!({ "mosaic": graph })).await;
    assert_eq!(reply.status, StatusCode::CREATED);
    let id = reply.json()["id"].as_str().unwrap().to_string();

    let validation = s.get(&format!("/mosaics/{id}/validation")).await.json();
    assert_eq!(validation["valid"], false);

    let run = s.post(&format!("/mosaics/{id}/chains/0/runs"), json!({ "inputs": { text.0.to_string(): { "text": "hi" } } })).await;
    assert_eq!(run.status, StatusCode::BAD_REQUEST);
    let body = run.json();
    assert_eq!(body["error"], "InvalidMosaic");
    assert_eq!(body["details"]["violations"][0]["code"], "IncompatibleConnection");
}

#[tokio::test]
async fn walkthrough_chain_runs_streams_and_serves_outputs() {
    let s = server();
    let catalog = Catalog::load_builtin();
    let (mosaic, ids) = walkthrough::build(&catalog).unwrap();
    let id = s.create(&mosaic).await;

    let upload = s.send(Method::POST, "/blobs", "image/png", walkthrough::client_photo()).await;
    assert_eq!(upload.status, StatusCode::CREATED);
    let blob = upload.json();
    assert_eq!(blob["hash"], ContentHash::of(&walkthrough::client_photo()).as_str());
    assert_eq!(blob["format"], "png");

    let inputs = json!({
        ids.design_photo.0.to_string(): { "hash": blob["hash"] },
        ids.concept_text.0.to_string(): { "text": CONCEPT },
        ids.instruction_text.0.to_string(): { "text": STAIRCASE_INSTRUCTION },
    });
    let started = s.post(&format!("/mosaics/{id}/chains/1/runs"), json!({ "inputs": inputs })).await;
    assert_eq!(started.status, StatusCode::ACCEPTED, "{}", started.text());
    let run_id = started.json()["run_id"].as_str().unwrap().to_string();

    let events = s.follow(&run_id).await;
    let (last, payload) = events.last().unwrap();
    assert_eq!(last, "run_done");
    assert_eq!(payload["status"], "done");
    assert_eq!(events.iter().filter(|(n, _)| n == "piece_done").count(), 9);
    for (i, (_, e)) in events.iter().enumerate() {
        assert_eq!(e["seq"], i as u64);
    }

    let record = s.get(&format!("/runs/{run_id}")).await.json();
    assert_eq!(record["status"], "done");
    assert_eq!(record["mosaic_id"], id.as_str());

    let output = s.get(&format!("/runs/{run_id}/pieces/{}/output", ids.mockup_3d.0)).await;
    assert_eq!(output.status, StatusCode::OK);
    assert_eq!(output.headers[header::CONTENT_TYPE], "model/gltf-binary");
    let hash = output.headers["x-content-hash"].to_str().unwrap();
    assert_eq!(hash, ContentHash::of(&output.body).as_str());
    let entry = record["entries"].as_array().unwrap().iter().find(|e| e["instance_id"] == ids.mockup_3d.0).unwrap();
    assert_eq!(entry["output"]["payload"]["hash"], hash);

    let concept = s.get(&format!("/runs/{run_id}/pieces/{}/output", ids.concept_text.0)).await;
    assert!(concept.headers[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/plain"));
    assert_eq!(concept.text(), CONCEPT);

    let blob_back = s.get(&format!("/blobs/{hash}")).await;
    assert_eq!(blob_back.body, output.body);
}

#[tokio::test]
async fn run_preconditions_and_lookups() {
    let s = server();
    let catalog = Catalog::load_builtin();
    let (mosaic, ids) = walkthrough::build(&catalog).unwrap();
    let id = s.create(&mosaic).await;

    let missing = s.post(&format!("/mosaics/{id}/chains/0/runs"), json!({})).await;
    assert_eq!(missing.status, StatusCode::BAD_REQUEST);
    assert_eq!(missing.json()["error"], "MissingInput");

    let absent = ContentHash::of(b"never uploaded");
    let inputs = json!({ "inputs": { ids.ideation_photo.0.to_string(): { "hash": absent, "format": "png" } } });
    let blob = s.post(&format!("/mosaics/{id}/chains/0/runs"), inputs).await;
    assert_eq!(blob.json()["error"], "MissingBlob");

    let chain = s.post(&format!("/mosaics/{id}/chains/7/runs"), json!({})).await;
    assert_eq!(chain.status, StatusCode::NOT_FOUND);
    assert_eq!(chain.json()["error"], "UnknownChain");

    assert_eq!(s.get("/runs/does-not-exist").await.status, StatusCode::NOT_FOUND);
    assert_eq!(s.get(&format!("/blobs/{absent}")).await.status, StatusCode::NOT_FOUND);
    let junk = s.send(Method::POST, "/blobs", "application/x-unknown", b"junk".to_vec()).await;
    assert_eq!(junk.status, StatusCode::BAD_REQUEST);
}

fn transcript(name: &str) -> ScriptedClient {
    ScriptedClient::from_file(format!("{}/../../fixtures/transcripts/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[tokio::test]
async fn assist_appends_to_a_stored_mosaic() {
    let s = server_with(Some(transcript("music_repair.json")));
    let catalog = Catalog::load_builtin();
    let (mosaic, _) = walkthrough::build(&catalog).unwrap();
    let id = s.create(&mosaic).await;

    let reply = s.post("/assist", json!({ "task": "help add music based on the image", "mosaic_id": id, "version": 1 })).await;
    assert_eq!(reply.status, StatusCode::OK, "{}", reply.text());
    let body = reply.json();
    assert_eq!(body["rounds"].as_array().unwrap().len(), 2);
    assert_eq!(body["added"].as_array().unwrap().len(), 4);

    let doc = s.get(&format!("/mosaics/{id}")).await.json();
    assert_eq!(doc["version"], 2);
    assert_eq!(doc["mosaic"]["pieces"].as_array().unwrap().len(), mosaic.graph().len() + 4);
    assert_eq!(doc["mosaic"], body["mosaic"]);
}

#[tokio::test]
async fn assist_errors() {
    let s = server_with(Some(transcript("music_unrepairable.json")));
    let reply = s.post("/assist", json!({ "task": "help add music based on the image" })).await;
    assert_eq!(reply.status, StatusCode::BAD_GATEWAY);
    assert_eq!(reply.json()["error"], "UnrepairablePlan");

    let bare = server();
    let reply = bare.post("/assist", json!({ "task": "anything" })).await;
    assert_eq!(reply.status, StatusCode::BAD_REQUEST);
    assert_eq!(reply.json()["error"], "LlmNotConfigured");
}
