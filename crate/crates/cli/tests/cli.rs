use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use mosaic_core::mosaic::{Connection, Edit};
use mosaic_core::studio::{Studio, StudioOptions};
use mosaic_core::walkthrough::{self, CONCEPT, STAIRCASE_INSTRUCTION};
use mosaic_core::{Catalog, Mosaic};
use mosaic_service::{router, AppState};
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/interior_design.mosaic.json");

struct Env {
    dir: TempDir,
}

impl Env {
    fn new() -> Self {
        Env { dir: tempfile::tempdir().unwrap() }
    }

    fn workspace(&self) -> PathBuf {
        self.dir.path().join("ws")
    }

    fn file(&self, name: &str, bytes: &[u8]) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, bytes).unwrap();
        path
    }

    fn mosaic(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_mosaic"))
            .arg("--workspace")
            .arg(self.workspace())
            .args(args)
            .env_remove("MOSAIC_WORKSPACE")
            .env_remove("MOSAIC_ADAPTERS")
            .env_remove("MOSAIC_LLM_ENDPOINT")
            .env_remove("MOSAIC_LLM_TRANSCRIPT")
            .env_remove("MOSAIC_EMBEDDING_ENDPOINT")
            .output()
            .unwrap()
    }

    /// Same workspace, served over HTTP in-process.
    async fn service(&self, method: Method, uri: &str, body: String) -> String {
        let options = StudioOptions { workspace: self.workspace(), ..StudioOptions::default() };
        let app = router(AppState::new(Studio::open(options).unwrap(), 1));
        let request = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
        let response = app.oneshot(request).await.unwrap();
        String::from_utf8(response.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap()
    }
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json_line(out: &Output) -> Value {
    let text = stdout(out);
    assert_eq!(text.lines().count(), 1, "{text}");
    serde_json::from_str(&text).unwrap()
}

#[test]
fn search_puts_tag_image_first() {
    let env = Env::new();
    let out = env.mosaic(&["catalog", "search", "identify the objects inside the image"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().next(), Some("tag_image"));

    let out = env.mosaic(&["--format", "json", "catalog", "search", "identify the objects inside the image", "-k", "2"]);
    let body = json_line(&out);
    assert_eq!(body["results"].as_array().unwrap().len(), 2);
    assert_eq!(body["results"][0]["rank"], 1);
}

#[test]
fn catalog_list_names_every_spec() {
    let env = Env::new();
    let out = env.mosaic(&["catalog", "list"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 45);
    let body = json_line(&env.mosaic(&["--format", "json", "catalog", "list"]));
    assert_eq!(body["specs"].as_array().unwrap().len(), 45);
}

#[test]
fn validate_fixture_and_invalid_file() {
    let env = Env::new();
    let out = env.mosaic(&["mosaic", "validate", FIXTURE]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("valid: 16 piece(s), 3 chain(s)"));

    let catalog = Catalog::load_builtin();
    let mut mosaic = Mosaic::new();
    let text = mosaic.apply_edit(&catalog, Edit::add("type_text", 0.0, 0.0)).unwrap().created().unwrap();
    let depth = mosaic.apply_edit(&catalog, Edit::add("get_depth_map", 6.0, 0.0)).unwrap().created().unwrap();
    let mut graph = serde_json::to_value(mosaic.graph()).unwrap();
    graph["connections"] = json!([Connection::new(text, depth, 0)]);
    let path = env.file("bad.json", graph.to_string().as_bytes());

    let out = env.mosaic(&["--format", "json", "mosaic", "validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let body = json_line(&out);
    assert_eq!(body["valid"], false);
    assert_eq!(body["violations"][0]["code"], "IncompatibleConnection");
}

#[test]
fn run_without_inputs_reports_missing_input() {
    let env = Env::new();
    let out = env.mosaic(&["--format", "json", "mosaic", "run", FIXTURE, "--chain", "0"]);
    assert_ne!(out.status.code(), Some(0));
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json_line(&out)["error"], "MissingInput");

    let out = env.mosaic(&["mosaic", "run", FIXTURE, "--input", "banana"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("<instance>=<value>"));
}

fn design_args(env: &Env) -> Vec<String> {
    let catalog = Catalog::load_builtin();
    let (_, ids) = walkthrough::build(&catalog).unwrap();
    let photo = env.file("client.png", &walkthrough::client_photo());
    vec![
        "--input".into(),
        format!("{}={}", ids.design_photo.0, photo.display()),
        "--input".into(),
        format!("{}={CONCEPT}", ids.concept_text.0),
        "--input".into(),
        format!("{}={STAIRCASE_INSTRUCTION}", ids.instruction_text.0),
    ]
}

#[tokio::test(flavor = "multi_thread")]
async fn run_json_is_byte_identical_to_the_service() {
    let env = Env::new();
    let mut args: Vec<String> = ["--format", "json", "mosaic", "run", FIXTURE, "--chain", "1"].map(String::from).to_vec();
    args.extend(design_args(&env));
    let out = env.mosaic(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cli = stdout(&out);
    let record: Value = serde_json::from_str(&cli).unwrap();
    assert_eq!(record["status"], "done");
    assert_eq!(record["mosaic_id"], "interior_design");
    let run_id = record["run_id"].as_str().unwrap();

    let served = env.service(Method::GET, &format!("/runs/{run_id}"), String::new()).await;
    assert_eq!(cli.trim_end(), served);

    let outputs = env.workspace().join("outputs").join(run_id);
    assert_eq!(std::fs::read_dir(&outputs).unwrap().count(), 9);
    assert!(outputs.join("12_generate_3d_model_from_image.glb").exists());

    let out = env.mosaic(&["--format", "json", "mosaic", "validate", FIXTURE]);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(FIXTURE).unwrap()).unwrap();
    let served = env.service(Method::POST, "/validate", doc["mosaic"].to_string()).await;
    assert_eq!(stdout(&out).trim_end(), served);
}

#[test]
fn human_run_lists_written_outputs() {
    let env = Env::new();
    let mut args: Vec<String> = ["mosaic", "run", FIXTURE, "--chain", "1"].map(String::from).to_vec();
    args.extend(design_args(&env));
    let out = env.mosaic(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().next().unwrap().ends_with(" done"));
    assert_eq!(text.lines().filter(|l| Path::new(l.trim()).exists()).count(), 9);
    assert!(String::from_utf8_lossy(&out.stderr).contains("generate_3d_model_from_image done"));
}

#[test]
fn sketch_inputs_accept_image_files() {
    let env = Env::new();
    let catalog = Catalog::load_builtin();
    let mut mosaic = Mosaic::new();
    let sketch = mosaic.apply_edit(&catalog, Edit::add("draw_sketch", 0.0, 0.0)).unwrap().created().unwrap();
    let prompt = mosaic.apply_edit(&catalog, Edit::add("type_text", 0.0, 4.0)).unwrap().created().unwrap();
    let render =
        mosaic.apply_edit(&catalog, Edit::add("generate_image_from_text_and_sketch", 6.0, 0.0)).unwrap().created().unwrap();
    mosaic.apply_edit(&catalog, Edit::Connect { from: sketch, to: render, channel: 0 }).unwrap();
    mosaic.apply_edit(&catalog, Edit::Connect { from: prompt, to: render, channel: 1 }).unwrap();
    let file = env.file("sketch.json", serde_json::to_string(mosaic.graph()).unwrap().as_bytes());
    let png = env.file("doodle.png", &walkthrough::client_photo());

    let out = env.mosaic(&[
        "--format",
        "json",
        "mosaic",
        "run",
        file.to_str().unwrap(),
        "--input",
        &format!("{sketch}={}", png.display()),
        "--input",
        &format!("{prompt}=a chair"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert_eq!(json_line(&out)["entries"][0]["output"]["modality"], "sketch");

    let wav = env.file("noise.wav", b"RIFF\0\0\0\0WAVEfmt ");
    let out = env.mosaic(&[
        "--format",
        "json",
        "mosaic",
        "run",
        file.to_str().unwrap(),
        "--input",
        &format!("{sketch}={}", wav.display()),
        "--input",
        &format!("{prompt}=a chair"),
    ]);
    assert_eq!(json_line(&out)["error"], "InputMismatch");
}

#[test]
fn assist_applies_a_scripted_plan_to_a_file() {
    let env = Env::new();
    let transcript = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/transcripts/music_repair.json");
    let file = env.file("design.mosaic.json", &std::fs::read(FIXTURE).unwrap());
    let out = env.mosaic(&[
        "--transcript",
        transcript,
        "assist",
        "help add music based on the image",
        "--apply",
        file.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("criterion 2: passed"), "{text}");
    assert!(text.contains("added 4 piece(s)"));

    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(doc["version"], 2);
    assert_eq!(doc["mosaic"]["pieces"].as_array().unwrap().len(), 20);
    assert_eq!(env.mosaic(&["mosaic", "validate", file.to_str().unwrap()]).status.code(), Some(0));

    let out = env.mosaic(&["assist", "anything"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("LlmNotConfigured"));

    let bad = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/transcripts/music_unrepairable.json");
    let out = env.mosaic(&["--format", "json", "--transcript", bad, "assist", "help add music based on the image"]);
    assert_eq!(out.status.code(), Some(6));
    assert_eq!(json_line(&out)["error"], "UnrepairablePlan");
}
