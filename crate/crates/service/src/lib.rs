//! HTTP API over a Mosaic workspace: catalog, mosaics, runs with live
//! events, blobs and the assistant.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use futures::stream::{self, Stream};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Semaphore};

use mosaic_core::engine::{RunEvent, RunObserver, RunRecord, RunStatus};
use mosaic_core::studio::Studio;
use mosaic_core::wire::{
    self, resolve_inputs, AssistRequest, BlobBody, CatalogBody, CreateMosaicRequest, DocumentBody, ErrorBody,
    ErrorClass, RunAccepted, RunRequest, SearchBody, UpdateMosaicRequest,
};
use mosaic_core::{ContentHash, FormatTag, InstanceId, MosaicGraph, Payload};

pub const DEFAULT_MAX_RUNS: usize = 4;
pub const DEFAULT_SEARCH_K: usize = 10;

/// An error rendered as its wire body with the matching status.
#[derive(Debug)]
pub struct ApiError(pub ErrorBody);

impl<E> From<&E> for ApiError
where
    for<'a> &'a E: Into<ErrorBody>,
{
    fn from(e: &E) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.class().http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json_response(status, &self.0)
    }
}

type ApiResult<T = Response> = Result<T, ApiError>;

fn json_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], wire::to_json(body)).into_response()
}

fn ok<T: Serialize>(body: &T) -> ApiResult {
    Ok(json_response(StatusCode::OK, body))
}

fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError(ErrorBody::usage(format!("invalid request body: {e}"))))
}

fn internal(message: impl Into<String>) -> ApiError {
    ApiError(ErrorBody::new(ErrorClass::Internal, "Internal", message, serde_json::Value::Null))
}

fn not_found(kind: &str, id: &str) -> ApiError {
    ApiError(ErrorBody::new(ErrorClass::NotFound, "NotFound", format!("{kind} `{id}` not found"), serde_json::Value::Null))
}

/// Live state of one run: the latest record and every event so far.
/// Subscribers wake on the event count.
pub struct RunHandle {
    state: Mutex<(RunRecord, Vec<RunEvent>)>,
    events: watch::Sender<usize>,
}

impl RunHandle {
    fn new(record: RunRecord) -> Self {
        RunHandle { state: Mutex::new((record, Vec::new())), events: watch::Sender::new(0) }
    }

    pub fn record(&self) -> RunRecord {
        self.state.lock().expect("run state poisoned").0.clone()
    }

    fn events_from(&self, cursor: usize) -> Vec<RunEvent> {
        self.state.lock().expect("run state poisoned").1.get(cursor..).unwrap_or_default().to_vec()
    }
}

impl RunObserver for RunHandle {
    fn on_event(&self, event: &RunEvent, record: &RunRecord) {
        let count = {
            let mut state = self.state.lock().expect("run state poisoned");
            state.0 = record.clone();
            state.1.push(event.clone());
            state.1.len()
        };
        self.events.send_replace(count);
    }
}

pub struct AppState {
    pub studio: Studio,
    runs: Mutex<HashMap<String, Arc<RunHandle>>>,
    mosaic_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    permits: Arc<Semaphore>,
}

impl AppState {
    pub fn new(studio: Studio, max_runs: usize) -> Arc<Self> {
        Arc::new(AppState {
            studio,
            runs: Mutex::new(HashMap::new()),
            mosaic_locks: Mutex::new(HashMap::new()),
            permits: Arc::new(Semaphore::new(max_runs.max(1))),
        })
    }

    fn run(&self, id: &str) -> Option<Arc<RunHandle>> {
        self.runs.lock().expect("runs poisoned").get(id).cloned()
    }

    /// Read-modify-write of one stored mosaic goes through this lock.
    fn mosaic_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.mosaic_locks.lock().expect("locks poisoned").entry(id.to_string()).or_default().clone()
    }

    fn record(&self, run_id: &str) -> ApiResult<RunRecord> {
        match self.run(run_id) {
            Some(handle) => Ok(handle.record()),
            None => self.studio.workspace.load_run(run_id).map_err(|e| ApiError::from(&e)),
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/catalog", get(catalog))
        .route("/catalog/search", get(search))
        .route("/validate", post(validate))
        .route("/mosaics", get(list_mosaics).post(create_mosaic))
        .route("/mosaics/{id}", get(get_mosaic).put(update_mosaic))
        .route("/mosaics/{id}/validation", get(validate_stored))
        .route("/mosaics/{id}/chains/{chain}/runs", post(start_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/events", get(run_events))
        .route("/runs/{id}/pieces/{piece}/output", get(piece_output))
        .route("/blobs", post(upload_blob))
        .route("/blobs/{hash}", get(get_blob))
        .route("/assist", post(assist))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| internal(format!("worker failed: {e}")))
}

async fn catalog(State(state): State<Arc<AppState>>) -> ApiResult {
    ok(&CatalogBody::new(&state.studio.catalog))
}

#[derive(Debug, Deserialize)]
struct SearchQuery {
    q: Option<String>,
    k: Option<usize>,
}

async fn search(State(state): State<Arc<AppState>>, Query(query): Query<SearchQuery>) -> ApiResult {
    let Some(q) = query.q.filter(|q| !q.trim().is_empty()) else {
        return Err(ApiError(ErrorBody::usage("missing query parameter `q`")));
    };
    let k = query.k.unwrap_or(DEFAULT_SEARCH_K);
    // A remote scorer makes blocking HTTP calls.
    let catalog = state.studio.catalog.clone();
    let body = blocking(move || catalog.search(&q, k).map(|hits| SearchBody::new(&catalog, &q, hits))).await?;
    ok(&body.map_err(|e| ApiError::from(&e))?)
}

async fn validate(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let graph: MosaicGraph = parse_body(&body)?;
    ok(&wire::validation_body(&graph, &state.studio.catalog))
}

async fn validate_stored(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let graph = state.studio.workspace.load_mosaic(&id).map_err(|e| ApiError::from(&e))?;
    ok(&wire::validation_body(&graph, &state.studio.catalog))
}

async fn list_mosaics(State(state): State<Arc<AppState>>) -> ApiResult {
    ok(&state.studio.workspace.list_mosaics().map_err(|e| ApiError::from(&e))?)
}

async fn create_mosaic(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let request: CreateMosaicRequest = if body.is_empty() { CreateMosaicRequest::default() } else { parse_body(&body)? };
    let studio = &state.studio;
    let doc = studio
        .workspace
        .create_mosaic(&request.title, &studio.catalog, request.mosaic)
        .map_err(|e| ApiError::from(&e))?;
    let location = format!("/mosaics/{}", doc.id);
    let mut response = json_response(StatusCode::CREATED, &DocumentBody::new(doc, &studio.catalog));
    if let Ok(value) = HeaderValue::from_str(&location) {
        response.headers_mut().insert(header::LOCATION, value);
    }
    Ok(response)
}

async fn get_mosaic(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let doc = state.studio.workspace.load_document(&id).map_err(|e| ApiError::from(&e))?;
    ok(&DocumentBody::new(doc, &state.studio.catalog))
}

async fn update_mosaic(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let request: UpdateMosaicRequest = parse_body(&body)?;
    let lock = state.mosaic_lock(&id);
    let _guard = lock.lock().await;
    let studio = &state.studio;
    let doc = studio
        .workspace
        .update_mosaic(&id, request.version, request.title.as_deref(), &studio.catalog, request.mosaic)
        .map_err(|e| ApiError::from(&e))?;
    ok(&DocumentBody::new(doc, &studio.catalog))
}

async fn start_run(
    State(state): State<Arc<AppState>>,
    Path((id, chain)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult {
    let chain: usize =
        chain.parse().map_err(|_| ApiError(ErrorBody::usage(format!("chain index `{chain}` is not a number"))))?;
    let request: RunRequest = if body.is_empty() { RunRequest::default() } else { parse_body(&body)? };
    let studio = &state.studio;
    let graph = studio.workspace.load_mosaic(&id).map_err(|e| ApiError::from(&e))?;
    let inputs = resolve_inputs(&graph, &studio.catalog, studio.engine.blobs(), request.inputs).map_err(ApiError)?;
    let prepared = studio.engine.prepare(&graph, chain, &inputs).map_err(|e| ApiError::from(&e))?.with_mosaic_id(&id);

    let run_id = prepared.run_id().to_string();
    let handle = Arc::new(RunHandle::new(prepared.record().clone()));
    state.runs.lock().expect("runs poisoned").insert(run_id.clone(), handle.clone());

    let engine = studio.engine.clone();
    let workspace = studio.workspace.clone();
    let permits = state.permits.clone();
    tokio::spawn(async move {
        let Ok(_permit) = permits.acquire_owned().await else { return };
        let run_id = prepared.run_id().to_string();
        let outcome = tokio::task::spawn_blocking(move || {
            let record = engine.execute(prepared, handle.as_ref());
            workspace.save_run(&record)
        })
        .await;
        match outcome {
            Ok(Ok(())) => tracing::info!(%run_id, "run finished"),
            Ok(Err(e)) => tracing::error!(%run_id, error = %e, "could not store run record"),
            Err(e) => tracing::error!(%run_id, error = %e, "run worker failed"),
        }
    });

    let accepted = RunAccepted { run_id: run_id.clone(), mosaic_id: id, chain, status: RunStatus::Running };
    let mut response = json_response(StatusCode::ACCEPTED, &accepted);
    if let Ok(value) = HeaderValue::from_str(&format!("/runs/{run_id}")) {
        response.headers_mut().insert(header::LOCATION, value);
    }
    Ok(response)
}

async fn get_run(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    ok(&state.record(&id)?)
}

/// Replays the run's events from the start, then follows it live until
/// `run_done`. Runs only known from disk replay nothing but a final
/// `run_done`.
async fn run_events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let source = match state.run(&id) {
        Some(handle) => EventSource::Live { rx: handle.events.subscribe(), handle, cursor: 0 },
        None => {
            let record = state.studio.workspace.load_run(&id).map_err(|e| ApiError::from(&e))?;
            let done = RunEvent {
                run_id: record.run_id.clone(),
                seq: 0,
                kind: mosaic_core::engine::EventKind::RunDone { status: record.status },
            };
            EventSource::Stored(Some(done))
        }
    };
    let events = stream::unfold((source, Vec::<RunEvent>::new()), |(mut source, mut pending)| async move {
        loop {
            if !pending.is_empty() {
                let event = pending.remove(0);
                let finished = event.is_terminal();
                let sse = to_sse(&event);
                let next = if finished { EventSource::Stored(None) } else { source };
                return Some((Ok(sse), (next, pending)));
            }
            match &mut source {
                EventSource::Stored(next) => {
                    pending.extend(next.take());
                    if pending.is_empty() {
                        return None;
                    }
                }
                EventSource::Live { handle, rx, cursor } => {
                    let fresh = handle.events_from(*cursor);
                    if fresh.is_empty() {
                        if rx.changed().await.is_err() {
                            return None;
                        }
                        continue;
                    }
                    *cursor += fresh.len();
                    pending.extend(fresh);
                }
            }
        }
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

enum EventSource {
    Live { handle: Arc<RunHandle>, rx: watch::Receiver<usize>, cursor: usize },
    Stored(Option<RunEvent>),
}

fn to_sse(event: &RunEvent) -> Event {
    Event::default().event(event.name()).id(event.seq.to_string()).data(wire::to_json(event))
}

async fn piece_output(State(state): State<Arc<AppState>>, Path((id, piece)): Path<(String, String)>) -> ApiResult {
    let instance: u64 =
        piece.parse().map_err(|_| ApiError(ErrorBody::usage(format!("piece id `{piece}` is not a number"))))?;
    let record = state.record(&id)?;
    let value = record.intermediate_output(InstanceId(instance)).map_err(|e| ApiError::from(&e))?;
    let hash = value.content_hash();
    let (content_type, bytes) = match &value.payload {
        Payload::Text { text } => ("text/plain; charset=utf-8", text.clone().into_bytes()),
        Payload::Blob { hash, format } => {
            let bytes = state.studio.engine.blobs().get(hash).map_err(|_| not_found("blob", hash.as_str()))?;
            (format.content_type(), bytes)
        }
    };
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    headers.insert("x-content-hash", HeaderValue::from_str(hash.as_str()).map_err(|e| internal(e.to_string()))?);
    Ok((headers, bytes).into_response())
}

async fn upload_blob(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    if body.is_empty() {
        return Err(ApiError(ErrorBody::usage("empty upload")));
    }
    let declared = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(FormatTag::from_content_type);
    let format = declared
        .or_else(|| FormatTag::sniff(&body))
        .ok_or_else(|| ApiError(ErrorBody::usage("unsupported media type; send a Content-Type the catalog knows")))?;
    let hash = state.studio.engine.blobs().put(&body).map_err(|e| internal(e.to_string()))?;
    let blob = BlobBody { hash, format, content_type: format.content_type().to_string(), size: body.len() };
    Ok(json_response(StatusCode::CREATED, &blob))
}

async fn get_blob(State(state): State<Arc<AppState>>, Path(hash): Path<String>) -> ApiResult {
    let parsed: ContentHash = hash.parse().map_err(|_| not_found("blob", &hash))?;
    let bytes = state.studio.engine.blobs().get(&parsed).map_err(|_| not_found("blob", &hash))?;
    let content_type = FormatTag::sniff(&bytes).map_or("application/octet-stream", FormatTag::content_type);
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}

async fn assist(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let request: AssistRequest = parse_body(&body)?;
    let lock = request.mosaic_id.as_deref().map(|id| state.mosaic_lock(id));
    let _guard = match &lock {
        Some(lock) => Some(lock.lock().await),
        None => None,
    };
    let studio = state.studio.clone();
    let body = blocking(move || {
        let target = request.mosaic_id.as_deref().map(|id| (id, request.version));
        studio.assist(&request.task, target)
    })
    .await?;
    ok(&body.map_err(ApiError)?)
}
