//! Chain execution: adapters, caching, run records and progress events.

mod adapter;
mod cache;
pub mod http;
pub mod mock;
mod record;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::Utc;
use thiserror::Error;

pub use adapter::{
    Adapter, AdapterCall, AdapterError, AdapterOutput, AdapterRegistry, GlueAdapter, MockAdapter,
    PassthroughAdapter, UnknownAdapterSpec,
};
pub use cache::{CacheKey, OutputCache};
pub use record::{
    fold_events, intermediate_output, trace_pair, ChainSnapshot, EventKind, FailureKind, InspectError,
    PieceEntry, PieceFailure, PieceProgress, PieceStatus, RunEvent, RunProgress, RunRecord, RunStatus,
    SnapshotPiece, ValueSummary,
};

use crate::blob::{BlobError, BlobStore};
use crate::catalog::Catalog;
use crate::media::{ContentHash, MediaValue, Payload, Producer, Provenance};
use crate::modality::Modality;
use crate::mosaic::{chains, ChainError, InstanceId, MosaicGraph, UnknownSpec, Violation};
use crate::piece::PieceKind;

pub const DEFAULT_PIECE_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("chain {index} does not exist (mosaic has {count})")]
    UnknownChain { index: usize, count: usize },
    #[error("mosaic has {} violation(s)", .0.len())]
    InvalidMosaic(Vec<Violation>),
    #[error(transparent)]
    UnknownSpec(#[from] UnknownSpec),
    #[error("input piece {0} has no user input")]
    MissingInput(InstanceId),
    #[error("input piece {instance} expects {expected}, got {found}")]
    InputMismatch { instance: InstanceId, expected: Modality, found: Modality },
    #[error("instance {0} is not an input piece of this chain")]
    UnexpectedInput(InstanceId),
    #[error("user input for {instance} references missing blob {hash}")]
    MissingBlob { instance: InstanceId, hash: ContentHash },
}

impl From<ChainError> for RunError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::UnknownSpec(u) => RunError::UnknownSpec(u),
            ChainError::InvalidMosaic(v) => RunError::InvalidMosaic(v),
        }
    }
}

/// Receives every event as it happens, together with the record state right
/// after the transition it describes.
pub trait RunObserver {
    fn on_event(&self, event: &RunEvent, record: &RunRecord);
}

impl RunObserver for () {
    fn on_event(&self, _: &RunEvent, _: &RunRecord) {}
}

/// Collects events in memory.
#[derive(Debug, Default)]
pub struct EventLog {
    events: Mutex<Vec<RunEvent>>,
}

impl EventLog {
    pub fn events(&self) -> Vec<RunEvent> {
        self.events.lock().expect("event log poisoned").clone()
    }
}

impl RunObserver for EventLog {
    fn on_event(&self, event: &RunEvent, _: &RunRecord) {
        self.events.lock().expect("event log poisoned").push(event.clone());
    }
}

/// A run whose preconditions hold, ready to execute.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    record: RunRecord,
    user_inputs: BTreeMap<InstanceId, MediaValue>,
}

impl PreparedRun {
    pub fn run_id(&self) -> &str {
        &self.record.run_id
    }

    /// The initial record: every piece pending.
    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn with_mosaic_id(mut self, id: impl Into<String>) -> Self {
        self.record.mosaic_id = Some(id.into());
        self
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    registry: AdapterRegistry,
    blobs: BlobStore,
    cache: OutputCache,
    piece_timeout: Duration,
}

impl Engine {
    pub fn new(registry: AdapterRegistry, blobs: BlobStore, cache: OutputCache) -> Self {
        Engine { registry, blobs, cache, piece_timeout: DEFAULT_PIECE_TIMEOUT }
    }

    /// Mock adapters, in-memory blobs and cache.
    pub fn in_memory(catalog: Arc<Catalog>) -> Self {
        Self::new(AdapterRegistry::with_mocks(catalog), BlobStore::in_memory(), OutputCache::in_memory())
    }

    pub fn with_piece_timeout(mut self, timeout: Duration) -> Self {
        self.piece_timeout = timeout;
        self
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        self.registry.catalog()
    }

    pub fn registry(&self) -> &AdapterRegistry {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut AdapterRegistry {
        &mut self.registry
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    /// Checks preconditions and snapshots the chain. `user_inputs` must cover
    /// exactly the chain's input pieces.
    pub fn prepare(
        &self,
        graph: &MosaicGraph,
        chain_index: usize,
        user_inputs: &BTreeMap<InstanceId, MediaValue>,
    ) -> Result<PreparedRun, RunError> {
        let catalog = self.catalog();
        let all = chains(graph, catalog)?;
        let chain = all
            .get(chain_index)
            .ok_or(RunError::UnknownChain { index: chain_index, count: all.len() })?;

        let mut inputs = BTreeMap::new();
        for &id in &chain.order {
            let piece = graph.piece(id).expect("chain member");
            let spec = catalog.get(&piece.spec_id).expect("validated spec");
            if spec.kind != PieceKind::Input {
                continue;
            }
            let value = user_inputs.get(&id).ok_or(RunError::MissingInput(id))?;
            let expected = spec.output_modality();
            if value.modality != expected || !value.payload_matches_modality() {
                return Err(RunError::InputMismatch { instance: id, expected, found: value.modality });
            }
            if let Payload::Blob { hash, .. } = &value.payload {
                if !self.blobs.contains(hash) {
                    return Err(RunError::MissingBlob { instance: id, hash: hash.clone() });
                }
            }
            inputs.insert(id, value.clone());
        }
        if let Some(&extra) = user_inputs.keys().find(|id| !inputs.contains_key(id)) {
            return Err(RunError::UnexpectedInput(extra));
        }

        let pieces: Vec<SnapshotPiece> = chain
            .order
            .iter()
            .map(|&id| {
                let piece = graph.piece(id).expect("chain member");
                let spec = catalog.get(&piece.spec_id).expect("validated spec");
                SnapshotPiece {
                    instance_id: id,
                    spec_id: piece.spec_id.clone(),
                    parameters: spec.effective_parameters(&piece.parameter_values),
                }
            })
            .collect();
        let connections = graph
            .connections()
            .iter()
            .filter(|c| chain.contains(c.to_instance))
            .copied()
            .collect();
        let entries = pieces.iter().map(|p| PieceEntry::pending(p.instance_id, p.spec_id.clone())).collect();
        Ok(PreparedRun {
            record: RunRecord {
                run_id: uuid::Uuid::new_v4().to_string(),
                mosaic_id: None,
                chain: ChainSnapshot { chain_index, pieces, connections },
                entries,
                status: RunStatus::Running,
                started_at: Utc::now(),
                finished_at: None,
            },
            user_inputs: inputs,
        })
    }

    /// Executes a prepared run to completion. Adapter failures and timeouts
    /// are recorded, not returned; their downstream pieces are skipped while
    /// independent branches still run.
    pub fn execute(&self, prepared: PreparedRun, observer: &dyn RunObserver) -> RunRecord {
        let PreparedRun { mut record, user_inputs } = prepared;
        let mut seq = 0u64;
        let mut emit = |record: &RunRecord, kind: EventKind| {
            let event = RunEvent { run_id: record.run_id.clone(), seq, kind };
            seq += 1;
            observer.on_event(&event, record);
        };

        let snapshot = record.chain.clone();
        for piece in &snapshot.pieces {
            let id = piece.instance_id;
            let spec = self.catalog().get(&piece.spec_id).expect("validated spec").clone();

            let mut inputs = Vec::with_capacity(spec.arity().max(1));
            let mut ready = true;
            if spec.kind == PieceKind::Input {
                inputs.push(user_inputs[&id].clone());
            } else {
                for channel in 0..spec.arity() as u8 {
                    let producer = snapshot
                        .connections
                        .iter()
                        .find(|c| c.to_instance == id && c.to_channel == channel)
                        .expect("valid chain has every channel connected")
                        .from_instance;
                    match record.entry(producer).and_then(|e| e.output.clone()) {
                        Some(v) if record.entry(producer).map(|e| e.status) == Some(PieceStatus::Done) => {
                            inputs.push(v)
                        }
                        _ => ready = false,
                    }
                }
            }
            if !ready {
                record.entry_mut(id).status = PieceStatus::Skipped;
                continue;
            }

            let started = Instant::now();
            {
                let entry = record.entry_mut(id);
                entry.status = PieceStatus::Running;
                entry.started_at = Some(Utc::now());
                entry.inputs = inputs.clone();
            }
            emit(&record, EventKind::PieceStarted { instance_id: id });

            let key = CacheKey {
                spec_id: spec.spec_id.clone(),
                params_hash: ContentHash::of_params(&piece.parameters),
                input_hashes: inputs.iter().map(MediaValue::content_hash).collect(),
            };
            let adapter = self.registry.get(&spec.spec_id).expect("registry is total");
            let provenance = Provenance {
                producer: Producer::Instance(id),
                params_hash: Some(key.params_hash.clone()),
                input_hashes: key.input_hashes.clone(),
                prompt: None,
            };

            let cached = if adapter.deterministic() { self.cached(&key) } else { None };
            let cache_hit = cached.is_some();
            let outcome = match cached {
                Some(mut value) => {
                    value.provenance.producer = Producer::Instance(id);
                    Ok(value)
                }
                None => {
                    let call = AdapterCall {
                        spec: spec.clone(),
                        inputs,
                        params: piece.parameters.clone(),
                        blobs: self.blobs.clone(),
                    };
                    self.invoke(adapter.clone(), call)
                        .and_then(|out| self.to_value(out, spec.output_modality(), provenance))
                }
            };

            let wall_time_ms = started.elapsed().as_millis() as u64;
            match outcome {
                Ok(value) => {
                    if adapter.deterministic() && !cache_hit {
                        if let Err(e) = self.cache.put(&key, &value) {
                            tracing::warn!(error = %e, "could not persist cache entry");
                        }
                    }
                    let summary = ValueSummary::of(&value);
                    let entry = record.entry_mut(id);
                    entry.status = PieceStatus::Done;
                    entry.output = Some(value);
                    entry.finished_at = Some(Utc::now());
                    entry.wall_time_ms = Some(wall_time_ms);
                    entry.cache_hit = cache_hit;
                    emit(&record, EventKind::PieceDone { instance_id: id, output: summary, cache_hit, wall_time_ms });
                }
                Err(error) => {
                    let entry = record.entry_mut(id);
                    entry.status = PieceStatus::Failed;
                    entry.finished_at = Some(Utc::now());
                    entry.wall_time_ms = Some(wall_time_ms);
                    entry.error = Some(error.clone());
                    emit(&record, EventKind::PieceFailed { instance_id: id, error });
                }
            }
        }

        record.status = if record.entries.iter().any(|e| e.status == PieceStatus::Failed) {
            RunStatus::Failed
        } else {
            RunStatus::Done
        };
        record.finished_at = Some(Utc::now());
        let status = record.status;
        emit(&record, EventKind::RunDone { status });
        record
    }

    pub fn run_chain(
        &self,
        graph: &MosaicGraph,
        chain_index: usize,
        user_inputs: &BTreeMap<InstanceId, MediaValue>,
        observer: &dyn RunObserver,
    ) -> Result<RunRecord, RunError> {
        let prepared = self.prepare(graph, chain_index, user_inputs)?;
        Ok(self.execute(prepared, observer))
    }

    /// Stores user-supplied media and wraps it as an input value.
    pub fn upload(&self, modality: Modality, bytes: &[u8], format: crate::FormatTag) -> Result<MediaValue, BlobError> {
        let hash = self.blobs.put(bytes)?;
        Ok(MediaValue::user_blob(modality, hash, format))
    }

    fn cached(&self, key: &CacheKey) -> Option<MediaValue> {
        let value = self.cache.get(key)?;
        match &value.payload {
            Payload::Blob { hash, .. } if !self.blobs.contains(hash) => None,
            _ => Some(value),
        }
    }

    fn invoke(&self, adapter: Arc<dyn Adapter>, call: AdapterCall) -> Result<AdapterOutput, PieceFailure> {
        let (tx, rx) = mpsc::channel();
        let name = format!("adapter-{}", call.spec.spec_id);
        let spawned = thread::Builder::new().name(name).spawn(move || {
            let result = catch_unwind(AssertUnwindSafe(|| adapter.execute(&call)));
            let _ = tx.send(result);
        });
        if let Err(e) = spawned {
            return Err(failure(FailureKind::AdapterFailure, format!("could not start adapter: {e}")));
        }
        match rx.recv_timeout(self.piece_timeout) {
            Ok(Ok(Ok(output))) => Ok(output),
            Ok(Ok(Err(e))) => Err(failure(FailureKind::AdapterFailure, e.message)),
            Ok(Err(_)) => Err(failure(FailureKind::AdapterFailure, "adapter panicked".into())),
            // The worker thread is abandoned; it cannot be cancelled.
            Err(RecvTimeoutError::Timeout) => Err(failure(
                FailureKind::Timeout,
                format!("no result within {} ms", self.piece_timeout.as_millis()),
            )),
            Err(RecvTimeoutError::Disconnected) => {
                Err(failure(FailureKind::AdapterFailure, "adapter exited without a result".into()))
            }
        }
    }

    fn to_value(
        &self,
        output: AdapterOutput,
        modality: Modality,
        mut provenance: Provenance,
    ) -> Result<MediaValue, PieceFailure> {
        let payload = match output {
            AdapterOutput::Text { text, prompt } => {
                provenance.prompt = prompt;
                Payload::Text { text }
            }
            AdapterOutput::Blob { bytes, format } => {
                let hash = self
                    .blobs
                    .put(&bytes)
                    .map_err(|e| failure(FailureKind::AdapterFailure, format!("storing output: {e}")))?;
                Payload::Blob { hash, format }
            }
        };
        let value = MediaValue { modality, payload, provenance };
        if !value.payload_matches_modality() {
            return Err(failure(
                FailureKind::AdapterFailure,
                format!("adapter returned a payload that cannot carry {modality}"),
            ));
        }
        Ok(value)
    }
}

fn failure(kind: FailureKind, message: String) -> PieceFailure {
    PieceFailure { kind, message }
}
