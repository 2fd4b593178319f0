//! Wiring shared by the server and the CLI: catalog, workspace, adapters and
//! LLM client, configured from flags or the environment.

use std::path::PathBuf;
use std::sync::Arc;

use serde_json::Value;
use thiserror::Error;

use crate::assistant::assist;
use crate::catalog::Catalog;
use crate::engine::http::{load_config, register_all, AdapterConfigError};
use crate::engine::{AdapterRegistry, Engine};
use crate::llm::{client_from_env, ClientError, CompletionClient, ENV_ENDPOINT, ENV_TRANSCRIPT};
use crate::mosaic::Mosaic;
use crate::search::{RelevanceScorer, RemoteEmbeddingScorer};
use crate::store::{StoreError, Workspace};
use crate::wire::{AssistBody, ErrorBody, ErrorClass};

pub const ENV_WORKSPACE: &str = "MOSAIC_WORKSPACE";
pub const ENV_ADAPTERS: &str = "MOSAIC_ADAPTERS";

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Workspace(#[from] StoreError),
    #[error(transparent)]
    Adapters(#[from] AdapterConfigError),
    #[error("LLM client: {0}")]
    Llm(#[from] ClientError),
}

#[derive(Default)]
pub struct StudioOptions {
    pub workspace: PathBuf,
    /// HTTP adapter configuration; specs it does not name keep their mocks.
    pub adapters: Option<PathBuf>,
    pub llm: Option<Arc<dyn CompletionClient>>,
    pub scorer: Option<Arc<dyn RelevanceScorer>>,
}

impl StudioOptions {
    /// Fills adapters, LLM client and search scorer from the environment.
    pub fn from_env(workspace: PathBuf) -> Result<Self, SetupError> {
        Ok(StudioOptions {
            workspace,
            adapters: std::env::var_os(ENV_ADAPTERS).map(PathBuf::from),
            llm: client_from_env()?,
            scorer: RemoteEmbeddingScorer::from_env().map(|s| Arc::new(s) as Arc<dyn RelevanceScorer>),
        })
    }
}

#[derive(Clone)]
pub struct Studio {
    pub catalog: Arc<Catalog>,
    pub workspace: Workspace,
    pub engine: Arc<Engine>,
    pub llm: Option<Arc<dyn CompletionClient>>,
}

impl Studio {
    pub fn open(options: StudioOptions) -> Result<Studio, SetupError> {
        let mut catalog = Catalog::load_builtin();
        if let Some(scorer) = options.scorer {
            catalog = catalog.with_scorer(scorer);
        }
        let catalog = Arc::new(catalog);
        let workspace = Workspace::open(&options.workspace)?;
        let mut registry = AdapterRegistry::with_mocks(catalog.clone());
        if let Some(client) = &options.llm {
            registry.use_llm(client.clone());
        }
        if let Some(path) = &options.adapters {
            register_all(&mut registry, &load_config(path)?)?;
        }
        let engine = Engine::new(registry, workspace.blobs().clone(), workspace.cache().clone());
        Ok(Studio { catalog, workspace, engine: Arc::new(engine), llm: options.llm })
    }
}

impl Studio {
    pub fn llm(&self) -> Result<&dyn CompletionClient, ErrorBody> {
        self.llm.as_deref().ok_or_else(|| {
            ErrorBody::new(
                ErrorClass::Precondition,
                "LlmNotConfigured",
                format!("no LLM configured; set {ENV_ENDPOINT} or {ENV_TRANSCRIPT}"),
                Value::Null,
            )
        })
    }

    /// Runs the assistant. With `target`, the plan is appended to that stored
    /// mosaic and saved, refusing if the stored version is not `version`;
    /// otherwise it lands on an empty canvas that is only returned.
    pub fn assist(&self, task: &str, target: Option<(&str, Option<u64>)>) -> Result<AssistBody, ErrorBody> {
        let client = self.llm()?;
        let Some((id, version)) = target else {
            let mut mosaic = Mosaic::new();
            let outcome = assist(task, &self.catalog, client, &mut mosaic).map_err(|e| ErrorBody::from(&e))?;
            return Ok(AssistBody::new(outcome, mosaic.into_graph()));
        };
        let doc = self.workspace.load_document(id).map_err(|e| ErrorBody::from(&e))?;
        if let Some(expected) = version.filter(|&v| v != doc.version) {
            return Err(ErrorBody::from(&StoreError::VersionConflict { expected, found: doc.version }));
        }
        let mut mosaic = Mosaic::from_graph(doc.mosaic);
        let outcome = assist(task, &self.catalog, client, &mut mosaic).map_err(|e| ErrorBody::from(&e))?;
        let saved = self
            .workspace
            .update_mosaic(id, doc.version, None, &self.catalog, mosaic.into_graph())
            .map_err(|e| ErrorBody::from(&e))?;
        Ok(AssistBody::new(outcome, saved.mosaic))
    }
}
