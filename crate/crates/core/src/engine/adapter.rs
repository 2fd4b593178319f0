use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::mock;
use crate::blob::BlobStore;
use crate::catalog::Catalog;
use crate::glue::{self, GlueMode};
use crate::llm::CompletionClient;
use crate::media::{FormatTag, MediaValue};
use crate::piece::{ParamMap, PieceKind, PieceSpec};

/// Everything an adapter needs for one execution. Owned so the call can run
/// on a worker thread.
#[derive(Debug, Clone)]
pub struct AdapterCall {
    pub spec: PieceSpec,
    /// One value per input channel, in channel order. Input pieces receive
    /// the user's value as their only input.
    pub inputs: Vec<MediaValue>,
    /// Effective parameters: defaults merged with the instance's overrides.
    pub params: ParamMap,
    pub blobs: BlobStore,
}

impl AdapterCall {
    pub fn input_text(&self, channel: usize) -> Result<String, AdapterError> {
        let value = self
            .inputs
            .get(channel)
            .ok_or_else(|| AdapterError::new(format!("missing input on channel {channel}")))?;
        match value.as_text() {
            Some(t) => Ok(t.to_string()),
            None => Err(AdapterError::new(format!("channel {channel} is not text"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdapterOutput {
    Text { text: String, prompt: Option<String> },
    Blob { bytes: Vec<u8>, format: FormatTag },
}

impl AdapterOutput {
    pub fn text(text: impl Into<String>) -> Self {
        AdapterOutput::Text { text: text.into(), prompt: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct AdapterError {
    pub message: String,
}

impl AdapterError {
    pub fn new(message: impl Into<String>) -> Self {
        AdapterError { message: message.into() }
    }
}

/// Binds one catalog spec to an inference backend.
pub trait Adapter: Send + Sync {
    fn serves(&self) -> &str;

    /// Deterministic adapters return identical output for identical
    /// (inputs, params); only their results are cached.
    fn deterministic(&self) -> bool;

    fn execute(&self, call: &AdapterCall) -> Result<AdapterOutput, AdapterError>;
}

/// Placeholder backend used when no real adapter is registered.
#[derive(Debug, Clone)]
pub struct MockAdapter {
    spec_id: String,
}

impl MockAdapter {
    pub fn new(spec_id: impl Into<String>) -> Self {
        MockAdapter { spec_id: spec_id.into() }
    }
}

impl Adapter for MockAdapter {
    fn serves(&self) -> &str {
        &self.spec_id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn execute(&self, call: &AdapterCall) -> Result<AdapterOutput, AdapterError> {
        let mut output = mock::output_for(call)?;
        // A glue mock still records the prompt a real LLM would have seen.
        if call.spec.kind == PieceKind::Glue {
            if let (AdapterOutput::Text { prompt, .. }, Ok(input)) = (&mut output, call.input_text(0)) {
                *prompt = GlueMode::from_params(&call.params)
                    .and_then(|mode| glue::render_prompt(&mode, &input))
                    .ok();
            }
        }
        Ok(output)
    }
}

/// Input pieces forward the user's value unchanged.
#[derive(Debug, Clone)]
pub struct PassthroughAdapter {
    spec_id: String,
}

impl PassthroughAdapter {
    pub fn new(spec_id: impl Into<String>) -> Self {
        PassthroughAdapter { spec_id: spec_id.into() }
    }
}

impl Adapter for PassthroughAdapter {
    fn serves(&self) -> &str {
        &self.spec_id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn execute(&self, call: &AdapterCall) -> Result<AdapterOutput, AdapterError> {
        let value = call.inputs.first().ok_or_else(|| AdapterError::new("input piece received no value"))?;
        match &value.payload {
            crate::media::Payload::Text { text } => Ok(AdapterOutput::text(text.clone())),
            crate::media::Payload::Blob { hash, format } => {
                let bytes = call.blobs.get(hash).map_err(|e| AdapterError::new(e.to_string()))?;
                Ok(AdapterOutput::Blob { bytes, format: *format })
            }
        }
    }
}

/// Ask GPT backed by a completion client.
pub struct GlueAdapter {
    spec_id: String,
    client: Arc<dyn CompletionClient>,
}

impl GlueAdapter {
    pub fn new(spec_id: impl Into<String>, client: Arc<dyn CompletionClient>) -> Self {
        GlueAdapter { spec_id: spec_id.into(), client }
    }
}

impl Adapter for GlueAdapter {
    fn serves(&self) -> &str {
        &self.spec_id
    }

    fn deterministic(&self) -> bool {
        false
    }

    fn execute(&self, call: &AdapterCall) -> Result<AdapterOutput, AdapterError> {
        let mode = GlueMode::from_params(&call.params).map_err(|e| AdapterError::new(e.to_string()))?;
        let input = call.input_text(0)?;
        let prompt = glue::render_prompt(&mode, &input).map_err(|e| AdapterError::new(e.to_string()))?;
        let text = self.client.complete(&prompt).map_err(|e| AdapterError::new(e.to_string()))?;
        Ok(AdapterOutput::Text { text, prompt: Some(prompt) })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no catalog spec `{0}` to register an adapter for")]
pub struct UnknownAdapterSpec(pub String);

/// Maps every catalog spec to an adapter. Built-in mocks make it total.
#[derive(Clone)]
pub struct AdapterRegistry {
    catalog: Arc<Catalog>,
    adapters: HashMap<String, Arc<dyn Adapter>>,
}

impl fmt::Debug for AdapterRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut served: Vec<_> = self.adapters.keys().collect();
        served.sort();
        f.debug_struct("AdapterRegistry").field("served", &served).finish()
    }
}

impl AdapterRegistry {
    pub fn with_mocks(catalog: Arc<Catalog>) -> Self {
        let adapters = catalog
            .specs()
            .iter()
            .map(|spec| {
                let adapter: Arc<dyn Adapter> = match spec.kind {
                    PieceKind::Input => Arc::new(PassthroughAdapter::new(&spec.spec_id)),
                    PieceKind::Model | PieceKind::Glue => Arc::new(MockAdapter::new(&spec.spec_id)),
                };
                (spec.spec_id.clone(), adapter)
            })
            .collect();
        AdapterRegistry { catalog, adapters }
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    /// Replaces whatever served the adapter's spec before. Aliases resolve.
    pub fn register(&mut self, adapter: Arc<dyn Adapter>) -> Result<(), UnknownAdapterSpec> {
        let spec = self
            .catalog
            .resolve(adapter.serves())
            .ok_or_else(|| UnknownAdapterSpec(adapter.serves().to_string()))?;
        self.adapters.insert(spec.spec_id.clone(), adapter);
        Ok(())
    }

    /// Serves every glue spec through `client`.
    pub fn use_llm(&mut self, client: Arc<dyn CompletionClient>) {
        let glue: Vec<String> = self
            .catalog
            .specs()
            .iter()
            .filter(|s| s.kind == PieceKind::Glue)
            .map(|s| s.spec_id.clone())
            .collect();
        for id in glue {
            self.adapters.insert(id.clone(), Arc::new(GlueAdapter::new(id, client.clone())));
        }
    }

    pub fn get(&self, spec_id: &str) -> Option<Arc<dyn Adapter>> {
        let spec = self.catalog.resolve(spec_id)?;
        self.adapters.get(&spec.spec_id).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_total_over_catalog() {
        let catalog = Arc::new(Catalog::load_builtin());
        let reg = AdapterRegistry::with_mocks(catalog.clone());
        for spec in catalog.specs() {
            let a = reg.get(&spec.spec_id).unwrap();
            assert_eq!(a.serves(), spec.spec_id);
            assert!(a.deterministic());
        }
    }

    #[test]
    fn register_replaces_and_rejects_unknown() {
        struct Fixed(&'static str);
        impl Adapter for Fixed {
            fn serves(&self) -> &str {
                self.0
            }
            fn deterministic(&self) -> bool {
                false
            }
            fn execute(&self, _: &AdapterCall) -> Result<AdapterOutput, AdapterError> {
                Ok(AdapterOutput::text("fixed"))
            }
        }
        let catalog = Arc::new(Catalog::load_builtin());
        let mut reg = AdapterRegistry::with_mocks(catalog);
        reg.register(Arc::new(Fixed("generate_image"))).unwrap();
        assert!(!reg.get("generate_image").unwrap().deterministic());
        assert_eq!(reg.register(Arc::new(Fixed("text2hologram"))), Err(UnknownAdapterSpec("text2hologram".into())));
        // Alias lookups reach the canonical spec.
        assert_eq!(reg.get("caption_image").unwrap().serves(), "describe_image");
    }
}
