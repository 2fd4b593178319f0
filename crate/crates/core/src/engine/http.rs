//! Adapters that call remote inference endpoints.
//!
//! Configuration file:
//!
//! ```json
//! {"adapters": [{"spec_id": "generate_image",
//!                "endpoint": "https://models.example/sd",
//!                "auth_header": "Authorization", "auth_env": "SD_TOKEN", "auth_prefix": "Bearer ",
//!                "timeout_seconds": 120, "deterministic": false}]}
//! ```
//!
//! Request body: `{"spec_id", "parameters", "output_modality", "inputs": [...]}` where
//! each input is `{"modality", "text"}` or `{"modality", "format", "data_base64"}`.
//! Response body: `{"text": "..."}` or `{"format": "png", "data_base64": "..."}`.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::adapter::{Adapter, AdapterCall, AdapterError, AdapterOutput, AdapterRegistry, UnknownAdapterSpec};
use crate::media::{FormatTag, Payload};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpAdapterConfig {
    pub spec_id: String,
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_header: Option<String>,
    /// Environment variable holding the credential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub auth_prefix: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_seconds: Option<u64>,
    #[serde(default)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpAdapterFile {
    pub adapters: Vec<HttpAdapterConfig>,
}

#[derive(Debug, Error)]
pub enum AdapterConfigError {
    #[error("cannot read adapter config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed adapter config: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error(transparent)]
    UnknownSpec(#[from] UnknownAdapterSpec),
    #[error("HTTP client: {0}")]
    Client(String),
}

pub fn load_config(path: impl AsRef<Path>) -> Result<HttpAdapterFile, AdapterConfigError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Registers one HTTP adapter per config entry, replacing the mocks.
pub fn register_all(registry: &mut AdapterRegistry, file: &HttpAdapterFile) -> Result<(), AdapterConfigError> {
    for config in &file.adapters {
        registry.register(Arc::new(HttpAdapter::new(config.clone())?))?;
    }
    Ok(())
}

pub struct HttpAdapter {
    config: HttpAdapterConfig,
    http: reqwest::blocking::Client,
}

impl HttpAdapter {
    pub fn new(config: HttpAdapterConfig) -> Result<Self, AdapterConfigError> {
        let mut builder = reqwest::blocking::Client::builder();
        if let Some(secs) = config.timeout_seconds {
            builder = builder.timeout(Duration::from_secs(secs));
        }
        let http = builder.build().map_err(|e| AdapterConfigError::Client(e.to_string()))?;
        Ok(HttpAdapter { config, http })
    }

    fn request_body(&self, call: &AdapterCall) -> Result<Value, AdapterError> {
        let mut inputs = Vec::with_capacity(call.inputs.len());
        for value in &call.inputs {
            inputs.push(match &value.payload {
                Payload::Text { text } => json!({"modality": value.modality, "text": text}),
                Payload::Blob { hash, format } => {
                    let bytes = call.blobs.get(hash).map_err(|e| AdapterError::new(e.to_string()))?;
                    json!({"modality": value.modality, "format": format, "data_base64": B64.encode(bytes)})
                }
            });
        }
        Ok(json!({
            "spec_id": call.spec.spec_id,
            "parameters": call.params,
            "output_modality": call.spec.output_modality(),
            "inputs": inputs,
        }))
    }
}

impl Adapter for HttpAdapter {
    fn serves(&self) -> &str {
        &self.config.spec_id
    }

    fn deterministic(&self) -> bool {
        self.config.deterministic
    }

    fn execute(&self, call: &AdapterCall) -> Result<AdapterOutput, AdapterError> {
        let mut req = self.http.post(&self.config.endpoint).json(&self.request_body(call)?);
        if let (Some(header), Some(env)) = (&self.config.auth_header, &self.config.auth_env) {
            let secret = std::env::var(env).map_err(|_| AdapterError::new(format!("credential variable {env} is not set")))?;
            req = req.header(header.as_str(), format!("{}{secret}", self.config.auth_prefix));
        }
        let resp = req.send().map_err(|e| AdapterError::new(format!("request to {} failed: {e}", self.config.endpoint)))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| AdapterError::new(e.to_string()))?;
        if !status.is_success() {
            return Err(AdapterError::new(format!("endpoint returned HTTP {}: {body}", status.as_u16())));
        }
        parse_response(&body)
    }
}

pub fn parse_response(body: &str) -> Result<AdapterOutput, AdapterError> {
    let value: Value = serde_json::from_str(body).map_err(|e| AdapterError::new(format!("response is not JSON: {e}")))?;
    if let Some(text) = value.get("text").and_then(Value::as_str) {
        return Ok(AdapterOutput::text(text));
    }
    let data = value
        .get("data_base64")
        .and_then(Value::as_str)
        .ok_or_else(|| AdapterError::new("response has neither `text` nor `data_base64`"))?;
    let bytes = B64.decode(data).map_err(|e| AdapterError::new(format!("bad base64: {e}")))?;
    let format = match value.get("format") {
        Some(f) => serde_json::from_value::<FormatTag>(f.clone()).map_err(|e| AdapterError::new(format!("format: {e}")))?,
        None => FormatTag::sniff(&bytes).ok_or_else(|| AdapterError::new("cannot tell the output format"))?,
    };
    Ok(AdapterOutput::Blob { bytes, format })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blob::BlobStore;
    use crate::catalog::Catalog;
    use crate::media::MediaValue;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Answers one request with `reply` and hands back the request body.
    fn one_shot_server(reply: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/infer", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
            String::from_utf8(body).unwrap()
        });
        (url, handle)
    }

    #[test]
    fn posts_inputs_and_parses_text() {
        let (url, server) = one_shot_server(r#"{"text":"a cat on a mat"}"#);
        let catalog = Catalog::load_builtin();
        let adapter = HttpAdapter::new(HttpAdapterConfig {
            spec_id: "describe_image".into(),
            endpoint: url,
            auth_header: None,
            auth_env: None,
            auth_prefix: String::new(),
            timeout_seconds: Some(5),
            deterministic: true,
        })
        .unwrap();
        let blobs = BlobStore::in_memory();
        let hash = blobs.put(b"\x89PNG\r\n\x1a\nfake").unwrap();
        let call = AdapterCall {
            spec: catalog.get("describe_image").unwrap().clone(),
            inputs: vec![MediaValue::user_blob(crate::Modality::IMAGE, hash, FormatTag::Png)],
            params: Default::default(),
            blobs,
        };
        assert_eq!(adapter.execute(&call).unwrap(), AdapterOutput::text("a cat on a mat"));
        let sent: Value = serde_json::from_str(&server.join().unwrap()).unwrap();
        assert_eq!(sent["spec_id"], "describe_image");
        assert_eq!(sent["inputs"][0]["format"], "png");
        assert_eq!(B64.decode(sent["inputs"][0]["data_base64"].as_str().unwrap()).unwrap(), b"\x89PNG\r\n\x1a\nfake");
    }

    #[test]
    fn blob_responses_decode() {
        let out = parse_response(&format!(r#"{{"data_base64":"{}"}}"#, B64.encode(b"RIFF\0\0\0\0WAVEfmt "))).unwrap();
        assert!(matches!(out, AdapterOutput::Blob { format: FormatTag::Wav, .. }));
        assert!(parse_response("{}").is_err());
    }

    #[test]
    fn config_registration() {
        let mut reg = AdapterRegistry::with_mocks(Arc::new(Catalog::load_builtin()));
        let file: HttpAdapterFile = serde_json::from_str(
            r#"{"adapters":[{"spec_id":"generate_image","endpoint":"http://127.0.0.1:9/x"}]}"#,
        )
        .unwrap();
        register_all(&mut reg, &file).unwrap();
        assert!(!reg.get("generate_image").unwrap().deterministic());
        let bad: HttpAdapterFile =
            serde_json::from_str(r#"{"adapters":[{"spec_id":"nope","endpoint":"http://x"}]}"#).unwrap();
        assert!(matches!(register_all(&mut reg, &bad), Err(AdapterConfigError::UnknownSpec(_))));
    }
}
