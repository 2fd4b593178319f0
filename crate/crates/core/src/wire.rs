//! JSON bodies shared by the HTTP service and the CLI, so both emit the same
//! bytes for the same operation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::assistant::{AssistError, AssistOutcome, Plan, Round, ValidationReport};
use crate::blob::BlobStore;
use crate::catalog::{Catalog, CatalogDocument};
use crate::engine::{InspectError, RunError, RunStatus};
use crate::llm::ClientError;
use crate::media::{ContentHash, FormatTag, MediaValue};
use crate::modality::BaseModality;
use crate::mosaic::{chains, Chain, EditError, InstanceId, MosaicGraph, Violation};
use crate::piece::PieceKind;
use crate::search::{SearchError, SearchHit};
use crate::store::{unknown_pieces, MosaicDocument, StoreError, UnknownPiece};

/// Compact single-line JSON.
pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("wire bodies serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogBody {
    #[serde(flatten)]
    pub catalog: CatalogDocument,
    /// Spec ids by the base modality of their inputs; input pieces are absent.
    pub groups: BTreeMap<BaseModality, Vec<String>>,
}

impl CatalogBody {
    pub fn new(catalog: &Catalog) -> Self {
        CatalogBody { catalog: catalog.export(), groups: catalog.group_by_input_modality() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub spec_id: String,
    pub display_name: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBody {
    pub query: String,
    pub results: Vec<SearchResult>,
}

impl SearchBody {
    pub fn new(catalog: &Catalog, query: &str, hits: Vec<SearchHit>) -> Self {
        let results = hits
            .into_iter()
            .map(|h| SearchResult {
                display_name: catalog.get(&h.spec_id).map(|s| s.display_name.clone()).unwrap_or_default(),
                spec_id: h.spec_id,
                score: h.score,
                rank: h.rank,
            })
            .collect();
        SearchBody { query: query.to_string(), results }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationBody {
    pub valid: bool,
    pub violations: Vec<Violation>,
    /// Pieces whose spec is not in the catalog; other checks are skipped
    /// while any are present.
    pub unknown_specs: Vec<UnknownPiece>,
    pub chains: Vec<Chain>,
}

pub fn validation_body(graph: &MosaicGraph, catalog: &Catalog) -> ValidationBody {
    let unknown = unknown_pieces(graph, catalog);
    if !unknown.is_empty() {
        return ValidationBody { valid: false, violations: Vec::new(), unknown_specs: unknown, chains: Vec::new() };
    }
    let violations = crate::mosaic::validate(graph, catalog).expect("all specs known");
    let chains = if violations.is_empty() { chains(graph, catalog).expect("valid mosaic") } else { Vec::new() };
    ValidationBody { valid: violations.is_empty(), violations, unknown_specs: Vec::new(), chains }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistBody {
    pub plan: Plan,
    pub report: ValidationReport,
    pub rounds: Vec<Round>,
    pub added: Vec<InstanceId>,
    pub mosaic: MosaicGraph,
}

impl AssistBody {
    pub fn new(outcome: AssistOutcome, mosaic: MosaicGraph) -> Self {
        AssistBody { plan: outcome.plan, report: outcome.report, rounds: outcome.rounds, added: outcome.added, mosaic }
    }
}

/// A stored mosaic as served, with pieces the catalog does not know flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentBody {
    #[serde(flatten)]
    pub document: MosaicDocument,
    pub unknown_specs: Vec<UnknownPiece>,
}

impl DocumentBody {
    pub fn new(document: MosaicDocument, catalog: &Catalog) -> Self {
        let unknown_specs = document.unknown_pieces(catalog);
        DocumentBody { document, unknown_specs }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateMosaicRequest {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub mosaic: MosaicGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateMosaicRequest {
    /// The version the client edited; a newer stored version is a conflict.
    pub version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub mosaic: MosaicGraph,
}

/// A user input for one input piece: inline text, or a previously uploaded
/// blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RunInput {
    Text {
        text: String,
    },
    Blob {
        hash: ContentHash,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        format: Option<FormatTag>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    #[serde(default)]
    pub inputs: BTreeMap<InstanceId, RunInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAccepted {
    pub run_id: String,
    pub mosaic_id: String,
    pub chain: usize,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobBody {
    pub hash: ContentHash,
    pub format: FormatTag,
    pub content_type: String,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistRequest {
    pub task: String,
    /// Mosaic to append the plan to; without it the plan lands on an empty
    /// canvas that is returned but not stored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mosaic_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u64>,
}

/// Turns request inputs into media values typed by their input pieces.
/// Pieces that are not input pieces are passed through so `prepare` reports
/// them; blob formats default to what the bytes look like.
pub fn resolve_inputs(
    graph: &MosaicGraph,
    catalog: &Catalog,
    blobs: &BlobStore,
    inputs: BTreeMap<InstanceId, RunInput>,
) -> Result<BTreeMap<InstanceId, MediaValue>, ErrorBody> {
    let mut resolved = BTreeMap::new();
    for (id, input) in inputs {
        let spec = graph
            .piece(id)
            .and_then(|p| catalog.get(&p.spec_id))
            .filter(|s| s.kind == PieceKind::Input)
            .ok_or_else(|| ErrorBody::from(&RunError::UnexpectedInput(id)))?;
        let modality = spec.output_modality();
        let value = match input {
            RunInput::Text { text } => MediaValue::user_text(text),
            RunInput::Blob { hash, format } => {
                let format = match format {
                    Some(f) => f,
                    None => {
                        let bytes = blobs
                            .get(&hash)
                            .map_err(|_| ErrorBody::from(&RunError::MissingBlob { instance: id, hash: hash.clone() }))?;
                        FormatTag::sniff(&bytes).ok_or_else(|| {
                            ErrorBody::usage(format!("cannot tell the format of blob {hash}; pass `format`"))
                        })?
                    }
                };
                MediaValue::user_blob(modality, hash, format)
            }
        };
        resolved.insert(id, value);
    }
    Ok(resolved)
}

/// How an error should surface: an HTTP status and a CLI exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Usage,
    Validation,
    Precondition,
    NotFound,
    Conflict,
    Unrepairable,
    Upstream,
    Internal,
}

impl ErrorClass {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorClass::Usage | ErrorClass::Validation | ErrorClass::Precondition => 400,
            ErrorClass::NotFound => 404,
            ErrorClass::Conflict => 409,
            ErrorClass::Unrepairable | ErrorClass::Upstream => 502,
            ErrorClass::Internal => 500,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Internal => 1,
            ErrorClass::Usage => 2,
            ErrorClass::Validation => 3,
            ErrorClass::Precondition => 4,
            ErrorClass::Unrepairable => 6,
            ErrorClass::Upstream => 7,
            ErrorClass::NotFound => 8,
            ErrorClass::Conflict => 9,
        }
    }
}

/// Exit code of a run that executed but ended with a failed piece.
pub const EXIT_RUN_FAILED: i32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
    #[serde(skip)]
    pub class: Option<ErrorClass>,
}

impl ErrorBody {
    pub fn new(class: ErrorClass, code: &str, message: impl Into<String>, details: Value) -> Self {
        ErrorBody { error: code.to_string(), message: message.into(), details, class: Some(class) }
    }

    pub fn class(&self) -> ErrorClass {
        self.class.unwrap_or(ErrorClass::Internal)
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Usage, "BadRequest", message, Value::Null)
    }

    pub fn violations(violations: &[Violation]) -> Self {
        Self::new(
            ErrorClass::Validation,
            "InvalidMosaic",
            format!("mosaic has {} violation(s)", violations.len()),
            json!({ "violations": violations }),
        )
    }
}

impl From<&RunError> for ErrorBody {
    fn from(e: &RunError) -> Self {
        let msg = e.to_string();
        match e {
            RunError::InvalidMosaic(v) => ErrorBody::violations(v),
            RunError::UnknownSpec(u) => {
                ErrorBody::new(ErrorClass::Validation, "UnknownSpec", msg, json!({ "unknown": u }))
            }
            RunError::UnknownChain { index, count } => ErrorBody::new(
                ErrorClass::NotFound,
                "UnknownChain",
                msg,
                json!({ "chain": index, "chains": count }),
            ),
            RunError::MissingInput(id) => {
                ErrorBody::new(ErrorClass::Precondition, "MissingInput", msg, json!({ "instance": id }))
            }
            RunError::InputMismatch { instance, expected, found } => ErrorBody::new(
                ErrorClass::Precondition,
                "InputMismatch",
                msg,
                json!({ "instance": instance, "expected": expected, "found": found }),
            ),
            RunError::UnexpectedInput(id) => {
                ErrorBody::new(ErrorClass::Precondition, "UnexpectedInput", msg, json!({ "instance": id }))
            }
            RunError::MissingBlob { instance, hash } => ErrorBody::new(
                ErrorClass::Precondition,
                "MissingBlob",
                msg,
                json!({ "instance": instance, "hash": hash }),
            ),
        }
    }
}

impl From<&ClientError> for ErrorBody {
    fn from(e: &ClientError) -> Self {
        let code = if e.is_timeout() { "ClientTimeout" } else { "ClientError" };
        ErrorBody::new(ErrorClass::Upstream, code, e.to_string(), Value::Null)
    }
}

impl From<&AssistError> for ErrorBody {
    fn from(e: &AssistError) -> Self {
        let msg = e.to_string();
        match e {
            AssistError::EmptyTask => ErrorBody::new(ErrorClass::Usage, "EmptyTask", msg, Value::Null),
            AssistError::Client { round, error } => {
                let mut body = ErrorBody::from(error);
                body.message = msg;
                body.details = json!({ "round": round });
                body
            }
            AssistError::UnrepairablePlan { rounds } => {
                ErrorBody::new(ErrorClass::Unrepairable, "UnrepairablePlan", msg, json!({ "rounds": rounds }))
            }
            AssistError::Materialize(edit) => {
                ErrorBody::new(ErrorClass::Internal, "MaterializeFailed", msg, json!({ "code": edit.code() }))
            }
        }
    }
}

impl From<&StoreError> for ErrorBody {
    fn from(e: &StoreError) -> Self {
        let msg = e.to_string();
        match e {
            StoreError::NotFound { .. } | StoreError::InvalidId(_) => {
                ErrorBody::new(ErrorClass::NotFound, "NotFound", msg, Value::Null)
            }
            StoreError::VersionTooNew { found, supported } => ErrorBody::new(
                ErrorClass::NotFound,
                "VersionTooNew",
                msg,
                json!({ "found": found, "supported": supported }),
            ),
            StoreError::CorruptDocument { .. } => ErrorBody::new(ErrorClass::NotFound, "CorruptDocument", msg, Value::Null),
            StoreError::VersionConflict { expected, found } => ErrorBody::new(
                ErrorClass::Conflict,
                "VersionConflict",
                msg,
                json!({ "expected": expected, "found": found }),
            ),
            StoreError::Blob(crate::blob::BlobError::NotFound(_)) => {
                ErrorBody::new(ErrorClass::NotFound, "NotFound", msg, Value::Null)
            }
            StoreError::Blob(_) | StoreError::Io(_) => ErrorBody::new(ErrorClass::Internal, "Io", msg, Value::Null),
        }
    }
}

impl From<&SearchError> for ErrorBody {
    fn from(e: &SearchError) -> Self {
        match e {
            SearchError::Provider(_) => ErrorBody::new(ErrorClass::Upstream, "SearchProvider", e.to_string(), Value::Null),
            _ => ErrorBody::new(ErrorClass::Usage, "BadQuery", e.to_string(), Value::Null),
        }
    }
}

impl From<&InspectError> for ErrorBody {
    fn from(e: &InspectError) -> Self {
        let code = match e {
            InspectError::UnknownInstance(_) => "UnknownInstance",
            InspectError::NotYetComputed { .. } => "NotYetComputed",
            InspectError::PieceFailed { .. } => "PieceFailed",
            InspectError::NotReachable { .. } => "NotReachable",
        };
        let class = match e {
            InspectError::UnknownInstance(_) | InspectError::NotYetComputed { .. } => ErrorClass::NotFound,
            _ => ErrorClass::Precondition,
        };
        ErrorBody::new(class, code, e.to_string(), Value::Null)
    }
}

impl From<&EditError> for ErrorBody {
    fn from(e: &EditError) -> Self {
        ErrorBody::new(ErrorClass::Validation, e.code(), e.to_string(), Value::Null)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mosaic::{Edit, Mosaic};

    #[test]
    fn validation_body_lists_chains_when_valid() {
        let c = Catalog::load_builtin();
        let mut m = Mosaic::new();
        m.apply_edit(&c, Edit::add("type_text", 0.0, 0.0)).unwrap();
        let body = validation_body(m.graph(), &c);
        assert!(body.valid);
        assert_eq!(body.chains.len(), 1);
        assert!(to_json(&body).starts_with(r#"{"valid":true,"violations":[],"unknown_specs":[]"#));
    }

    #[test]
    fn error_classes() {
        let b = ErrorBody::from(&RunError::MissingInput(InstanceId(3)));
        assert_eq!((b.class().http_status(), b.class().exit_code()), (400, 4));
        assert_eq!(to_json(&b), r#"{"error":"MissingInput","message":"input piece 3 has no user input","details":{"instance":3}}"#);
        let b = ErrorBody::from(&AssistError::UnrepairablePlan { rounds: vec![] });
        assert_eq!(b.class().http_status(), 502);
    }
}
