//! `--input <instance>=<value>` bindings.

use std::collections::BTreeMap;
use std::path::Path;

use mosaic_core::engine::RunError;
use mosaic_core::studio::Studio;
use mosaic_core::wire::{ErrorBody, ErrorClass};
use mosaic_core::{BaseModality, FormatTag, InstanceId, MediaValue, MosaicGraph, PieceKind};
use serde_json::json;

pub fn parse_all(raw: &[String]) -> Result<Vec<(InstanceId, String)>, ErrorBody> {
    raw.iter()
        .map(|binding| {
            let (id, value) = binding
                .split_once('=')
                .ok_or_else(|| ErrorBody::usage(format!("input `{binding}` is not <instance>=<value>")))?;
            let id = id
                .trim()
                .parse()
                .map_err(|_| ErrorBody::usage(format!("input `{binding}`: `{id}` is not an instance id")))?;
            Ok((InstanceId(id), value.to_string()))
        })
        .collect()
}

/// Text pieces take the value verbatim; media pieces read it as a file path
/// and store the bytes. Sketch inputs accept image files.
pub fn resolve(
    graph: &MosaicGraph,
    studio: &Studio,
    bindings: Vec<(InstanceId, String)>,
) -> Result<BTreeMap<InstanceId, MediaValue>, ErrorBody> {
    let mut values = BTreeMap::new();
    for (id, raw) in bindings {
        let spec = graph
            .piece(id)
            .and_then(|p| studio.catalog.get(&p.spec_id))
            .filter(|s| s.kind == PieceKind::Input)
            .ok_or_else(|| ErrorBody::from(&RunError::UnexpectedInput(id)))?;
        let modality = spec.output_modality();
        let value = if modality.base() == BaseModality::Text {
            MediaValue::user_text(raw)
        } else {
            let path = Path::new(&raw);
            let bytes = std::fs::read(path).map_err(|e| {
                ErrorBody::new(
                    ErrorClass::Usage,
                    "Io",
                    format!("input {id}: {}: {e}", path.display()),
                    json!({ "instance": id }),
                )
            })?;
            let format = path
                .extension()
                .and_then(|e| e.to_str())
                .and_then(FormatTag::from_extension)
                .or_else(|| FormatTag::sniff(&bytes))
                .filter(|f| f.suits(modality.base()))
                .ok_or_else(|| {
                    ErrorBody::new(
                        ErrorClass::Validation,
                        "InputMismatch",
                        format!("input {id} expects {}, but {} is not a file of that kind", modality.label(), path.display()),
                        json!({ "instance": id }),
                    )
                })?;
            studio.engine.upload(modality, &bytes, format).map_err(|e| {
                ErrorBody::new(ErrorClass::Internal, "Io", e.to_string(), serde_json::Value::Null)
            })?
        };
        values.insert(id, value);
    }
    Ok(values)
}
