//! Piece specifications: sockets, parameters and tooltip metadata.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modality::Modality;

/// One typed arm of a piece. Inputs use channels 0 and 1, the output is
/// always channel 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Socket {
    pub modality: Modality,
    pub channel_index: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceKind {
    /// Accepts a value from the user (typed text, uploaded media, a sketch).
    Input,
    Model,
    /// LLM reasoning step bridging other pieces.
    Glue,
}

/// A parameter value. Enum parameters carry their variant as `Text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Boolean(bool),
    Integer(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Integer(i) => Some(*i as f64),
            ParamValue::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Option<ParamValue> {
        serde_json::from_value(value.clone()).ok()
    }

    fn type_name(&self) -> &'static str {
        match self {
            ParamValue::Boolean(_) => "boolean",
            ParamValue::Integer(_) => "integer",
            ParamValue::Real(_) => "real",
            ParamValue::Text(_) => "text",
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Boolean(b) => write!(f, "{b}"),
            ParamValue::Integer(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

pub type ParamMap = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Integer { min: i64, max: i64 },
    Real { min: f64, max: f64 },
    Enum { variants: Vec<String> },
    Boolean,
    Text,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{name}` expects {expected}, got {got}")]
    TypeMismatch { name: String, expected: &'static str, got: &'static str },
    #[error("parameter `{name}` = {value} is outside [{min}, {max}]")]
    OutOfBounds { name: String, value: String, min: String, max: String },
    #[error("parameter `{name}` = `{value}` is not one of {variants:?}")]
    UnknownVariant { name: String, value: String, variants: Vec<String> },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParameterRecord", into = "ParameterRecord")]
pub struct ParameterSchema {
    pub name: String,
    pub kind: ParamKind,
    pub default: ParamValue,
    pub tooltip: String,
}

impl ParameterSchema {
    /// Checks `value` against this schema, returning the normalized value
    /// (integers given for a real parameter become reals).
    pub fn check(&self, value: &ParamValue) -> Result<ParamValue, ParamError> {
        let mismatch = |expected| ParamError::TypeMismatch {
            name: self.name.clone(),
            expected,
            got: value.type_name(),
        };
        match (&self.kind, value) {
            (ParamKind::Integer { min, max }, ParamValue::Integer(v)) => {
                if v < min || v > max {
                    return Err(ParamError::OutOfBounds {
                        name: self.name.clone(),
                        value: v.to_string(),
                        min: min.to_string(),
                        max: max.to_string(),
                    });
                }
                Ok(value.clone())
            }
            (ParamKind::Integer { .. }, _) => Err(mismatch("integer")),
            (ParamKind::Real { min, max }, ParamValue::Integer(_) | ParamValue::Real(_)) => {
                let v = value.as_f64().unwrap_or(f64::NAN);
                // NaN fails both comparisons, so test for containment instead.
                if !(v >= *min && v <= *max) {
                    return Err(ParamError::OutOfBounds {
                        name: self.name.clone(),
                        value: v.to_string(),
                        min: min.to_string(),
                        max: max.to_string(),
                    });
                }
                Ok(ParamValue::Real(v))
            }
            (ParamKind::Real { .. }, _) => Err(mismatch("real")),
            (ParamKind::Enum { variants }, ParamValue::Text(s)) => {
                if variants.iter().any(|v| v == s) {
                    Ok(value.clone())
                } else {
                    Err(ParamError::UnknownVariant {
                        name: self.name.clone(),
                        value: s.clone(),
                        variants: variants.clone(),
                    })
                }
            }
            (ParamKind::Enum { .. }, _) => Err(mismatch("enum variant")),
            (ParamKind::Boolean, ParamValue::Boolean(_)) => Ok(value.clone()),
            (ParamKind::Boolean, _) => Err(mismatch("boolean")),
            (ParamKind::Text, ParamValue::Text(_)) => Ok(value.clone()),
            (ParamKind::Text, _) => Err(mismatch("text")),
        }
    }
}

/// Serialized parameter layout: `{"name", "kind", "default", "min"?, "max"?,
/// "variants"?, "tooltip"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParameterRecord {
    name: String,
    kind: String,
    default: ParamValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min: Option<serde_json::Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max: Option<serde_json::Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variants: Option<Vec<String>>,
    #[serde(default)]
    tooltip: String,
}

impl TryFrom<ParameterRecord> for ParameterSchema {
    type Error = String;

    fn try_from(r: ParameterRecord) -> Result<Self, Self::Error> {
        let missing = |what| format!("parameter `{}` needs `{what}`", r.name);
        let kind = match r.kind.as_str() {
            "integer" => ParamKind::Integer {
                min: r.min.as_ref().and_then(|n| n.as_i64()).ok_or_else(|| missing("min"))?,
                max: r.max.as_ref().and_then(|n| n.as_i64()).ok_or_else(|| missing("max"))?,
            },
            "real" => ParamKind::Real {
                min: r.min.as_ref().and_then(|n| n.as_f64()).ok_or_else(|| missing("min"))?,
                max: r.max.as_ref().and_then(|n| n.as_f64()).ok_or_else(|| missing("max"))?,
            },
            "enum" => ParamKind::Enum {
                variants: r.variants.clone().filter(|v| !v.is_empty()).ok_or_else(|| missing("variants"))?,
            },
            "boolean" => ParamKind::Boolean,
            "text" => ParamKind::Text,
            other => return Err(format!("parameter `{}` has unknown kind `{other}`", r.name)),
        };
        let mut schema = ParameterSchema {
            name: r.name,
            kind,
            default: r.default,
            tooltip: r.tooltip,
        };
        schema.default = schema
            .check(&schema.default)
            .map_err(|e| format!("default violates schema: {e}"))?;
        Ok(schema)
    }
}

impl From<ParameterSchema> for ParameterRecord {
    fn from(s: ParameterSchema) -> Self {
        let (kind, min, max, variants) = match s.kind {
            ParamKind::Integer { min, max } => ("integer", Some(min.into()), Some(max.into()), None),
            ParamKind::Real { min, max } => (
                "real",
                serde_json::Number::from_f64(min),
                serde_json::Number::from_f64(max),
                None,
            ),
            ParamKind::Enum { variants } => ("enum", None, None, Some(variants)),
            ParamKind::Boolean => ("boolean", None, None, None),
            ParamKind::Text => ("text", None, None, None),
        };
        ParameterRecord {
            name: s.name,
            kind: kind.to_string(),
            default: s.default,
            min,
            max,
            variants,
            tooltip: s.tooltip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleValue {
    pub modality: Modality,
    pub example: String,
}

/// Example input(s) and output shown in the catalog tooltip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleIo {
    pub inputs: Vec<ExampleValue>,
    pub output: ExampleValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRecord", into = "SpecRecord")]
pub struct PieceSpec {
    pub spec_id: String,
    pub display_name: String,
    pub kind: PieceKind,
    /// Underlying model family, for model and glue pieces.
    pub model_name: Option<String>,
    pub input_sockets: Vec<Socket>,
    pub output_socket: Socket,
    pub description: String,
    /// Short phrase used when enumerating models to the planner.
    pub capability: String,
    pub typical_runtime_seconds: f64,
    pub example_io: ExampleIo,
    pub parameter_schema: Vec<ParameterSchema>,
    /// Alternative ids that resolve to this spec.
    pub aliases: Vec<String>,
}

impl PieceSpec {
    pub fn input_modalities(&self) -> impl Iterator<Item = Modality> + '_ {
        self.input_sockets.iter().map(|s| s.modality)
    }

    pub fn output_modality(&self) -> Modality {
        self.output_socket.modality
    }

    pub fn arity(&self) -> usize {
        self.input_sockets.len()
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterSchema> {
        self.parameter_schema.iter().find(|p| p.name == name)
    }

    pub fn default_parameters(&self) -> ParamMap {
        self.parameter_schema
            .iter()
            .map(|p| (p.name.clone(), p.default.clone()))
            .collect()
    }

    /// Defaults overlaid with `values`. Unknown names are ignored here; use
    /// [`PieceSpec::check_parameter`] to reject them.
    pub fn effective_parameters(&self, values: &ParamMap) -> ParamMap {
        let mut params = self.default_parameters();
        for (name, value) in values {
            if params.contains_key(name) {
                params.insert(name.clone(), value.clone());
            }
        }
        params
    }

    pub fn check_parameter(&self, name: &str, value: &ParamValue) -> Result<ParamValue, ParamError> {
        self.parameter(name)
            .ok_or_else(|| ParamError::UnknownParameter(name.to_string()))?
            .check(value)
    }

    fn check_shape(&self) -> Result<(), String> {
        let arity = self.input_sockets.len();
        match self.kind {
            PieceKind::Input if arity != 0 => {
                return Err(format!("input piece `{}` must have no inputs", self.spec_id))
            }
            PieceKind::Model | PieceKind::Glue if !(1..=2).contains(&arity) => {
                return Err(format!("piece `{}` must have one or two inputs", self.spec_id))
            }
            _ => {}
        }
        let example_inputs: Vec<Modality> = self.example_io.inputs.iter().map(|e| e.modality).collect();
        if example_inputs != self.input_modalities().collect::<Vec<_>>()
            || self.example_io.output.modality != self.output_modality()
        {
            return Err(format!("example for `{}` does not match its sockets", self.spec_id));
        }
        if self.typical_runtime_seconds.is_nan() || self.typical_runtime_seconds <= 0.0 {
            return Err(format!("runtime for `{}` must be positive", self.spec_id));
        }
        let mut names: Vec<&str> = self.parameter_schema.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(format!("duplicate parameter on `{}`", self.spec_id));
        }
        Ok(())
    }
}

/// Lowercase snake-case slug of a display name, used as a stable id.
pub fn slugify(name: &str) -> String {
    let mut slug = String::with_capacity(name.len());
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            slug.push(c.to_ascii_lowercase());
        } else if !slug.is_empty() && !slug.ends_with('_') {
            slug.push('_');
        }
    }
    while slug.ends_with('_') {
        slug.pop();
    }
    slug
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecRecord {
    id: String,
    name: String,
    kind: PieceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    inputs: Vec<Modality>,
    output: Modality,
    description: String,
    capability: String,
    runtime_seconds: f64,
    example_io: ExampleIo,
    #[serde(default)]
    parameters: Vec<ParameterSchema>,
    #[serde(default)]
    aliases: Vec<String>,
}

impl TryFrom<SpecRecord> for PieceSpec {
    type Error = String;

    fn try_from(r: SpecRecord) -> Result<Self, Self::Error> {
        let spec = PieceSpec {
            input_sockets: r
                .inputs
                .iter()
                .enumerate()
                .map(|(i, &modality)| Socket { modality, channel_index: i as u8 })
                .collect(),
            output_socket: Socket { modality: r.output, channel_index: 0 },
            spec_id: r.id,
            display_name: r.name,
            kind: r.kind,
            model_name: r.model,
            description: r.description,
            capability: r.capability,
            typical_runtime_seconds: r.runtime_seconds,
            example_io: r.example_io,
            parameter_schema: r.parameters,
            aliases: r.aliases,
        };
        spec.check_shape()?;
        Ok(spec)
    }
}

impl From<PieceSpec> for SpecRecord {
    fn from(s: PieceSpec) -> Self {
        SpecRecord {
            inputs: s.input_sockets.iter().map(|s| s.modality).collect(),
            output: s.output_socket.modality,
            id: s.spec_id,
            name: s.display_name,
            kind: s.kind,
            model: s.model_name,
            description: s.description,
            capability: s.capability,
            runtime_seconds: s.typical_runtime_seconds,
            example_io: s.example_io,
            parameters: s.parameter_schema,
            aliases: s.aliases,
        }
    }
}
