use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::modality::BaseModality;

/// Where a plan step's input channel comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    /// The previous step's output.
    Prev,
    /// A new input piece of this modality.
    User(BaseModality),
    /// The output of an earlier step, 0-based.
    Step(usize),
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Prev => f.write_str("prev"),
            Binding::User(b) => write!(f, "user:{b}"),
            Binding::Step(i) => write!(f, "{i}"),
        }
    }
}

impl Serialize for Binding {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Binding::Step(i) => serializer.serialize_u64(*i as u64),
            other => serializer.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Binding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        binding_from_json(&v).map_err(serde::de::Error::custom)
    }
}

fn binding_from_json(v: &Value) -> Result<Binding, String> {
    match v {
        Value::String(s) if s == "prev" => Ok(Binding::Prev),
        Value::String(s) => match s.strip_prefix("user:") {
            Some(m) => m.parse::<BaseModality>().map(Binding::User).map_err(|e| e.to_string()),
            None => Err(format!("expected \"prev\", \"user:<modality>\" or a step index, got {s:?}")),
        },
        Value::Number(n) => n
            .as_u64()
            .map(|i| Binding::Step(i as usize))
            .ok_or_else(|| format!("step index must be a non-negative integer, got {n}")),
        other => Err(format!("expected a binding, got {other}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub model: String,
    pub inputs: Vec<Binding>,
    #[serde(default)]
    pub parameters: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    /// The full LLM answer the plan was extracted from.
    pub raw_json: String,
}

impl Plan {
    /// The producing step index for each binding, with `prev` resolved.
    pub fn source_step(step: usize, binding: Binding) -> Option<usize> {
        match binding {
            Binding::Prev => step.checked_sub(1),
            Binding::Step(i) => Some(i),
            Binding::User(_) => None,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({ "steps": self.steps })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum PlanError {
    #[error("no JSON object found in the answer")]
    NoJsonFound,
    #[error("{path}: {reason}")]
    SchemaViolation { path: String, reason: String },
}

fn violation(path: impl Into<String>, reason: impl Into<String>) -> PlanError {
    PlanError::SchemaViolation { path: path.into(), reason: reason.into() }
}

/// The first JSON object embedded in `raw`, with the text it spans.
pub fn extract_json_object(raw: &str) -> Option<(Map<String, Value>, &str)> {
    for (start, _) in raw.match_indices('{') {
        let rest = &raw[start..];
        let mut stream = serde_json::Deserializer::from_str(rest).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            let end = stream.byte_offset();
            return Some((map, &rest[..end]));
        }
    }
    None
}

/// Extracts the first JSON object from `raw` and checks it against the plan
/// schema. All schema violations are reported, not only the first.
pub fn parse_plan(raw: &str) -> Result<Plan, Vec<PlanError>> {
    let (root, _) = extract_json_object(raw).ok_or_else(|| vec![PlanError::NoJsonFound])?;
    let mut errors = Vec::new();
    let Some(steps_value) = root.get("steps") else {
        return Err(vec![violation("$.steps", "missing")]);
    };
    let Some(raw_steps) = steps_value.as_array() else {
        return Err(vec![violation("$.steps", "must be an array")]);
    };
    if raw_steps.is_empty() {
        return Err(vec![violation("$.steps", "must contain at least one step")]);
    }

    let mut steps = Vec::with_capacity(raw_steps.len());
    for (i, raw_step) in raw_steps.iter().enumerate() {
        let path = format!("$.steps[{i}]");
        let Some(obj) = raw_step.as_object() else {
            errors.push(violation(&path, "must be an object"));
            continue;
        };
        let model = match obj.get("model") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
            Some(Value::String(_)) => {
                errors.push(violation(format!("{path}.model"), "must not be empty"));
                String::new()
            }
            Some(_) => {
                errors.push(violation(format!("{path}.model"), "must be a string"));
                String::new()
            }
            None => {
                errors.push(violation(format!("{path}.model"), "missing"));
                String::new()
            }
        };
        let mut inputs = Vec::new();
        match obj.get("inputs") {
            Some(Value::Array(items)) => {
                for (j, item) in items.iter().enumerate() {
                    let bpath = format!("{path}.inputs[{j}]");
                    match binding_from_json(item) {
                        Ok(Binding::Prev) if i == 0 => errors.push(violation(bpath, "the first step has no previous step")),
                        Ok(Binding::Step(k)) if k >= i => {
                            errors.push(violation(bpath, format!("step {k} is not earlier than step {i}")))
                        }
                        Ok(b) => inputs.push(b),
                        Err(reason) => errors.push(violation(bpath, reason)),
                    }
                }
            }
            Some(_) => errors.push(violation(format!("{path}.inputs"), "must be an array")),
            None => errors.push(violation(format!("{path}.inputs"), "missing")),
        }
        let parameters = match obj.get("parameters") {
            None | Some(Value::Null) => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => {
                errors.push(violation(format!("{path}.parameters"), "must be an object"));
                Map::new()
            }
        };
        steps.push(PlanStep { model, inputs, parameters });
    }

    if errors.is_empty() {
        let consumed: Vec<bool> = (0..steps.len())
            .map(|s| {
                steps.iter().enumerate().any(|(i, step)| {
                    step.inputs.iter().any(|&b| Plan::source_step(i, b) == Some(s))
                })
            })
            .collect();
        let terminals: Vec<usize> = consumed.iter().enumerate().filter(|(_, &c)| !c).map(|(i, _)| i).collect();
        if terminals.len() != 1 {
            errors.push(violation(
                "$.steps",
                format!("exactly one step must be left unconsumed, found {} ({terminals:?})", terminals.len()),
            ));
        }
    }

    if errors.is_empty() {
        Ok(Plan { steps, raw_json: raw.to_string() })
    } else {
        Err(errors)
    }
}
