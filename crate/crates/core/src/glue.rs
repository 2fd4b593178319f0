//! LLM glue prompts: custom, translation and ideation.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{ClientError, CompletionClient};
use crate::media::{ContentHash, MediaValue, Payload, Producer, Provenance};
use crate::modality::{BaseModality, Modality};
use crate::piece::ParamMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GlueMode {
    Custom { instruction: String },
    Translation { target_modality: BaseModality, example_prompts: Vec<String> },
    Ideation { task: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GlueError {
    #[error("glue input is empty")]
    EmptyInput,
    #[error("invalid glue configuration: {0}")]
    InvalidMode(String),
    #[error("LLM timed out; prompt was:\n{prompt}")]
    ClientTimeout { prompt: String, cause: ClientError },
    #[error("LLM call failed ({cause}); prompt was:\n{prompt}")]
    Client { prompt: String, cause: ClientError },
}

static DEFAULT_EXAMPLES: OnceLock<BTreeMap<BaseModality, Vec<String>>> = OnceLock::new();

/// The shipped example prompts for text-to-`target` models; empty for
/// modalities no text-to-x model produces.
pub fn default_example_prompts(target: BaseModality) -> Vec<String> {
    DEFAULT_EXAMPLES
        .get_or_init(|| {
            serde_json::from_str(include_str!("../data/example_prompts.json"))
                .expect("bundled example prompts are valid")
        })
        .get(&target)
        .cloned()
        .unwrap_or_default()
}

impl GlueMode {
    pub fn check(&self) -> Result<(), GlueError> {
        match self {
            GlueMode::Custom { instruction } if instruction.trim().is_empty() => {
                Err(GlueError::InvalidMode("custom instruction must not be empty".into()))
            }
            GlueMode::Translation { target_modality: BaseModality::Text, .. } => {
                Err(GlueError::InvalidMode("translation targets a non-text generation model".into()))
            }
            GlueMode::Translation { example_prompts, .. }
                if example_prompts.iter().all(|p| p.trim().is_empty()) =>
            {
                Err(GlueError::InvalidMode("translation needs at least one example prompt".into()))
            }
            GlueMode::Ideation { task } if task.trim().is_empty() => {
                Err(GlueError::InvalidMode("ideation task must not be empty".into()))
            }
            _ => Ok(()),
        }
    }

    /// Reads the mode from Ask GPT parameter values (defaults already merged).
    /// An empty `example_prompts` falls back to the shipped examples; otherwise
    /// it holds one example per line.
    pub fn from_params(params: &ParamMap) -> Result<GlueMode, GlueError> {
        let text = |name: &str| params.get(name).and_then(|v| v.as_str()).unwrap_or("").to_string();
        let mode = match text("mode").as_str() {
            "custom" => GlueMode::Custom { instruction: text("instruction") },
            "translation" => {
                let target_modality: BaseModality = text("target_modality")
                    .parse()
                    .map_err(|e| GlueError::InvalidMode(format!("target_modality: {e}")))?;
                let listed: Vec<String> = text("example_prompts")
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect();
                let example_prompts =
                    if listed.is_empty() { default_example_prompts(target_modality) } else { listed };
                GlueMode::Translation { target_modality, example_prompts }
            }
            "ideation" => GlueMode::Ideation { task: text("task") },
            other => return Err(GlueError::InvalidMode(format!("unknown mode `{other}`"))),
        };
        mode.check()?;
        Ok(mode)
    }
}

/// Renders the exact prompt sent to the LLM. Placeholder values are trimmed
/// of surrounding whitespace; nothing else is normalized.
pub fn render_prompt(mode: &GlueMode, input_data: &str) -> Result<String, GlueError> {
    let input = input_data.trim();
    if input.is_empty() {
        return Err(GlueError::EmptyInput);
    }
    mode.check()?;
    Ok(match mode {
        GlueMode::Custom { instruction } => format!("{}\n{input}", instruction.trim()),
        GlueMode::Translation { target_modality, example_prompts } => {
            let list = example_prompts
                .iter()
                .map(|p| p.trim())
                .filter(|p| !p.is_empty())
                .collect::<Vec<_>>()
                .join("; ");
            format!(
                "Here are example prompts for a text-to-{} generation model: {list}.\n\
                 Transform {input} into a prompt. Answer in only the transformed prompt.",
                target_modality.prose_name()
            )
        }
        GlueMode::Ideation { task } => format!(
            "Generate an idea for {} based on {input}. Answer in one short sentence.",
            task.trim()
        ),
    })
}

/// Runs one glue step outside of any mosaic.
pub fn run_glue(
    mode: &GlueMode,
    input_data: &str,
    client: &dyn CompletionClient,
) -> Result<MediaValue, GlueError> {
    let prompt = render_prompt(mode, input_data)?;
    let text = complete(client, &prompt)?;
    Ok(MediaValue {
        modality: Modality::TEXT,
        payload: Payload::Text { text },
        provenance: Provenance {
            producer: Producer::Standalone,
            params_hash: None,
            input_hashes: vec![ContentHash::of(input_data.as_bytes())],
            prompt: Some(prompt),
        },
    })
}

pub(crate) fn complete(client: &dyn CompletionClient, prompt: &str) -> Result<String, GlueError> {
    client.complete(prompt).map_err(|cause| {
        if cause.is_timeout() {
            GlueError::ClientTimeout { prompt: prompt.to_string(), cause }
        } else {
            GlueError::Client { prompt: prompt.to_string(), cause }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{EchoClient, ScriptedClient};
    use crate::piece::ParamValue;
    use std::time::Duration;

    #[test]
    fn custom_is_instruction_newline_input() {
        let m = GlueMode::Custom { instruction: "summarize in 5 words".into() };
        assert_eq!(render_prompt(&m, "a long text").unwrap(), "summarize in 5 words\na long text");
    }

    #[test]
    fn empty_input_rejected() {
        let m = GlueMode::Ideation { task: "x".into() };
        assert_eq!(render_prompt(&m, "  \n"), Err(GlueError::EmptyInput));
    }

    #[test]
    fn invalid_modes() {
        assert!(GlueMode::Ideation { task: " ".into() }.check().is_err());
        assert!(GlueMode::Custom { instruction: String::new() }.check().is_err());
        let t = GlueMode::Translation { target_modality: BaseModality::Image, example_prompts: vec![] };
        assert!(t.check().is_err());
    }

    #[test]
    fn echo_returns_prompt() {
        let m = GlueMode::Ideation { task: "a poster".into() };
        let v = run_glue(&m, "cat, hat", &EchoClient).unwrap();
        assert_eq!(v.as_text(), v.provenance.prompt.as_deref());
    }

    #[test]
    fn timeout_carries_prompt() {
        struct Slow;
        impl CompletionClient for Slow {
            fn complete(&self, _: &str) -> Result<String, ClientError> {
                Err(ClientError::Timeout(Duration::from_secs(60)))
            }
        }
        let m = GlueMode::Custom { instruction: "do".into() };
        match run_glue(&m, "it", &Slow) {
            Err(GlueError::ClientTimeout { prompt, .. }) => assert_eq!(prompt, "do\nit"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn params_to_mode() {
        let mut p = ParamMap::new();
        p.insert("mode".into(), ParamValue::Text("translation".into()));
        p.insert("target_modality".into(), ParamValue::Text("audio".into()));
        p.insert("example_prompts".into(), ParamValue::Text(String::new()));
        match GlueMode::from_params(&p).unwrap() {
            GlueMode::Translation { target_modality, example_prompts } => {
                assert_eq!(target_modality, BaseModality::Audio);
                assert_eq!(example_prompts.len(), 3);
            }
            other => panic!("{other:?}"),
        }
        p.insert("example_prompts".into(), ParamValue::Text("one\n\ntwo".into()));
        let GlueMode::Translation { example_prompts, .. } = GlueMode::from_params(&p).unwrap() else { panic!() };
        assert_eq!(example_prompts, ["one", "two"]);
    }

    #[test]
    fn defaults_cover_generation_targets() {
        for b in [BaseModality::Image, BaseModality::Video, BaseModality::ThreeD, BaseModality::Audio] {
            assert_eq!(default_example_prompts(b).len(), 3, "{b:?}");
        }
        assert!(default_example_prompts(BaseModality::Text).is_empty());
    }

    #[test]
    fn scripted_ideation() {
        let c = ScriptedClient::responses(["An idea."]);
        let m = GlueMode::Ideation { task: "a logo".into() };
        assert_eq!(run_glue(&m, "tags", &c).unwrap().as_text(), Some("An idea."));
    }
}
