//! Plans a chain from a task description with an LLM, checks the plan
//! mechanically and adds it to the mosaic.

mod plan;
mod prompt;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use plan::{extract_json_object, parse_plan, Binding, Plan, PlanError, PlanStep};
pub use prompt::{critique_prompt, model_list, number_words, planner_prompt, CRITERIA, EXAMPLE_ANSWER, PLANNER_PREAMBLE};

use crate::catalog::Catalog;
use crate::llm::{ClientError, CompletionClient};
use crate::modality::{compatible, Modality};
use crate::mosaic::{Edit, EditError, InstanceId, Mosaic, Position, PIECE_HEIGHT, PIECE_WIDTH};
use crate::piece::{ParamValue, PieceKind, PieceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionStatus {
    Passed,
    Failed,
    /// Not machine-checkable; left to the LLM's self-critique and the user.
    LlmJudged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub criterion: u8,
    pub description: String,
    pub status: CriterionStatus,
    #[serde(default)]
    pub details: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub criteria: Vec<CriterionResult>,
}

const DESCRIPTIONS: [&str; 4] = [
    "Whether the user's task was understood and completed.",
    "Whether no models outside of the provided ones were used.",
    "Whether the output and input of each step can be connected.",
    "Whether it follows the correct JSON format.",
];

impl ValidationReport {
    fn from_parts(c2: Vec<String>, c3: Vec<String>, c4: Vec<String>) -> Self {
        let result = |n: u8, details: Vec<String>| CriterionResult {
            criterion: n,
            description: DESCRIPTIONS[n as usize - 1].into(),
            status: if details.is_empty() { CriterionStatus::Passed } else { CriterionStatus::Failed },
            details,
        };
        ValidationReport {
            criteria: vec![
                CriterionResult {
                    criterion: 1,
                    description: DESCRIPTIONS[0].into(),
                    status: CriterionStatus::LlmJudged,
                    details: Vec::new(),
                },
                result(2, c2),
                result(3, c3),
                result(4, c4),
            ],
        }
    }

    /// Report for an answer that did not parse: criterion 4 carries the
    /// parse errors; 2 and 3 cannot be checked.
    pub fn unparsed(errors: &[PlanError]) -> Self {
        let unchecked = vec!["not checked: the answer did not parse".to_string()];
        Self::from_parts(unchecked.clone(), unchecked, errors.iter().map(ToString::to_string).collect())
    }

    pub fn criterion(&self, n: u8) -> &CriterionResult {
        &self.criteria[n as usize - 1]
    }

    /// Criteria 2 to 4 all passed.
    pub fn machine_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status != CriterionStatus::Failed)
    }
}

/// Machine-checks criteria 2 to 4. Criterion 4 also covers parameter
/// overrides, which must name real parameters with in-bounds values.
pub fn validate_plan(plan: &Plan, catalog: &Catalog) -> ValidationReport {
    let mut c2 = Vec::new();
    let mut c3 = Vec::new();
    let mut c4 = Vec::new();
    let specs: Vec<Option<&PieceSpec>> = plan.steps.iter().map(|s| catalog.resolve(&s.model)).collect();
    let output_of = |i: usize| specs.get(i).copied().flatten().map(PieceSpec::output_modality);

    for (i, step) in plan.steps.iter().enumerate() {
        let Some(spec) = specs[i] else {
            c2.push(format!("step {i}: `{}` is not one of the provided models", step.model));
            continue;
        };
        if step.inputs.len() != spec.arity() {
            c3.push(format!(
                "step {i}: {} takes {} input(s) but {} were bound",
                spec.spec_id,
                spec.arity(),
                step.inputs.len()
            ));
        }
        for (channel, (binding, socket)) in step.inputs.iter().zip(&spec.input_sockets).enumerate() {
            let source: Option<Modality> = match *binding {
                Binding::User(base) => Some(catalog.input_spec_for(base).output_modality()),
                other => Plan::source_step(i, other).and_then(output_of),
            };
            if let Some(out) = source {
                if !compatible(out, socket.modality) {
                    c3.push(format!(
                        "step {i}: {binding} produces {out}, which cannot feed {} input {channel} ({})",
                        spec.spec_id, socket.modality
                    ));
                }
            }
        }
        for (name, value) in &step.parameters {
            let checked = ParamValue::from_json(value)
                .ok_or_else(|| format!("unsupported value {value}"))
                .and_then(|v| spec.check_parameter(name, &v).map_err(|e| e.to_string()));
            if let Err(reason) = checked {
                c4.push(format!("step {i}: parameter `{name}`: {reason}"));
            }
        }
    }
    ValidationReport::from_parts(c2, c3, c4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub round: u8,
    pub prompt: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistOutcome {
    pub plan: Plan,
    pub report: ValidationReport,
    pub rounds: Vec<Round>,
    /// Instances added to the mosaic, in creation order.
    pub added: Vec<InstanceId>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssistError {
    #[error("task is empty")]
    EmptyTask,
    #[error("LLM call in round {round} failed: {error}")]
    Client { round: u8, error: ClientError },
    #[error("no valid plan after the critique round")]
    UnrepairablePlan { rounds: Vec<Round> },
    #[error("plan could not be placed on the canvas: {0}")]
    Materialize(#[from] EditError),
}

fn evaluate(round: u8, prompt: String, answer: String, catalog: &Catalog) -> (Round, Option<Vec<PlanError>>) {
    match parse_plan(&answer) {
        Ok(plan) => {
            let report = validate_plan(&plan, catalog);
            (Round { round, prompt, answer, plan: Some(plan), report }, None)
        }
        Err(errors) => {
            let report = ValidationReport::unparsed(&errors);
            (Round { round, prompt, answer, plan: None, report }, Some(errors))
        }
    }
}

/// Plans, critiques once, re-validates and, if the final plan passes
/// criteria 2 to 4, appends it to `mosaic`. On any error `mosaic` is left
/// untouched.
///
/// The critique answer supersedes the first plan when it contains JSON. An
/// answer without JSON confirms the first plan, which is then used only if
/// it passed on its own.
pub fn assist(
    task: &str,
    catalog: &Catalog,
    client: &dyn CompletionClient,
    mosaic: &mut Mosaic,
) -> Result<AssistOutcome, AssistError> {
    if task.trim().is_empty() {
        return Err(AssistError::EmptyTask);
    }
    let planner = planner_prompt(catalog, task);
    let answer1 = client.complete(&planner).map_err(|error| AssistError::Client { round: 1, error })?;
    let critique = critique_prompt(&planner, &answer1);
    let (round1, _) = evaluate(1, planner, answer1, catalog);

    let answer2 = client.complete(&critique).map_err(|error| AssistError::Client { round: 2, error })?;
    let (round2, errors2) = evaluate(2, critique, answer2, catalog);

    let chosen = match (&round2.plan, errors2.as_deref()) {
        (Some(plan), _) if round2.report.machine_passed() => Some((plan.clone(), round2.report.clone())),
        (None, Some([PlanError::NoJsonFound])) if round1.report.machine_passed() => {
            round1.plan.clone().map(|p| (p, round1.report.clone()))
        }
        _ => None,
    };
    let rounds = vec![round1, round2];
    let Some((plan, report)) = chosen else {
        return Err(AssistError::UnrepairablePlan { rounds });
    };

    let mut draft = mosaic.clone();
    let added = materialize(&plan, catalog, &mut draft)?;
    *mosaic = draft;
    Ok(AssistOutcome { plan, report, rounds, added })
}

pub const COLUMN_GAP: f64 = 2.0;
pub const ROW_GAP: f64 = 1.0;

/// Appends a validated plan below everything already on the canvas, one
/// column per depth with new input pieces in the first column.
pub fn materialize(plan: &Plan, catalog: &Catalog, mosaic: &mut Mosaic) -> Result<Vec<InstanceId>, EditError> {
    let top = mosaic.graph().bottom_edge().map_or(0.0, |b| b + PIECE_HEIGHT + ROW_GAP);
    let column_x = |col: usize| col as f64 * (PIECE_WIDTH + COLUMN_GAP);
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut place = |col: usize| {
        let row = rows.entry(col).or_insert(0);
        let y = top + *row as f64 * (PIECE_HEIGHT + ROW_GAP);
        *row += 1;
        Position::new(column_x(col), y)
    };

    let mut added = Vec::new();
    let mut step_ids: Vec<InstanceId> = Vec::with_capacity(plan.steps.len());
    let mut depth: Vec<usize> = Vec::with_capacity(plan.steps.len());
    for (i, step) in plan.steps.iter().enumerate() {
        let spec = catalog.resolve(&step.model).ok_or_else(|| EditError::UnknownSpec(step.model.clone()))?;
        let d = if spec.kind == PieceKind::Input {
            0
        } else {
            1 + step
                .inputs
                .iter()
                .filter_map(|&b| Plan::source_step(i, b).map(|s| depth[s]))
                .max()
                .unwrap_or(0)
        };

        let mut sources = Vec::with_capacity(step.inputs.len());
        for &binding in &step.inputs {
            sources.push(match binding {
                Binding::User(base) => {
                    let input = catalog.input_spec_for(base);
                    let id = add(mosaic, catalog, &input.spec_id, place(0))?;
                    added.push(id);
                    id
                }
                other => step_ids[Plan::source_step(i, other).expect("parsed plan")],
            });
        }

        let id = add(mosaic, catalog, &spec.spec_id, place(d))?;
        added.push(id);
        for (name, value) in &step.parameters {
            let value = ParamValue::from_json(value).ok_or_else(|| {
                EditError::InvalidParameter(crate::piece::ParamError::TypeMismatch {
                    name: name.clone(),
                    expected: "a scalar",
                    got: "a JSON array or object",
                })
            })?;
            mosaic.apply_edit(catalog, Edit::SetParameter { instance: id, name: name.clone(), value })?;
        }
        for (channel, from) in sources.into_iter().enumerate() {
            mosaic.apply_edit(catalog, Edit::Connect { from, to: id, channel: channel as u8 })?;
        }
        step_ids.push(id);
        depth.push(d);
    }
    Ok(added)
}

fn add(mosaic: &mut Mosaic, catalog: &Catalog, spec_id: &str, at: Position) -> Result<InstanceId, EditError> {
    let outcome = mosaic.apply_edit(catalog, Edit::AddPiece { spec_id: spec_id.to_string(), position: at })?;
    Ok(outcome.created().expect("add creates an instance"))
}
