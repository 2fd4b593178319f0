mod bind;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use mosaic_core::assistant::assist;
use mosaic_core::engine::{EventKind, RunEvent, RunObserver, RunRecord, RunStatus};
use mosaic_core::llm::ScriptedClient;
use mosaic_core::mosaic::chains;
use mosaic_core::store::MosaicDocument;
use mosaic_core::studio::{Studio, StudioOptions, ENV_ADAPTERS, ENV_WORKSPACE};
use mosaic_core::wire::{
    self, validation_body, AssistBody, CatalogBody, ErrorBody, ErrorClass, SearchBody, EXIT_RUN_FAILED,
};
use mosaic_core::{Catalog, Mosaic, MosaicGraph, Payload};

#[derive(Debug, Parser)]
#[command(name = "mosaic", version, about = "Assemble and run chains of generative models from the command line")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Output format; json prints exactly the HTTP API's response bodies
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    format: Format,
    /// Workspace directory holding mosaics, blobs and runs
    #[arg(long, env = ENV_WORKSPACE, default_value = ".mosaic", global = true)]
    workspace: PathBuf,
    /// HTTP adapter configuration; pieces it does not name run on mocks
    #[arg(long, env = ENV_ADAPTERS, global = true)]
    adapters: Option<PathBuf>,
    /// Scripted LLM transcript to answer prompts instead of a live endpoint
    #[arg(long, global = true)]
    transcript: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inspect the piece catalog
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Validate or run a mosaic file
    #[command(subcommand)]
    Mosaic(MosaicCommand),
    /// Ask the assistant to plan a chain for a task
    Assist {
        task: String,
        /// Mosaic file to append the planned pieces to
        #[arg(long)]
        apply: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogCommand {
    /// Every piece with its input and output modalities
    List,
    /// Pieces ranked by relevance to a description
    Search {
        query: String,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Debug, Subcommand)]
enum MosaicCommand {
    /// Check connections and list the chains
    Validate { file: PathBuf },
    /// Run one chain and store its outputs and record in the workspace
    Run {
        file: PathBuf,
        /// Chain index, as listed by `validate`
        #[arg(long, default_value_t = 0)]
        chain: usize,
        /// `<instance>=<value>`: text inline, media as a file path
        #[arg(long = "input", value_name = "INSTANCE=VALUE")]
        inputs: Vec<String>,
    },
}

/// What a command produced: its body and the exit code to report.
struct Outcome {
    json: String,
    human: String,
    code: i32,
}

impl Outcome {
    fn ok(json: String, human: String) -> Self {
        Outcome { json, human, code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.global.format;
    let code = match execute(cli) {
        Ok(outcome) => {
            let text = match format {
                Format::Json => outcome.json,
                Format::Human => outcome.human,
            };
            if !text.is_empty() {
                emit(text.trim_end());
            }
            outcome.code
        }
        Err(error) => {
            match format {
                Format::Json => emit(&wire::to_json(&error)),
                Format::Human => eprintln!("{}", human_error(&error)),
            }
            error.class().exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

/// Prints a line, ignoring a closed pipe (`mosaic ... | head`).
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn execute(cli: Cli) -> Result<Outcome, ErrorBody> {
    let global = cli.global;
    match cli.command {
        Command::Catalog(CatalogCommand::List) => {
            let catalog = Catalog::load_builtin();
            Ok(Outcome::ok(wire::to_json(&CatalogBody::new(&catalog)), human_catalog(&catalog)))
        }
        Command::Catalog(CatalogCommand::Search { query, k }) => {
            let studio = open(&global)?;
            let hits = studio.catalog.search(&query, k).map_err(|e| ErrorBody::from(&e))?;
            let body = SearchBody::new(&studio.catalog, &query, hits);
            let human = body.results.iter().map(|r| format!("{}\n", r.spec_id)).collect();
            Ok(Outcome::ok(wire::to_json(&body), human))
        }
        Command::Mosaic(MosaicCommand::Validate { file }) => {
            let catalog = Catalog::load_builtin();
            let (graph, _) = read_mosaic(&file)?;
            let body = validation_body(&graph, &catalog);
            let human = human_validation(&body, &graph);
            let code = if body.valid { 0 } else { ErrorClass::Validation.exit_code() };
            Ok(Outcome { json: wire::to_json(&body), human, code })
        }
        Command::Mosaic(MosaicCommand::Run { file, chain, inputs }) => {
            let studio = open(&global)?;
            let (graph, doc) = read_mosaic(&file)?;
            let bindings = bind::parse_all(&inputs)?;
            let values = bind::resolve(&graph, &studio, bindings)?;
            let mut prepared = studio.engine.prepare(&graph, chain, &values).map_err(|e| ErrorBody::from(&e))?;
            if let Some(doc) = doc {
                prepared = prepared.with_mosaic_id(doc.id);
            }
            let progress = Progress { enabled: global.format == Format::Human };
            let record = studio.engine.execute(prepared, &progress);
            studio.workspace.save_run(&record).map_err(|e| ErrorBody::from(&e))?;
            let written = write_outputs(&studio, &record)?;
            let code = if record.status == RunStatus::Done { 0 } else { EXIT_RUN_FAILED };
            Ok(Outcome { json: wire::to_json(&record), human: human_run(&record, &written), code })
        }
        Command::Assist { task, apply } => {
            let studio = open(&global)?;
            let client = studio.llm()?;
            let (mut mosaic, doc) = match &apply {
                Some(path) => {
                    let (graph, doc) = read_mosaic(path)?;
                    (Mosaic::from_graph(graph), doc)
                }
                None => (Mosaic::new(), None),
            };
            let outcome = assist(&task, &studio.catalog, client, &mut mosaic).map_err(|e| ErrorBody::from(&e))?;
            let graph = mosaic.into_graph();
            if let Some(path) = &apply {
                write_mosaic(path, &graph, doc, &studio.catalog)?;
            }
            let body = AssistBody::new(outcome, graph);
            let human = human_assist(&body, &studio.catalog, apply.as_deref());
            Ok(Outcome::ok(wire::to_json(&body), human))
        }
    }
}

fn open(global: &Global) -> Result<Studio, ErrorBody> {
    let setup = |e: &dyn std::fmt::Display| ErrorBody::new(ErrorClass::Precondition, "Setup", e.to_string(), Value::Null);
    let mut options = StudioOptions::from_env(global.workspace.clone()).map_err(|e| setup(&e))?;
    if let Some(path) = &global.adapters {
        options.adapters = Some(path.clone());
    }
    if let Some(path) = &global.transcript {
        options.llm = Some(Arc::new(ScriptedClient::from_file(path).map_err(|e| setup(&e))?));
    }
    Studio::open(options).map_err(|e| setup(&e))
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> ErrorBody {
    ErrorBody::new(ErrorClass::Usage, "Io", format!("{}: {e}", path.display()), Value::Null)
}

/// A mosaic file is either a stored document or a bare graph.
fn read_mosaic(path: &Path) -> Result<(MosaicGraph, Option<MosaicDocument>), ErrorBody> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| io_error(path, e))?;
    if value.get("format_version").is_some() {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mosaic");
        let stem = stem.strip_suffix(".mosaic").unwrap_or(stem);
        let doc = MosaicDocument::from_json(stem, &text).map_err(|e| ErrorBody::from(&e))?;
        Ok((doc.mosaic.clone(), Some(doc)))
    } else {
        let graph = serde_json::from_value(value).map_err(|e| io_error(path, e))?;
        Ok((graph, None))
    }
}

fn write_mosaic(path: &Path, graph: &MosaicGraph, doc: Option<MosaicDocument>, catalog: &Catalog) -> Result<(), ErrorBody> {
    let text = match doc {
        Some(mut doc) => {
            doc.version += 1;
            doc.modified_at = chrono::Utc::now();
            doc.catalog_fingerprint = catalog.fingerprint().to_string();
            doc.mosaic = graph.clone();
            serde_json::to_string_pretty(&doc)
        }
        None => serde_json::to_string_pretty(graph),
    }
    .map_err(|e| io_error(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

/// Copies each piece output to `<workspace>/outputs/<run>/`, named by
/// instance and spec.
fn write_outputs(studio: &Studio, record: &RunRecord) -> Result<Vec<PathBuf>, ErrorBody> {
    let dir = studio.workspace.root().join("outputs").join(&record.run_id);
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let mut written = Vec::new();
    for entry in &record.entries {
        let Some(value) = &entry.output else { continue };
        let (ext, bytes) = match &value.payload {
            Payload::Text { text } => ("txt", text.clone().into_bytes()),
            Payload::Blob { hash, format } => {
                (format.extension(), studio.engine.blobs().get(hash).map_err(|e| io_error(&dir, e))?)
            }
        };
        let path = dir.join(format!("{}_{}.{ext}", entry.instance_id, entry.spec_id));
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

struct Progress {
    enabled: bool,
}

impl RunObserver for Progress {
    fn on_event(&self, event: &RunEvent, record: &RunRecord) {
        if !self.enabled {
            return;
        }
        let spec = |id| record.entry(id).map_or("?", |e| e.spec_id.as_str());
        match &event.kind {
            EventKind::PieceStarted { instance_id } => eprintln!("  {instance_id} {} ...", spec(*instance_id)),
            EventKind::PieceDone { instance_id, cache_hit, wall_time_ms, .. } => {
                let note = if *cache_hit { " (cached)".to_string() } else { format!(" ({wall_time_ms} ms)") };
                eprintln!("  {instance_id} {} done{note}", spec(*instance_id));
            }
            EventKind::PieceFailed { instance_id, error } => {
                eprintln!("  {instance_id} {} failed: {}", spec(*instance_id), error.message)
            }
            EventKind::RunDone { .. } => {}
        }
    }
}

fn human_error(error: &ErrorBody) -> String {
    let mut out = format!("error[{}]: {}", error.error, error.message);
    if let Some(violations) = error.details.get("violations").and_then(Value::as_array) {
        for v in violations {
            out.push_str(&format!("\n  {}: {}", v["code"].as_str().unwrap_or("?"), v["message"].as_str().unwrap_or("")));
        }
    }
    out
}

fn human_catalog(catalog: &Catalog) -> String {
    let mut out = String::new();
    for spec in catalog.specs() {
        let inputs: Vec<String> = spec.input_modalities().map(|m| m.label()).collect();
        let inputs = if inputs.is_empty() { "user".to_string() } else { inputs.join(", ") };
        out.push_str(&format!("{:<44} {} -> {}\n", spec.spec_id, inputs, spec.output_modality().label()));
    }
    out
}

fn human_validation(body: &wire::ValidationBody, graph: &MosaicGraph) -> String {
    let mut out = String::new();
    if !body.unknown_specs.is_empty() {
        for u in &body.unknown_specs {
            out.push_str(&format!("unknown spec `{}` at instance {}\n", u.spec_id, u.instance));
        }
        return out;
    }
    if !body.valid {
        for v in &body.violations {
            out.push_str(&format!("{}: {}\n", serde_json::to_value(v.code).unwrap_or_default().as_str().unwrap_or("?"), v.message));
        }
        return out;
    }
    out.push_str(&format!("valid: {} piece(s), {} chain(s)\n", graph.len(), body.chains.len()));
    for chain in &body.chains {
        let specs: Vec<String> = chain
            .order
            .iter()
            .map(|&id| format!("{id}:{}", graph.piece(id).map_or("?", |p| p.spec_id.as_str())))
            .collect();
        out.push_str(&format!("chain {}: {}\n", chain.index, specs.join(" -> ")));
    }
    out
}

fn human_run(record: &RunRecord, written: &[PathBuf]) -> String {
    let status = serde_json::to_value(record.status).unwrap_or_default();
    let mut out = format!("run {} {}\n", record.run_id, status.as_str().unwrap_or("?"));
    for path in written {
        out.push_str(&format!("  {}\n", path.display()));
    }
    out
}

fn human_assist(body: &AssistBody, catalog: &Catalog, applied: Option<&Path>) -> String {
    let mut out = String::new();
    for (i, step) in body.plan.steps.iter().enumerate() {
        let name = catalog.resolve(&step.model).map_or(step.model.as_str(), |s| s.spec_id.as_str());
        out.push_str(&format!("{}. {name}\n", i + 1));
    }
    for c in &body.report.criteria {
        let status = serde_json::to_value(c.status).unwrap_or_default();
        out.push_str(&format!("criterion {}: {}\n", c.criterion, status.as_str().unwrap_or("?")));
    }
    let chains = chains(&body.mosaic, catalog).map(|c| c.len()).unwrap_or(0);
    match applied {
        Some(path) => out.push_str(&format!("added {} piece(s) to {}\n", body.added.len(), path.display())),
        None => out.push_str(&format!("planned {} piece(s) in {chains} chain(s)\n", body.added.len())),
    }
    out
}
