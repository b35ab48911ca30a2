use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use mlagent_core::coding::{LoopSettings, run_iterative_loop};
use mlagent_core::config::{KernelConfig, Role, load_config};
use mlagent_core::evaluation::fixtures::{self, REFERENCE_AGENT};
use mlagent_core::evaluation::medals::{MlebenchSummary, load_results, load_thresholds};
use mlagent_core::evaluation::{
    Benchmark, DatasetMetadata, InvalidRank, format_report, load_dataset_catalog, load_run_records, score_predictions,
};
use mlagent_core::llm::{API_KEY_ENV, HttpBackend, HttpSettings, LlmBackend};
use mlagent_core::perception::{PerceptionContext, perceive};
use mlagent_core::registry::{ToolSpec, default_registry, load_tool_registry};
use mlagent_core::sandbox::{Sandbox, SandboxSettings, prepare_workspace};
use mlagent_core::semantic::{KbSettings, build_knowledge_base, load_knowledge_base};
use mlagent_core::{Gateway, ScriptedBackend};

const CONFIG_ENV: &str = "MLZERO_CONFIG";

const EXIT_FAILURE: u8 = 1;
const EXIT_EXHAUSTED: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_FORMAT: u8 = 4;

#[derive(Parser)]
#[command(name = "mlagent", version, about = "Autonomous ML-engineering agent")]
struct Cli {
    /// Log filter, e.g. `info` or `mlagent_core=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// YAML config; falls back to $MLZERO_CONFIG, then built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tool registry JSON; the shipped registry when omitted.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Replay canned LLM responses from a JSON file instead of calling a model.
    /// Either an array (one shared queue) or an object keyed by agent or role.
    #[arg(long)]
    scripted: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Perceive a data folder, then iterate code generation until success.
    Run {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "")]
        user_input: String,
        /// Overrides `max_iterations` from the config.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Overall time budget in seconds.
        #[arg(long)]
        wall_limit: Option<u64>,
        /// Knowledge-base root; overrides `semantic_memory.kb_path`.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the perception context of a data folder.
    Perceive {
        #[arg(long)]
        input: PathBuf,
        /// Workspace for generated reader scripts.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Condense and summarize tutorials into a knowledge base.
    BuildKb {
        #[arg(long)]
        tool: String,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Benchmark table (success, average rank, relative time) and medal counts.
    Evaluate {
        /// Per-run CSV; the embedded benchmark tables when omitted.
        #[arg(long, requires = "datasets")]
        runs: Option<PathBuf>,
        #[arg(long, requires = "runs")]
        datasets: Option<PathBuf>,
        #[arg(long, default_value = REFERENCE_AGENT)]
        reference: String,
        /// `tie_averaged_bottom` or `worst_position`.
        #[arg(long, default_value = "tie_averaged_bottom")]
        convention: InvalidRank,
        /// Also summarize medals; uses the embedded tables unless both files are given.
        #[arg(long)]
        mlebench: bool,
        #[arg(long, requires = "results")]
        thresholds: Option<PathBuf>,
        #[arg(long, requires = "thresholds")]
        results: Option<PathBuf>,
        /// Agent whose medals are counted.
        #[arg(long, default_value = "ours")]
        agent: String,
        /// Lower-is-better results are stored as printed, not negated.
        #[arg(long)]
        raw_values: bool,
        #[arg(long)]
        json: bool,
    },
    /// Score a results file against ground truth.
    Score {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        meta: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

fn fail(e: impl Display) -> Failure {
    Failure::new(EXIT_FAILURE, e)
}

fn config_error(e: impl Display) -> Failure {
    Failure::new(EXIT_CONFIG, e)
}

fn load_common(common: &Common) -> Result<(KernelConfig, Vec<ToolSpec>), Failure> {
    let path = common
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let cfg = load_config(path.as_deref()).map_err(config_error)?;
    let registry = match &common.registry {
        Some(p) => load_tool_registry(p).map_err(config_error)?,
        None => default_registry(),
    };
    Ok((cfg, registry))
}

fn scripted_backend(path: &Path) -> Result<ScriptedBackend, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let strings = |v: &Value| -> Result<Vec<String>, Failure> {
        v.as_array()
            .ok_or_else(|| config_error("scripted responses must be arrays of strings"))?
            .iter()
            .map(|s| {
                s.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| config_error("scripted responses must be strings"))
            })
            .collect()
    };
    let backend = ScriptedBackend::default();
    match &value {
        Value::Array(_) => backend.push_all(strings(&value)?),
        Value::Object(map) => {
            for (key, v) in map {
                backend.push_keyed(key, strings(v)?);
            }
        }
        _ => return Err(config_error("scripted file must hold an array or an object")),
    }
    Ok(backend)
}

fn gateway(cfg: &KernelConfig, common: &Common) -> Result<Gateway, Failure> {
    let backend: Arc<dyn LlmBackend> = match &common.scripted {
        Some(path) => Arc::new(scripted_backend(path)?),
        None => {
            let base_url = cfg
                .llm
                .base_url
                .clone()
                .ok_or_else(|| config_error("llm.base_url is required unless --scripted is given"))?;
            let settings = HttpSettings::from_env(&base_url, cfg.llm.proxy_url.clone());
            if settings.api_key.is_none() {
                return Err(config_error(format!("set {API_KEY_ENV} to call {base_url}")));
            }
            Arc::new(HttpBackend::new(settings).map_err(config_error)?)
        }
    };
    Ok(Gateway::new(backend))
}

fn sandbox(cfg: &KernelConfig, output: &Path) -> Result<Sandbox, Failure> {
    let ws = prepare_workspace(output).map_err(fail)?;
    Ok(Sandbox::new(ws, SandboxSettings::from_config(cfg)))
}

fn print_context(ctx: &PerceptionContext) {
    println!("Selected tool: {}", ctx.selected_tool.name);
    println!("Explanation: {}", ctx.selection_explanation);
    println!("Description files:");
    for p in &ctx.description_files {
        println!("  {}", p.display());
    }
    println!("\nTask description:\n{}\n", ctx.task_description);
    println!("Data prompt:\n{}", ctx.data_prompt);
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(fail)?;
    std::fs::write(path, text).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn run(
    input: &Path,
    output: &Path,
    user_input: &str,
    max_iter: Option<usize>,
    wall_limit: Option<u64>,
    kb: Option<PathBuf>,
    common: &Common,
) -> Result<(), Failure> {
    let (mut cfg, registry) = load_common(common)?;
    if let Some(n) = max_iter {
        cfg.max_iterations = n;
        cfg.validate().map_err(config_error)?;
    }
    let gateway = gateway(&cfg, common)?;
    let sandbox = sandbox(&cfg, output)?;
    let ctx = perceive(input, &cfg, &registry, &gateway, &sandbox).map_err(fail)?;
    write_json(&sandbox.workspace().root().join("perception.json"), &ctx)?;

    let kb_root = kb.or_else(|| cfg.semantic_memory.kb_path.as_ref().map(PathBuf::from));
    let kb = match &kb_root {
        Some(root) if cfg.semantic_memory.enabled => {
            load_knowledge_base(root, &ctx.selected_tool.name).map_err(fail)?
        }
        _ => Vec::new(),
    };
    tracing::info!(tool = %ctx.selected_tool.name, documents = kb.len(), "knowledge base loaded");

    let mut settings = LoopSettings::from_config(&cfg);
    settings.wall_limit = wall_limit.map(Duration::from_secs);
    let outcome = run_iterative_loop(&ctx, &kb, user_input, &settings, &gateway, &sandbox).map_err(fail)?;

    println!("tool: {}", ctx.selected_tool.name);
    println!("iterations: {}", outcome.iterations_used);
    println!(
        "tokens: {} in, {} out",
        outcome.usage.input_tokens, outcome.usage.output_tokens
    );
    match (&outcome.results_path, outcome.success) {
        (Some(path), true) => {
            println!("success: results at {}", path.display());
            Ok(())
        }
        _ => {
            let why = if outcome.wall_limit_reached {
                "wall-clock limit reached"
            } else {
                "iteration budget exhausted"
            };
            Err(Failure::new(EXIT_EXHAUSTED, format!("no successful solution: {why}")))
        }
    }
}

fn perceive_cmd(input: &Path, output: &Path, json: bool, common: &Common) -> Result<(), Failure> {
    let (cfg, registry) = load_common(common)?;
    let gateway = gateway(&cfg, common)?;
    let sandbox = sandbox(&cfg, output)?;
    let ctx = perceive(input, &cfg, &registry, &gateway, &sandbox).map_err(fail)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&ctx).map_err(fail)?);
    } else {
        print_context(&ctx);
    }
    Ok(())
}

fn build_kb(tool: &str, src: &Path, out: &Path, common: &Common) -> Result<(), Failure> {
    let (cfg, _) = load_common(common)?;
    let gateway = gateway(&cfg, common)?;
    let built = build_knowledge_base(
        src,
        tool,
        out,
        KbSettings::from_config(&cfg),
        &gateway,
        &cfg.role(Role::Planner),
    )
    .map_err(fail)?;
    for (doc, path) in &built {
        println!("{}\t{}", doc.title, path.display());
    }
    println!("{} documents", built.len());
    Ok(())
}

fn open(path: &Path) -> Result<std::fs::File, Failure> {
    std::fs::File::open(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    runs: Option<&Path>,
    datasets: Option<&Path>,
    reference: &str,
    convention: InvalidRank,
    mlebench: bool,
    medal_files: Option<(&Path, &Path)>,
    agent: &str,
    raw_values: bool,
    json: bool,
) -> Result<(), Failure> {
    let bench = match (runs, datasets) {
        (Some(runs), Some(datasets)) => {
            let catalog = load_dataset_catalog(open(datasets)?).map_err(|e| Failure::new(EXIT_FORMAT, e))?;
            let records = load_run_records(open(runs)?, &catalog).map_err(|e| Failure::new(EXIT_FORMAT, e))?;
            Benchmark::new(records, catalog)
        }
        _ => fixtures::maab_benchmark(),
    };
    let agents = bench.agents();
    if !agents.iter().any(|a| a == reference) {
        return Err(config_error(format!("reference agent `{reference}` has no runs")));
    }
    let rows = bench.summarize(&agents, reference, convention);

    let medals = if mlebench || medal_files.is_some() {
        let (thresholds, results) = match medal_files {
            Some((t, r)) => (
                load_thresholds(open(t)?).map_err(|e| Failure::new(EXIT_FORMAT, e))?,
                load_results(open(r)?).map_err(|e| Failure::new(EXIT_FORMAT, e))?,
            ),
            None => (fixtures::mlebench_thresholds(), fixtures::mlebench_results()),
        };
        Some(MlebenchSummary::compute(agent, &thresholds, &results, !raw_values))
    } else {
        None
    };

    if json {
        let value = serde_json::json!({
            "convention": format!("{convention:?}"),
            "reference": reference,
            "agents": rows,
            "mlebench": medals,
        });
        println!("{}", serde_json::to_string_pretty(&value).map_err(fail)?);
        return Ok(());
    }
    println!("Invalid-rank convention: {convention:?}\n");
    print!("{}", format_report(&rows));
    if let Some(m) = medals {
        println!(
            "\n{}: gold {}, silver {}, bronze {}, any medal {}, above median {}, valid {}/{} ({:.0}%)",
            m.agent,
            m.gold,
            m.silver,
            m.bronze,
            m.any_medal(),
            m.above_median,
            m.valid,
            m.total,
            m.valid_rate()
        );
    }
    Ok(())
}

fn score(results: &Path, truth: &Path, meta: &Path) -> Result<(), Failure> {
    let meta = DatasetMetadata::load(meta).map_err(config_error)?;
    match score_predictions(results, truth, &meta) {
        Ok(v) => {
            println!("{}: {v:.6}", meta.metric_name);
            Ok(())
        }
        Err(e) if e.is_format_failure() => Err(Failure::new(EXIT_FORMAT, e)),
        Err(e) => Err(fail(e)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_new(&cli.log).unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();

    let result = match &cli.command {
        Command::Run {
            input,
            output,
            user_input,
            max_iter,
            wall_limit,
            kb,
            common,
        } => run(input, output, user_input, *max_iter, *wall_limit, kb.clone(), common),
        Command::Perceive {
            input,
            output,
            json,
            common,
        } => perceive_cmd(input, output, *json, common),
        Command::BuildKb { tool, src, out, common } => build_kb(tool, src, out, common),
        Command::Evaluate {
            runs,
            datasets,
            reference,
            convention,
            mlebench,
            thresholds,
            results,
            agent,
            raw_values,
            json,
        } => evaluate(
            runs.as_deref(),
            datasets.as_deref(),
            reference,
            *convention,
            *mlebench,
            thresholds.as_deref().zip(results.as_deref()),
            agent,
            *raw_values,
            *json,
        ),
        Command::Score { results, truth, meta } => score(results, truth, meta),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
