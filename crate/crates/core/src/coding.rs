//! Iterative generate, execute and judge loop.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::config::{EpisodicMode, IndexMode, KernelConfig, Role};
use crate::episodic::{
    AnalysisInput, EpisodicError, EpisodicStore, IterationPaths, IterationRecord, Verdict, analyze_error,
    error_context_for,
};
use crate::llm::{Gateway, LlmError, LlmRequest, RoleSettings, Speaker, TokenUsage};
use crate::parse::{extract_fenced_block, find_labeled_fields};
use crate::perception::PerceptionContext;
use crate::prompts::{self, ShellEnv, ShellPrompt, SolutionPrompt};
use crate::sandbox::{Sandbox, SandboxError, ScriptJob};
use crate::semantic::{KnowledgeDocument, RetrievalQuery, SemanticError, render_retrieved, retrieve_documents};
use crate::text::{truncate_chars, truncate_middle};

pub const UNPARSEABLE_JUDGMENT: &str = "unparseable judgment";
pub const NO_RESULTS_FILE: &str = "no results file produced";

#[derive(Debug, thiserror::Error)]
pub enum LoopError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Episodic(#[from] EpisodicError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub verdict: Verdict,
    pub analysis: String,
}

/// Reads `DECISION:` and `ANALYSIS:`; `None` when no verdict is recognizable.
pub fn parse_decision(text: &str) -> Option<Decision> {
    let fields = find_labeled_fields(text, &["DECISION:", "ANALYSIS:"]);
    let token = fields.get("DECISION:")?.split_whitespace().next()?.to_ascii_uppercase();
    let token = token.trim_matches(|c: char| !c.is_ascii_alphabetic());
    let verdict = match token {
        "FINISH" => Verdict::Finish,
        "FIX" => Verdict::Fix,
        _ => return None,
    };
    let analysis = fields
        .get("ANALYSIS:")
        .filter(|a| !a.is_empty())
        .cloned()
        .unwrap_or_else(|| "None".into());
    Some(Decision { verdict, analysis })
}

/// One repair attempt, then Fix with [`UNPARSEABLE_JUDGMENT`].
pub fn judge_execution(
    task_prompt: &str,
    data_prompt: &str,
    code: &str,
    stdout: &str,
    stderr: &str,
    gateway: &Gateway,
    planner: &RoleSettings,
) -> Result<Decision, LlmError> {
    let prompt = prompts::execution_judgment(task_prompt, data_prompt, code, stdout, stderr);
    let first = gateway.ask(planner, "executer", &prompt)?;
    if let Some(d) = parse_decision(&first) {
        return Ok(d);
    }
    let repair = format!("{prompt}{}", prompts::format_repair(&["DECISION:", "ANALYSIS:"]));
    let second = gateway.ask(planner, "executer", &repair)?;
    Ok(parse_decision(&second).unwrap_or(Decision {
        verdict: Verdict::Fix,
        analysis: UNPARSEABLE_JUDGMENT.into(),
    }))
}

#[derive(Debug, Clone)]
pub struct LoopSettings {
    pub max_iterations: usize,
    pub per_execution_timeout: Duration,
    /// Overall budget across iterations.
    pub wall_limit: Option<Duration>,
    pub max_error_message_length: usize,
    pub max_user_input_length: usize,
    pub max_num_tutorials: usize,
    pub create_venv: bool,
    pub install_packages: bool,
    pub episodic_mode: EpisodicMode,
    pub multi_turn: bool,
    pub semantic_enabled: bool,
    pub index_mode: IndexMode,
    pub coder: RoleSettings,
    pub planner: RoleSettings,
}

impl LoopSettings {
    pub fn from_config(cfg: &KernelConfig) -> Self {
        let multi_turn = cfg.multi_turn_coder();
        Self {
            max_iterations: cfg.max_iterations,
            per_execution_timeout: Duration::from_secs(cfg.per_execution_timeout),
            wall_limit: None,
            max_error_message_length: cfg.max_error_message_length,
            max_user_input_length: cfg.max_user_input_length,
            max_num_tutorials: cfg.max_num_tutorials,
            create_venv: cfg.create_venv,
            install_packages: cfg.install_packages,
            episodic_mode: if multi_turn {
                EpisodicMode::MultiTurn
            } else {
                cfg.episodic_memory.mode
            },
            multi_turn,
            semantic_enabled: cfg.semantic_memory.enabled,
            index_mode: cfg.semantic_memory.index_mode,
            coder: cfg.role(Role::Coder),
            planner: cfg.role(Role::Planner),
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub success: bool,
    pub iterations_used: usize,
    pub results_path: Option<PathBuf>,
    pub store: EpisodicStore,
    pub usage: TokenUsage,
    pub wall_limit_reached: bool,
}

/// First regular file named `results.*` directly under `dir`.
pub fn find_results_file(dir: &Path) -> Option<PathBuf> {
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_stem().is_some_and(|s| s == "results") && p.extension().is_some())
        .collect();
    found.sort();
    found.into_iter().next()
}

fn write(path: &Path, text: &str) -> Result<(), LoopError> {
    std::fs::write(path, text).map_err(|source| LoopError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn extract_or_raw(text: &str, tags: &[&str]) -> String {
    for tag in tags {
        if let Ok(block) = extract_fenced_block(text, tag) {
            return block;
        }
    }
    tracing::warn!(tag = tags[0], "no fenced block in coder response; using raw text");
    text.trim().to_string()
}

pub fn run_iterative_loop(
    ctx: &PerceptionContext,
    kb: &[KnowledgeDocument],
    user_input: &str,
    settings: &LoopSettings,
    gateway: &Gateway,
    sandbox: &Sandbox,
) -> Result<RunOutcome, LoopError> {
    let start = Instant::now();
    let ws = sandbox.workspace();
    let output_folder = ws.root().to_string_lossy().into_owned();
    let mut store = EpisodicStore::with_journal(&ws.root().join("episodic.jsonl"))?;
    let user_input = truncate_chars(user_input, settings.max_user_input_length);
    let cap = settings.max_error_message_length;
    let mode = settings.episodic_mode;
    let tool = &ctx.selected_tool;
    let mut conversation: Vec<(Speaker, String)> = Vec::new();
    let mut success = false;
    let mut results_path = None;
    let mut wall_limit_reached = false;

    for t in 0..settings.max_iterations {
        let remaining = match settings.wall_limit {
            Some(limit) => match limit.checked_sub(start.elapsed()) {
                Some(r) if !r.is_zero() => Some(r),
                _ => {
                    wall_limit_reached = true;
                    break;
                }
            },
            None => None,
        };
        let prev = store.last().cloned();
        let error_block = error_context_for(&store, t, mode, cap);
        let prev_error = prev
            .as_ref()
            .map(|p| truncate_middle(&p.error_message, cap))
            .unwrap_or_default();

        let retrieved = if settings.semantic_enabled && (!settings.multi_turn || t == 0) {
            let query = RetrievalQuery {
                task_prompt: &ctx.task_description,
                data_prompt: &ctx.data_prompt,
                user_prompt: &user_input,
                error_prompt: &error_block,
                max_num_tutorials: settings.max_num_tutorials,
            };
            retrieve_documents(&query, kb, settings.index_mode, gateway, &settings.planner)?
        } else {
            Vec::new()
        };
        let retrieved_text = render_retrieved(&retrieved);

        let response = if settings.multi_turn && t > 0 {
            conversation.push((Speaker::User, prompts::multi_turn_followup(&prev_error)));
            gateway
                .complete(&LlmRequest::conversation(
                    &settings.coder,
                    "python_coder",
                    conversation.clone(),
                ))?
                .text
        } else {
            let prompt = prompts::solution_code(&SolutionPrompt {
                tool_name: &tool.name,
                output_folder: &output_folder,
                tool_prompt: &tool.tool_prompt(),
                task_description: &ctx.task_description,
                data_prompt: &ctx.data_prompt,
                user_input: &user_input,
                error_block: &error_block,
                retrieved_docs: &retrieved_text,
            });
            if settings.multi_turn {
                conversation.push((Speaker::User, prompt.clone()));
            }
            gateway.ask(&settings.coder, "python_coder", &prompt)?
        };
        if settings.multi_turn {
            conversation.push((Speaker::Assistant, response.clone()));
        }
        let code = extract_or_raw(&response, &["python", "py"]);

        let dir = ws.iteration_dir(t)?;
        let paths = IterationPaths {
            code: dir.join(format!("generated_code_{t}.py")),
            script: dir.join(format!("run_{t}.sh")),
            stdout: dir.join(format!("stdout_{t}.log")),
            stderr: dir.join(format!("stderr_{t}.log")),
        };
        write(&paths.code, &code)?;

        let code_path = paths.code.to_string_lossy().into_owned();
        let shell_prompt = prompts::shell_script(&ShellPrompt {
            env: ShellEnv {
                create_venv: settings.create_venv,
                install_packages: settings.install_packages,
            },
            output_folder: &output_folder,
            python_file_path: &code_path,
            current_python: &code,
            error_message: &prev_error,
            previous_bash: prev.as_ref().map(|p| p.shell_script.as_str()).unwrap_or(""),
            previous_python: prev.as_ref().map(|p| p.solution_code.as_str()).unwrap_or(""),
        });
        let script = extract_or_raw(
            &gateway.ask(&settings.coder, "bash_coder", &shell_prompt)?,
            &["bash", "sh"],
        );

        let timeout = remaining.map_or(settings.per_execution_timeout, |r| {
            r.min(settings.per_execution_timeout)
        });
        let exec = sandbox.execute_shell_script(&ScriptJob {
            script: &script,
            script_path: paths.script.clone(),
            stdout_log: Some(paths.stdout.clone()),
            stderr_log: Some(paths.stderr.clone()),
            timeout,
        })?;

        let judged = judge_execution(
            &ctx.task_description,
            &ctx.data_prompt,
            &code,
            &exec.stdout,
            &exec.stderr,
            gateway,
            &settings.planner,
        )?;
        let mut decision = judged.clone();
        if exec.return_code != 0 {
            decision.verdict = Verdict::Fix;
        }
        let results = find_results_file(ws.root());
        if decision.verdict == Verdict::Finish && results.is_none() {
            decision = Decision {
                verdict: Verdict::Fix,
                analysis: NO_RESULTS_FILE.into(),
            };
        }

        let error_message = if exec.stderr.trim().is_empty() {
            decision.analysis.clone()
        } else {
            exec.stderr.clone()
        };
        let error_context = if decision.verdict == Verdict::Fix {
            analyze_error(
                &AnalysisInput {
                    task_prompt: &ctx.task_description,
                    data_prompt: &ctx.data_prompt,
                    user_prompt: &user_input,
                    code: &code,
                    shell_script: &script,
                    retrieved_text: &retrieved_text,
                    error_message: &truncate_middle(&error_message, cap),
                },
                mode,
                gateway,
                &settings.planner,
            )?
        } else {
            None
        };

        let finished = decision.verdict == Verdict::Finish;
        store.record_iteration(IterationRecord {
            t,
            solution_code: code,
            shell_script: script,
            stdout: exec.stdout,
            stderr: exec.stderr,
            return_code: exec.return_code,
            wall_seconds: exec.wall_seconds,
            retrieved_titles: retrieved.iter().map(|d| d.title.clone()).collect(),
            error_message,
            error_context,
            executer_analysis: decision.analysis,
            verdict: decision.verdict,
            paths,
        })?;
        tracing::info!(t, return_code = exec.return_code, finished, "iteration complete");
        if finished {
            success = true;
            results_path = results;
            break;
        }
    }

    Ok(RunOutcome {
        success,
        iterations_used: store.len(),
        results_path,
        store,
        usage: gateway.usage(),
        wall_limit_reached,
    })
}
