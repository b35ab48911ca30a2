//! Child-process execution of generated scripts.
//!
//! Scripts run in their own process group with the workspace as working
//! directory. On timeout the whole group receives SIGTERM, then SIGKILL after
//! a grace period. Full logs go to disk; returned streams are truncated for
//! prompt use.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::text::truncate_middle;

pub const TIMEOUT_CODE: i32 = -1;
pub const SPAWN_FAILURE_CODE: i32 = -2;

/// Environment variables never passed to children.
pub fn is_secret_var(name: &str) -> bool {
    name.starts_with("MLZERO_") || name.ends_with("_API_KEY")
}

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("cannot prepare workspace {path}: {source}")]
    Workspace { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    /// Child exit code; `-1` on timeout, `-2` on spawn failure, `128+n` when killed by signal `n`.
    pub return_code: i32,
    pub stdout: String,
    pub stderr: String,
    pub wall_seconds: f64,
    pub timed_out: bool,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn iterations_dir(&self) -> PathBuf {
        self.root.join("iterations")
    }

    /// `iterations/<t>/`, created on demand.
    pub fn iteration_dir(&self, t: usize) -> Result<PathBuf, SandboxError> {
        let dir = self.iterations_dir().join(t.to_string());
        std::fs::create_dir_all(&dir).map_err(|source| SandboxError::Workspace {
            path: dir.clone(),
            source,
        })?;
        Ok(dir)
    }
}

/// Creates `output_folder` and its `iterations/` subdirectory, keeping existing files.
pub fn prepare_workspace(output_folder: &Path) -> Result<Workspace, SandboxError> {
    let err = |source| SandboxError::Workspace {
        path: output_folder.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(output_folder.join("iterations")).map_err(err)?;
    let root = output_folder.canonicalize().map_err(err)?;
    Ok(Workspace { root })
}

#[derive(Debug, Clone)]
pub struct SandboxSettings {
    pub max_stdout_length: usize,
    pub max_stderr_length: usize,
    pub stream_output: bool,
    pub command_prefix: Vec<String>,
    pub kill_grace: Duration,
}

impl Default for SandboxSettings {
    fn default() -> Self {
        Self {
            max_stdout_length: 8192,
            max_stderr_length: 2048,
            stream_output: false,
            command_prefix: Vec::new(),
            kill_grace: Duration::from_secs(10),
        }
    }
}

impl SandboxSettings {
    pub fn from_config(cfg: &crate::KernelConfig) -> Self {
        Self {
            max_stdout_length: cfg.max_stdout_length(),
            max_stderr_length: cfg.max_stderr_length(),
            stream_output: cfg.stream_output,
            command_prefix: cfg.sandbox.command_prefix.clone(),
            kill_grace: Duration::from_secs(cfg.sandbox.kill_grace_seconds),
        }
    }
}

/// One script to run.
#[derive(Debug, Clone)]
pub struct ScriptJob<'a> {
    pub script: &'a str,
    pub script_path: PathBuf,
    pub stdout_log: Option<PathBuf>,
    pub stderr_log: Option<PathBuf>,
    pub timeout: Duration,
}

#[derive(Debug, Clone)]
pub struct Sandbox {
    workspace: Workspace,
    settings: SandboxSettings,
}

impl Sandbox {
    pub fn new(workspace: Workspace, settings: SandboxSettings) -> Self {
        Self { workspace, settings }
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn settings(&self) -> &SandboxSettings {
        &self.settings
    }

    /// Writes the script, runs it and returns truncated streams.
    pub fn execute_shell_script(&self, job: &ScriptJob<'_>) -> Result<ExecutionResult, SandboxError> {
        write_file(&job.script_path, job.script.as_bytes())?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let _ = std::fs::set_permissions(&job.script_path, std::fs::Permissions::from_mode(0o755));
        }

        let mut argv: Vec<String> = self.settings.command_prefix.clone();
        if !job.script.starts_with("#!") {
            argv.push("bash".into());
        }
        argv.push(job.script_path.to_string_lossy().into_owned());

        let raw = run_process(&argv, self.workspace.root(), job.timeout, &self.settings);
        if let Some(path) = &job.stdout_log {
            write_file(path, &raw.stdout)?;
        }
        if let Some(path) = &job.stderr_log {
            write_file(path, &raw.stderr)?;
        }
        let mut stderr = String::from_utf8_lossy(&raw.stderr).into_owned();
        if raw.timed_out {
            if !stderr.is_empty() && !stderr.ends_with('\n') {
                stderr.push('\n');
            }
            stderr.push_str(&format!(
                "Execution timed out after {} seconds",
                job.timeout.as_secs_f64()
            ));
        }
        Ok(ExecutionResult {
            return_code: raw.return_code,
            stdout: truncate_middle(&String::from_utf8_lossy(&raw.stdout), self.settings.max_stdout_length),
            stderr: truncate_middle(&stderr, self.settings.max_stderr_length),
            wall_seconds: raw.wall_seconds,
            timed_out: raw.timed_out,
        })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), SandboxError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| SandboxError::Write {
            path: path.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| SandboxError::Write {
        path: path.to_path_buf(),
        source,
    })
}

struct RawOutcome {
    return_code: i32,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    wall_seconds: f64,
    timed_out: bool,
}

fn child_env() -> Vec<(String, String)> {
    std::env::vars().filter(|(k, _)| !is_secret_var(k)).collect()
}

fn pump<R: Read + Send + 'static>(
    mut source: R,
    sink: Arc<Mutex<Vec<u8>>>,
    echo: Option<fn(&[u8])>,
) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        let mut buf = [0u8; 8192];
        loop {
            match source.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    if let Some(echo) = echo {
                        echo(&buf[..n]);
                    }
                    sink.lock().expect("capture lock").extend_from_slice(&buf[..n]);
                }
            }
        }
    })
}

fn echo_stdout(bytes: &[u8]) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(bytes);
    let _ = out.flush();
}

fn echo_stderr(bytes: &[u8]) {
    let _ = std::io::stderr().lock().write_all(bytes);
}

#[cfg(unix)]
fn signal_group(pgid: u32, signal: i32) {
    // SAFETY: killpg only sends a signal; an invalid group yields ESRCH.
    unsafe {
        libc::killpg(pgid as libc::pid_t, signal);
    }
}

fn run_process(argv: &[String], cwd: &Path, timeout: Duration, settings: &SandboxSettings) -> RawOutcome {
    let start = Instant::now();
    let mut command = Command::new(&argv[0]);
    command
        .args(&argv[1..])
        .current_dir(cwd)
        .env_clear()
        .envs(child_env())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        command.process_group(0);
    }

    let mut child = match command.spawn() {
        Ok(child) => child,
        Err(e) => {
            return RawOutcome {
                return_code: SPAWN_FAILURE_CODE,
                stdout: Vec::new(),
                stderr: format!("failed to spawn `{}`: {e}", argv.join(" ")).into_bytes(),
                wall_seconds: start.elapsed().as_secs_f64(),
                timed_out: false,
            };
        }
    };

    let out_buf = Arc::new(Mutex::new(Vec::new()));
    let err_buf = Arc::new(Mutex::new(Vec::new()));
    type Echo = Option<fn(&[u8])>;
    let (echo_out, echo_err): (Echo, Echo) = if settings.stream_output {
        (Some(echo_stdout), Some(echo_stderr))
    } else {
        (None, None)
    };
    let readers = [
        pump(child.stdout.take().expect("piped stdout"), out_buf.clone(), echo_out),
        pump(child.stderr.take().expect("piped stderr"), err_buf.clone(), echo_err),
    ];

    #[cfg(unix)]
    let pgid = child.id();
    let poll = Duration::from_millis(10);
    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {}
            Err(_) => break None,
        }
        if start.elapsed() >= timeout {
            timed_out = true;
            #[cfg(unix)]
            {
                signal_group(pgid, libc::SIGTERM);
                let deadline = Instant::now() + settings.kill_grace;
                let mut exited = None;
                while Instant::now() < deadline {
                    if let Ok(Some(status)) = child.try_wait() {
                        exited = Some(status);
                        break;
                    }
                    thread::sleep(poll);
                }
                if exited.is_none() {
                    signal_group(pgid, libc::SIGKILL);
                }
            }
            let _ = child.kill();
            break child.wait().ok();
        }
        thread::sleep(poll);
    };
    // Sweep any descendants left in the group so none outlive the run.
    #[cfg(unix)]
    signal_group(pgid, libc::SIGKILL);
    for reader in readers {
        let _ = reader.join();
    }

    let return_code = if timed_out {
        TIMEOUT_CODE
    } else {
        status.map(exit_code).unwrap_or(SPAWN_FAILURE_CODE)
    };
    let stdout = std::mem::take(&mut *out_buf.lock().expect("capture lock"));
    let stderr = std::mem::take(&mut *err_buf.lock().expect("capture lock"));
    RawOutcome {
        return_code,
        stdout,
        stderr,
        wall_seconds: start.elapsed().as_secs_f64(),
        timed_out,
    }
}

fn exit_code(status: std::process::ExitStatus) -> i32 {
    if let Some(code) = status.code() {
        return code;
    }
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        if let Some(sig) = status.signal() {
            return 128 + sig;
        }
    }
    SPAWN_FAILURE_CODE
}
