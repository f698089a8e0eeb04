//! Compiling and simulating candidate modules with an external toolchain.
//!
//! The subprocess contract is the Icarus one:
//!
//! ```text
//! <compiler_command> -o <artifact> module.v tb.v
//! <runtime_command> <artifact>
//! ```
//!
//! Any toolchain that honours it can be plugged in through
//! [`ToolchainConfig`]; `tools/` in the repository carries a Verilator
//! wrapper that does.

mod process;
mod report;

use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

pub use report::{parse_sim_output, MismatchRecord, ReportError, SimReport};
pub(crate) use report::{classify_line, LineKind};

pub const MODULE_FILE: &str = "module.v";
pub const TESTBENCH_FILE: &str = "tb.v";
pub const ARTIFACT_FILE: &str = "simv";

/// Shell convention for "command not found"; wrapper scripts use it when the
/// tool they front is missing.
const EXIT_COMMAND_NOT_FOUND: i32 = 127;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolchainConfig {
    pub compiler_command: String,
    pub runtime_command: String,
    pub compile_timeout: Duration,
    pub sim_timeout: Duration,
    pub workdir_root: PathBuf,
}

impl ToolchainConfig {
    pub fn new(workdir_root: impl Into<PathBuf>) -> Self {
        Self {
            compiler_command: "iverilog".into(),
            runtime_command: "vvp".into(),
            compile_timeout: Duration::from_secs(60),
            sim_timeout: Duration::from_secs(60),
            workdir_root: workdir_root.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ToolchainError> {
        if self.compiler_command.trim().is_empty() || self.runtime_command.trim().is_empty() {
            return Err(ToolchainError::InvalidConfig("commands must not be empty".into()));
        }
        if self.compile_timeout.is_zero() || self.sim_timeout.is_zero() {
            return Err(ToolchainError::InvalidConfig("timeouts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileOutcome {
    pub success: bool,
    /// Compiler stdout and stderr, interleaved.
    pub diagnostics: String,
    /// Present iff `success`. Not serialized: it points into a scratch
    /// directory that does not outlive the attempt.
    #[serde(skip)]
    pub artifact: Option<PathBuf>,
    #[serde(default)]
    pub timed_out: bool,
}

#[derive(Debug, Error)]
pub enum ToolchainError {
    #[error("tool not found: {command}")]
    ToolNotFound { command: String },
    #[error("invalid toolchain configuration: {0}")]
    InvalidConfig(String),
    #[error("working directory {0} already exists")]
    WorkdirExists(PathBuf),
    #[error("invalid attempt id {0:?}")]
    InvalidAttemptId(String),
    #[error("simulation timed out after {after:?}")]
    SimTimeout { after: Duration, partial_output: String },
    #[error("simulator exited with {status} and no summary line")]
    RuntimeCrash { status: String, output: String },
    #[error("simulation output has no summary line")]
    NoSummary { output: String },
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl ToolchainError {
    /// Configuration faults abort a run; the rest describe the candidate.
    pub fn is_config_fault(&self) -> bool {
        matches!(
            self,
            ToolchainError::ToolNotFound { .. } | ToolchainError::InvalidConfig(_)
        )
    }
}

/// Compile + simulate interface used by the feedback loop.
pub trait HdlToolchain: Send + Sync {
    fn compile(
        &self,
        module_source: &str,
        testbench_source: &str,
        attempt_id: &str,
    ) -> Result<CompileOutcome, ToolchainError>;

    fn simulate(&self, artifact: &Path) -> Result<SimReport, ToolchainError>;
}

/// [`HdlToolchain`] backed by external processes.
#[derive(Debug, Clone)]
pub struct SubprocessToolchain {
    pub config: ToolchainConfig,
}

impl SubprocessToolchain {
    pub fn new(config: ToolchainConfig) -> Result<Self, ToolchainError> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl HdlToolchain for SubprocessToolchain {
    fn compile(
        &self,
        module_source: &str,
        testbench_source: &str,
        attempt_id: &str,
    ) -> Result<CompileOutcome, ToolchainError> {
        compile(module_source, testbench_source, &self.config, attempt_id)
    }

    fn simulate(&self, artifact: &Path) -> Result<SimReport, ToolchainError> {
        simulate(artifact, &self.config)
    }
}

fn split_command(command: &str) -> Result<(&str, Vec<&str>), ToolchainError> {
    let mut parts = command.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| ToolchainError::InvalidConfig("empty command".into()))?;
    Ok((program, parts.collect()))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ToolchainError + '_ {
    move |source| ToolchainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_attempt_id(attempt_id: &str) -> Result<(), ToolchainError> {
    let path = Path::new(attempt_id);
    let ok = !attempt_id.is_empty()
        && path
            .components()
            .all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(ToolchainError::InvalidAttemptId(attempt_id.to_string()))
    }
}

fn exec(
    command: &str,
    extra_args: &[&str],
    cwd: &Path,
    timeout: Duration,
) -> Result<process::ProcessOutput, ToolchainError> {
    let (program, mut args) = split_command(command)?;
    args.extend_from_slice(extra_args);
    debug!(program, ?args, cwd = %cwd.display(), "spawning");
    let out = process::run(program, &args, cwd, timeout).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied => ToolchainError::ToolNotFound {
            command: program.to_string(),
        },
        _ => ToolchainError::Io {
            path: PathBuf::from(program),
            source: e,
        },
    })?;
    if out.status.and_then(|s| s.code()) == Some(EXIT_COMMAND_NOT_FOUND) {
        return Err(ToolchainError::ToolNotFound {
            command: format!("{program}: {}", out.output.trim()),
        });
    }
    Ok(out)
}

/// Write both sources into a fresh `workdir_root/attempt_id/` and run the
/// compiler there. A compile timeout is a failed [`CompileOutcome`], not an
/// error.
pub fn compile(
    module_source: &str,
    testbench_source: &str,
    config: &ToolchainConfig,
    attempt_id: &str,
) -> Result<CompileOutcome, ToolchainError> {
    check_attempt_id(attempt_id)?;
    let dir = config.workdir_root.join(attempt_id);
    if dir.exists() {
        return Err(ToolchainError::WorkdirExists(dir));
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let module_path = dir.join(MODULE_FILE);
    fs::write(&module_path, module_source).map_err(io_err(&module_path))?;
    let tb_path = dir.join(TESTBENCH_FILE);
    fs::write(&tb_path, testbench_source).map_err(io_err(&tb_path))?;

    let out = exec(
        &config.compiler_command,
        &["-o", ARTIFACT_FILE, MODULE_FILE, TESTBENCH_FILE],
        &dir,
        config.compile_timeout,
    )?;
    if out.timed_out {
        let mut diagnostics = format!(
            "compilation timed out after {}",
            humanize(config.compile_timeout)
        );
        if !out.output.trim().is_empty() {
            diagnostics = format!("{}\n{diagnostics}", out.output.trim_end());
        }
        return Ok(CompileOutcome {
            success: false,
            diagnostics,
            artifact: None,
            timed_out: true,
        });
    }
    let success = out.status.is_some_and(|s| s.success());
    Ok(CompileOutcome {
        success,
        diagnostics: out.output,
        artifact: success.then(|| dir.join(ARTIFACT_FILE)),
        timed_out: false,
    })
}

/// Run a compiled artifact and parse its output. The summary line is
/// authoritative: a nonzero exit with a parseable summary is still a report.
pub fn simulate(artifact: &Path, config: &ToolchainConfig) -> Result<SimReport, ToolchainError> {
    let dir = artifact
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = artifact
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| ToolchainError::Io {
            path: artifact.to_path_buf(),
            source: io::Error::new(io::ErrorKind::InvalidInput, "artifact has no file name"),
        })?;
    if !artifact.exists() {
        return Err(ToolchainError::Io {
            path: artifact.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "artifact does not exist"),
        });
    }
    let out = exec(&config.runtime_command, &[name], dir, config.sim_timeout)?;
    if out.timed_out {
        return Err(ToolchainError::SimTimeout {
            after: config.sim_timeout,
            partial_output: out.output,
        });
    }
    match parse_sim_output(&out.output) {
        Ok(report) => Ok(report),
        Err(ReportError::NoSummary) => match out.status {
            Some(status) if !status.success() => Err(ToolchainError::RuntimeCrash {
                status: status.to_string(),
                output: out.output,
            }),
            _ => Err(ToolchainError::NoSummary { output: out.output }),
        },
    }
}

pub(crate) fn humanize(d: Duration) -> String {
    if d.subsec_millis() == 0 {
        format!("{}s", d.as_secs())
    } else {
        format!("{:.3}s", d.as_secs_f64())
    }
}
