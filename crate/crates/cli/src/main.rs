use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use hdlloop_core::harness::{self, ExperimentPlan, SuiteReport};
use hdlloop_core::llm::{CostLedger, ModelClient, ModelRegistry};
use hdlloop_core::{
    ledger_cost, load_corpus, load_problem, run_attempt, ChatModel, ContextStrategy, LoopConfig,
    ModelConfig, OutcomeClass, SubprocessToolchain, ToolchainConfig,
};

const DEFAULT_MODELS: &str = include_str!("../../../config/models.toml");

const EXIT_FAULT: u8 = 1;
const EXIT_DESIGN_FAILED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_CONFIG: u8 = 78;

/// Feedback-driven Verilog generation: prompt a model, compile and simulate
/// its module, feed the errors back, repeat.
#[derive(Parser)]
#[command(name = "hdlloop", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Model definitions (TOML, `[[model]]` tables). Defaults to the built-in set.
    #[arg(long, global = true, env = "HDLLOOP_MODELS")]
    models: Option<PathBuf>,
    /// Directory holding script sets for `scripted:<name>` models.
    #[arg(long, global = true, env = "HDLLOOP_SCRIPTS", default_value = "scripts")]
    scripts: PathBuf,
    /// Compiler command, invoked as `<compiler> -o <artifact> module.v tb.v`.
    #[arg(long, global = true, env = "HDLLOOP_COMPILER", default_value = "iverilog")]
    compiler: String,
    /// Simulator command, invoked as `<runtime> <artifact>`.
    #[arg(long, global = true, env = "HDLLOOP_RUNTIME", default_value = "vvp")]
    runtime: String,
}

#[derive(Args)]
struct LoopArgs {
    /// Model driving the loop (a name from the model file, or `scripted:<set>`).
    #[arg(long)]
    model: String,
    /// Model queried once if the small model has not passed after all iterations.
    #[arg(long)]
    big_model: Option<String>,
    /// Feedback rounds after the first generation.
    #[arg(long, default_value_t = 10)]
    iterations: u32,
    /// `succinct` (system, design, last response, last feedback) or `full`.
    #[arg(long, default_value = "succinct")]
    context: ContextStrategy,
    /// Limit in seconds for each compile and each simulation.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
}

#[derive(Subcommand)]
enum Command {
    /// One attempt at one problem.
    Run {
        /// Problem directory (prompt.v, tb.v, meta).
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        loop_args: LoopArgs,
        /// Write the attempt trace to `<out>/trace.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated attempts at every problem of a corpus, with Pass@k and reports.
    Suite {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        loop_args: LoopArgs,
        /// Attempts per problem.
        #[arg(long, default_value_t = 5)]
        runs: u32,
        /// Pass@k values to report.
        #[arg(long, value_delimiter = ',', default_value = "1,5")]
        k: Vec<u32>,
        /// Attempts run concurrently.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Output directory for plan, traces and reports.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Load and check every problem of a corpus.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Recompute a suite report from stored traces.
    Report {
        /// A suite output directory (or its `traces/` subdirectory).
        #[arg(long)]
        traces: PathBuf,
        /// Write report.json and report.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Classify<T> {
    fn fault(self) -> Result<T, Failure>;
    fn config_fault(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn fault(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: EXIT_FAULT, error: e.into() })
    }
    fn config_fault(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: EXIT_CONFIG, error: e.into() })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    let common = cli.common;
    match cli.command {
        Command::Run { problem, loop_args, out } => cmd_run(&common, &problem, &loop_args, out.as_deref()),
        Command::Suite { corpus, loop_args, runs, k, parallel, out } => {
            cmd_suite(&common, &corpus, &loop_args, runs, k, parallel, &out)
        }
        Command::Validate { corpus } => cmd_validate(&corpus),
        Command::Report { traces, out } => cmd_report(&traces, out.as_deref()),
    }
}

fn registry(common: &Common) -> Result<ModelRegistry, Failure> {
    match &common.models {
        Some(path) => ModelRegistry::load(path).config_fault(),
        None => ModelRegistry::from_toml_str(DEFAULT_MODELS).config_fault(),
    }
}

fn loop_config(common: &Common, args: &LoopArgs) -> Result<LoopConfig, Failure> {
    let reg = registry(common)?;
    let model = reg.resolve(&args.model, &common.scripts).config_fault()?;
    let big_model = match &args.big_model {
        Some(name) => Some(reg.resolve(name, &common.scripts).config_fault()?),
        None => None,
    };
    let config = LoopConfig {
        model,
        big_model,
        max_iterations: args.iterations,
        strategy: args.context,
    };
    config.validate().map_err(|e| anyhow!(e)).config_fault()?;
    Ok(config)
}

fn toolchain(common: &Common, timeout: u64, root: &Path) -> Result<SubprocessToolchain, Failure> {
    if timeout == 0 {
        return Err(anyhow!("--timeout must be positive")).config_fault();
    }
    let config = ToolchainConfig {
        compiler_command: common.compiler.clone(),
        runtime_command: common.runtime.clone(),
        compile_timeout: Duration::from_secs(timeout),
        sim_timeout: Duration::from_secs(timeout),
        workdir_root: root.to_path_buf(),
    };
    SubprocessToolchain::new(config).config_fault()
}

fn scratch() -> Result<tempfile::TempDir, Failure> {
    tempfile::Builder::new()
        .prefix("hdlloop-")
        .tempdir()
        .context("creating scratch directory")
        .fault()
}

fn client(model: &ModelConfig, problem: &str, ledger: &Arc<CostLedger>) -> Result<ModelClient, Failure> {
    ModelClient::for_problem(model, problem, ledger.clone()).map_err(|e| {
        let code = if e.is_config_fault() { EXIT_CONFIG } else { EXIT_FAULT };
        Failure { code, error: e.into() }
    })
}

fn cmd_run(common: &Common, problem_dir: &Path, args: &LoopArgs, out: Option<&Path>) -> Result<u8, Failure> {
    let config = loop_config(common, args)?;
    let problem = load_problem(problem_dir)
        .with_context(|| format!("loading {}", problem_dir.display()))
        .fault()?;
    let work = scratch()?;
    let tools = toolchain(common, args.timeout, work.path())?;
    let ledger = Arc::new(CostLedger::new());
    let mut small = client(&config.model, &problem.id, &ledger)?;
    let mut big = match &config.big_model {
        Some(b) => Some(client(b, &problem.id, &ledger)?),
        None => None,
    };

    let result = run_attempt(
        &problem,
        &config,
        &tools,
        &mut small,
        big.as_mut().map(|b| b as &mut dyn ChatModel),
        &problem.id,
    );
    let (trace, failure) = match result {
        Ok(trace) => (trace, None),
        Err(e) => {
            let code = if e.is_config_fault() { EXIT_CONFIG } else { EXIT_FAULT };
            let trace = e.trace().cloned();
            let failure = Failure { code, error: e.into() };
            match trace {
                Some(t) => (t, Some(failure)),
                None => return Err(failure),
            }
        }
    };

    for r in &trace.iterations {
        let detail = match (&r.sim, &r.compile) {
            (Some(sim), _) => match sim.report() {
                Some(rep) => format!("{} / {} mismatches", rep.mismatch_count, rep.total_tests),
                None => "simulation did not finish".into(),
            },
            (None, Some(_)) => "compile failed".into(),
            (None, None) => "no module in response".into(),
        };
        println!(
            "iteration {:>2}  {:<16} {:<15} {}",
            r.index,
            r.model_used,
            r.outcome_class.as_str(),
            detail
        );
    }
    for m in std::iter::once(&config.model).chain(config.big_model.as_ref()) {
        let u = ledger.usage(&m.name);
        if u.calls > 0 {
            println!(
                "{}: {} calls, {} input + {} output tokens, {}",
                m.name,
                u.calls,
                u.input_tokens,
                u.output_tokens,
                ledger_cost(&ledger, m)
            );
        }
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)
            .and_then(|_| {
                let mut text = serde_json::to_string_pretty(&trace).expect("trace serializes");
                text.push('\n');
                fs::write(dir.join("trace.json"), text)
            })
            .with_context(|| format!("writing trace to {}", dir.display()))
            .fault()?;
    }
    if let Some(f) = failure {
        return Err(f);
    }
    let class = trace.final_class.map_or("none", OutcomeClass::as_str);
    println!("result: {class} after {} iteration(s)", trace.iterations_used);
    Ok(if trace.is_success() { 0 } else { EXIT_DESIGN_FAILED })
}

fn print_report(report: &SuiteReport) {
    println!("fingerprint {}", report.fingerprint);
    for p in &report.problems {
        println!(
            "{:<24} runs {:>2}  successes {:>2}  best {}",
            p.id,
            p.runs_counted,
            p.successes,
            p.best_class.map_or("none", OutcomeClass::as_str)
        );
    }
    let pass: Vec<String> = report
        .pass_at_k
        .iter()
        .map(|(k, v)| format!("pass@{k} {v:.2}%"))
        .collect();
    println!("{}", pass.join("  "));
    for (label, pct) in [
        ("by problem", &report.class_percentages.by_problem),
        ("by test case", &report.class_percentages.by_testcase),
    ] {
        println!(
            "best-run classes ({label}): Success {:.2}%  SimulationError {:.2}%  CompileError {:.2}%",
            pct.success, pct.simulation_error, pct.compile_error
        );
    }
    for (model, e) in &report.ledger {
        println!(
            "{model}: {} calls, {} input + {} output tokens, ${:.6}",
            e.calls,
            e.input_tokens,
            e.output_tokens,
            e.dollars.as_f64()
        );
    }
    if !report.unclassified_problems.is_empty() {
        println!("unclassified: {}", report.unclassified_problems.join(", "));
    }
}

fn harness_failure(e: harness::HarnessError) -> Failure {
    let code = if e.is_config_fault() { EXIT_CONFIG } else { EXIT_FAULT };
    Failure { code, error: e.into() }
}

fn cmd_suite(
    common: &Common,
    corpus: &Path,
    args: &LoopArgs,
    runs: u32,
    k: Vec<u32>,
    parallel: usize,
    out: &Path,
) -> Result<u8, Failure> {
    let config = loop_config(common, args)?;
    let work = scratch()?;
    let tools = toolchain(common, args.timeout, work.path())?;
    let plan = ExperimentPlan {
        corpus_root: corpus.to_path_buf(),
        config,
        runs_per_problem: runs,
        k_values: k,
        parallelism: parallel,
        out_dir: out.to_path_buf(),
    };
    plan.validate().map_err(|e| Failure { code: EXIT_USAGE, error: e.into() })?;
    let report = harness::run_suite(&plan, &tools).map_err(harness_failure)?;
    print_report(&report);
    println!("wrote {}", out.display());
    Ok(0)
}

fn cmd_validate(corpus: &Path) -> Result<u8, Failure> {
    let loaded = load_corpus(corpus).fault()?;
    for p in &loaded.problems {
        println!(
            "ok       {:<24} {}/{}  top {}",
            p.id, p.category_major, p.category_minor, p.top_module_name
        );
    }
    for (path, e) in &loaded.errors {
        println!("invalid  {}: {e}", path.display());
    }
    println!("{} valid, {} invalid", loaded.problems.len(), loaded.errors.len());
    Ok(if loaded.errors.is_empty() { 0 } else { EXIT_FAULT })
}

fn cmd_report(traces: &Path, out: Option<&Path>) -> Result<u8, Failure> {
    let dir = if traces.join(harness::PLAN_FILE).exists() {
        traces.to_path_buf()
    } else {
        match traces.parent() {
            Some(parent) if parent.join(harness::PLAN_FILE).exists() => parent.to_path_buf(),
            _ => {
                return Err(anyhow!("no {} found in or above {}", harness::PLAN_FILE, traces.display())).fault();
            }
        }
    };
    let report = harness::report_from_dir(&dir).map_err(harness_failure)?;
    if let Some(out) = out {
        harness::write_report(out, &report).map_err(harness_failure)?;
    }
    print_report(&report);
    Ok(0)
}
