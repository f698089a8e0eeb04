//! Multi-run experiments over a corpus, Pass@k and report files.
//!
//! Output layout under the plan's output directory:
//!
//! ```text
//! plan.json                 plan record (config, problems, fingerprint)
//! traces/<problem>/<run>.json
//! report.json               SuiteReport
//! report.csv                one row per (problem, run)
//! ```

mod aggregate;
mod passk;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::{info, warn};

pub use aggregate::{
    aggregate, classify_best, trace_usage, CategoryRollup, ClassBreakdown, ClassPercentages,
    LedgerEntry, PlanRecord, PlannedProblem, ProblemSummary, RunDistribution, RunSummary,
    SuiteReport, SCHEMA_VERSION,
};
pub use passk::{pass_at_k, DomainError};

use crate::corpus::{load_corpus, CorpusError, Problem};
use crate::feedback_loop::{run_attempt, AttemptError, AttemptTrace, LoopConfig};
use crate::llm::{ChatModel, CostLedger, LlmError, ModelClient};
use crate::toolchain::HdlToolchain;

pub const PLAN_FILE: &str = "plan.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const TRACES_DIR: &str = "traces";

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub corpus_root: PathBuf,
    pub config: LoopConfig,
    pub runs_per_problem: u32,
    pub k_values: Vec<u32>,
    pub parallelism: usize,
    pub out_dir: PathBuf,
}

impl ExperimentPlan {
    pub fn new(corpus_root: impl Into<PathBuf>, config: LoopConfig, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            corpus_root: corpus_root.into(),
            config,
            runs_per_problem: 5,
            k_values: vec![1, 5],
            parallelism: 1,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidPlan(m));
        if self.runs_per_problem == 0 {
            return bad("runs per problem must be at least 1".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.k_values.is_empty() {
            return bad("at least one k is required".into());
        }
        if let Some(k) = self.k_values.iter().find(|&&k| k == 0 || k > self.runs_per_problem) {
            return bad(format!("k={k} must lie in 1..={}", self.runs_per_problem));
        }
        self.config.validate().map_err(HarnessError::InvalidPlan)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("corpus has invalid problems: {0}")]
    InvalidProblems(String),
    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),
    #[error("cannot write {path}")]
    OutputUnwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("{problem} run {run}")]
    Attempt {
        problem: String,
        run: u32,
        #[source]
        source: AttemptError,
    },
    #[error("{problem}")]
    Model {
        problem: String,
        #[source]
        source: LlmError,
    },
}

impl HarnessError {
    pub fn is_config_fault(&self) -> bool {
        match self {
            HarnessError::Attempt { source, .. } => source.is_config_fault(),
            HarnessError::Model { source, .. } => source.is_config_fault(),
            _ => false,
        }
    }
}

fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Plan record with a fingerprint over config, run counts and problem
/// contents. Paths are left out so the same experiment fingerprints the same
/// from any location.
pub fn plan_record(plan: &ExperimentPlan, problems: &[Problem]) -> PlanRecord {
    let planned: Vec<PlannedProblem> = problems
        .iter()
        .map(|p| PlannedProblem {
            id: p.id.clone(),
            category_major: p.category_major.clone(),
            category_minor: p.category_minor.clone(),
            prompt_sha256: sha256_hex(p.design_prompt.as_bytes()),
            testbench_sha256: sha256_hex(p.testbench_source.as_bytes()),
        })
        .collect();
    let mut record = PlanRecord {
        schema_version: SCHEMA_VERSION,
        fingerprint: String::new(),
        config: plan.config.clone(),
        runs_per_problem: plan.runs_per_problem,
        k_values: plan.k_values.clone(),
        problems: planned,
    };
    let canonical = serde_json::to_vec(&record).expect("plan record serializes");
    record.fingerprint = sha256_hex(&canonical);
    record
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let unwritable = |source| HarnessError::OutputUnwritable {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(unwritable)?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(path, text).map_err(unwritable)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let unreadable = |reason: String| HarnessError::Unreadable {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| unreadable(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| unreadable(e.to_string()))
}

pub fn trace_path(out_dir: &Path, problem: &str, run: u32) -> PathBuf {
    out_dir.join(TRACES_DIR).join(problem).join(format!("{run}.json"))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    problem: &'a str,
    category_major: &'a str,
    category_minor: &'a str,
    run: u32,
    final_class: &'a str,
    iterations_used: u32,
    final_mismatches: Option<u64>,
    total_tests: Option<u64>,
    escalated: bool,
    aborted: bool,
    input_tokens: u64,
    output_tokens: u64,
    dollars: f64,
}

fn write_csv(path: &Path, report: &SuiteReport) -> Result<(), HarnessError> {
    let unwritable = |e: csv::Error| HarnessError::OutputUnwritable {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut w = csv::Writer::from_path(path).map_err(unwritable)?;
    for p in &report.problems {
        for r in &p.runs {
            w.serialize(CsvRow {
                problem: &p.id,
                category_major: &p.category_major,
                category_minor: &p.category_minor,
                run: r.run,
                final_class: r.final_class.map(|c| c.as_str()).unwrap_or("Unclassified"),
                iterations_used: r.iterations_used,
                // Unfinished simulations rank as u64::MAX internally; leave them blank here.
                final_mismatches: r.final_mismatches.filter(|&m| m != u64::MAX),
                total_tests: r.total_tests,
                escalated: r.escalated,
                aborted: r.aborted,
                input_tokens: r.input_tokens,
                output_tokens: r.output_tokens,
                dollars: r.dollars.as_f64(),
            })
            .map_err(unwritable)?;
        }
    }
    w.flush().map_err(|source| HarnessError::OutputUnwritable {
        path: path.to_path_buf(),
        source,
    })
}

/// Write `report.json` and `report.csv` into `out_dir`.
pub fn write_report(out_dir: &Path, report: &SuiteReport) -> Result<(), HarnessError> {
    write_json(&out_dir.join(REPORT_JSON), report)?;
    write_csv(&out_dir.join(REPORT_CSV), report)
}

/// Rebuild the report of a finished suite from `plan.json` and the stored
/// traces.
pub fn report_from_dir(dir: &Path) -> Result<SuiteReport, HarnessError> {
    let plan: PlanRecord = read_json(&dir.join(PLAN_FILE))?;
    let mut traces = Vec::new();
    for p in &plan.problems {
        let mut runs = Vec::new();
        for run in 0..plan.runs_per_problem {
            let path = trace_path(dir, &p.id, run);
            runs.push(if path.exists() { Some(read_json(&path)?) } else { None });
        }
        traces.push(runs);
    }
    Ok(aggregate(&plan, &traces))
}

struct Job<'a> {
    problem: &'a Problem,
    problem_index: usize,
    run: u32,
}

fn attempt_once(
    job: &Job,
    config: &LoopConfig,
    toolchain: &dyn HdlToolchain,
    ledger: &Arc<CostLedger>,
    key: &str,
) -> Result<Result<AttemptTrace, AttemptError>, HarnessError> {
    let model_err = |source| HarnessError::Model {
        problem: job.problem.id.clone(),
        source,
    };
    let mut small = ModelClient::for_problem(&config.model, &job.problem.id, ledger.clone()).map_err(model_err)?;
    let mut big = match &config.big_model {
        Some(b) => Some(ModelClient::for_problem(b, &job.problem.id, ledger.clone()).map_err(model_err)?),
        None => None,
    };
    Ok(run_attempt(
        job.problem,
        config,
        toolchain,
        &mut small,
        big.as_mut().map(|b| b as &mut dyn ChatModel),
        key,
    ))
}

/// One attempt, re-run once if a backend failure aborted it. Configuration
/// faults stop the suite.
fn run_job(
    job: &Job,
    config: &LoopConfig,
    toolchain: &dyn HdlToolchain,
    ledger: &Arc<CostLedger>,
) -> Result<AttemptTrace, HarnessError> {
    let key = format!("{}/{}", job.problem.id, job.run);
    let fatal = |source| HarnessError::Attempt {
        problem: job.problem.id.clone(),
        run: job.run,
        source,
    };
    match attempt_once(job, config, toolchain, ledger, &key)? {
        Ok(trace) => Ok(trace),
        Err(e) if e.is_config_fault() => Err(fatal(e)),
        Err(AttemptError::Backend { source, .. }) => {
            warn!(problem = %job.problem.id, run = job.run, error = %source, "attempt aborted, re-running once");
            match attempt_once(job, config, toolchain, ledger, &format!("{key}-retry"))? {
                Ok(trace) => Ok(trace),
                Err(e) if e.is_config_fault() => Err(fatal(e)),
                Err(AttemptError::Backend { trace, .. }) => Ok(*trace),
                Err(e) => Err(fatal(e)),
            }
        }
        Err(e) => Err(fatal(e)),
    }
}

/// Run every problem `runs_per_problem` times on a bounded worker pool,
/// write traces and reports, and return the report.
pub fn run_suite(plan: &ExperimentPlan, toolchain: &dyn HdlToolchain) -> Result<SuiteReport, HarnessError> {
    plan.validate()?;
    let corpus = load_corpus(&plan.corpus_root)?;
    if !corpus.errors.is_empty() {
        let detail = corpus
            .errors
            .iter()
            .map(|(path, e)| format!("{}: {e}", path.display()))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(HarnessError::InvalidProblems(detail));
    }
    let record = plan_record(plan, &corpus.problems);
    write_json(&plan.out_dir.join(PLAN_FILE), &record)?;

    let jobs: Vec<Job> = corpus
        .problems
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            (0..plan.runs_per_problem).map(move |run| Job {
                problem: p,
                problem_index: i,
                run,
            })
        })
        .collect();
    let ledger = Arc::new(CostLedger::new());
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let results: Mutex<Vec<Option<AttemptTrace>>> = Mutex::new(vec![None; jobs.len()]);
    let first_error: Mutex<Option<HarnessError>> = Mutex::new(None);
    info!(problems = corpus.problems.len(), runs = plan.runs_per_problem, workers = plan.parallelism, "starting suite");

    thread::scope(|s| {
        for _ in 0..plan.parallelism.min(jobs.len()) {
            s.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let outcome = run_job(job, &plan.config, toolchain, &ledger).and_then(|trace| {
                    write_json(&trace_path(&plan.out_dir, &job.problem.id, job.run), &trace)?;
                    Ok(trace)
                });
                match outcome {
                    Ok(trace) => {
                        info!(
                            problem = %job.problem.id,
                            run = job.run,
                            class = trace.final_class.map(|c| c.as_str()).unwrap_or("none"),
                            iterations = trace.iterations_used,
                            "attempt finished"
                        );
                        results.lock().unwrap()[i] = Some(trace);
                    }
                    Err(e) => {
                        stop.store(true, Ordering::SeqCst);
                        first_error.lock().unwrap().get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }

    let mut traces: Vec<Vec<Option<AttemptTrace>>> = vec![Vec::new(); corpus.problems.len()];
    for (job, trace) in jobs.iter().zip(results.into_inner().unwrap()) {
        traces[job.problem_index].push(trace);
    }
    let report = aggregate(&record, &traces);
    write_report(&plan.out_dir, &report)?;
    Ok(report)
}
