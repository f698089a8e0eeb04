//! The generate → extract → compile → simulate → feedback state machine.
//!
//! Iteration 0 is the zero-shot generation; iterations 1..=n are feedback
//! rounds. If nothing passed and a big model is configured, one more
//! iteration sends the last response and its feedback to the big model.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info};

use crate::corpus::Problem;
use crate::extract::{extract, Extraction};
use crate::llm::{ChatModel, LlmError, ModelConfig, TokenSource};
use crate::prompt::{initial_messages, next_messages, ChatMessage, ContextStrategy, FeedbackPayload};
use crate::toolchain::{humanize, CompileOutcome, HdlToolchain, SimReport, ToolchainError};

pub const DEFAULT_MAX_ITERATIONS: u32 = 10;

/// Stands in for an empty response when it has to be echoed back to the model.
const EMPTY_RESPONSE_PLACEHOLDER: &str = "(empty response)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_model: Option<ModelConfig>,
    pub max_iterations: u32,
    pub strategy: ContextStrategy,
}

impl LoopConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            big_model: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            strategy: ContextStrategy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.model.validate()?;
        if self.max_iterations > 0 && !self.model.supports_chat() {
            return Err(format!(
                "{} is completion-only and can only be used with 0 iterations",
                self.model.name
            ));
        }
        if let Some(big) = &self.big_model {
            big.validate()?;
            if big.name == self.model.name {
                return Err("big model must differ from the small model".into());
            }
            if !big.supports_chat() {
                return Err(format!("{} is completion-only and cannot take feedback", big.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeClass {
    Success,
    SimulationError,
    CompileError,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 3] = [
        OutcomeClass::Success,
        OutcomeClass::SimulationError,
        OutcomeClass::CompileError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::Success => "Success",
            OutcomeClass::SimulationError => "SimulationError",
            OutcomeClass::CompileError => "CompileError",
        }
    }
}

/// How a simulation of a successfully compiled candidate ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SimOutcome {
    Completed { report: SimReport },
    TimedOut { after_ms: u64, partial_output: String },
    Crashed { exit: String, output: String },
    NoSummary { output: String },
}

impl SimOutcome {
    pub fn report(&self) -> Option<&SimReport> {
        match self {
            SimOutcome::Completed { report } => Some(report),
            _ => None,
        }
    }

    /// Mismatch count for ranking; runs that never finished rank worst.
    pub fn mismatch_rank(&self) -> u64 {
        match self {
            SimOutcome::Completed { report } => report.mismatch_count,
            _ => u64::MAX,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("inconsistent classification inputs: {0}")]
pub struct InconsistentArguments(pub &'static str);

/// Three-way outcome of one iteration. An unextractable response counts as a
/// compile error.
pub fn classify(
    extracted: &Extraction,
    compile: Option<&CompileOutcome>,
    sim: Option<&SimOutcome>,
) -> Result<OutcomeClass, InconsistentArguments> {
    match (extracted, compile, sim) {
        (Extraction::NotFound, None, None) => Ok(OutcomeClass::CompileError),
        (Extraction::NotFound, _, _) => Err(InconsistentArguments("nothing was extracted, so nothing can be compiled")),
        (Extraction::Found(_), None, _) => Err(InconsistentArguments("extracted code must be compiled")),
        (Extraction::Found(_), Some(c), None) if !c.success => Ok(OutcomeClass::CompileError),
        (Extraction::Found(_), Some(_), None) => Err(InconsistentArguments("a successful compile must be simulated")),
        (Extraction::Found(_), Some(c), Some(_)) if !c.success => {
            Err(InconsistentArguments("a failed compile cannot be simulated"))
        }
        (Extraction::Found(_), Some(_), Some(SimOutcome::Completed { report })) if report.all_passed => {
            Ok(OutcomeClass::Success)
        }
        (Extraction::Found(_), Some(_), Some(_)) => Ok(OutcomeClass::SimulationError),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: u32,
    pub model_used: String,
    pub escalation: bool,
    pub messages_sent: Vec<ChatMessage>,
    pub response: String,
    pub extracted: Extraction,
    pub compile: Option<CompileOutcome>,
    pub sim: Option<SimOutcome>,
    pub outcome_class: OutcomeClass,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub token_source: TokenSource,
    /// What the next prompt would carry; absent on success.
    pub feedback: Option<FeedbackPayload>,
}

impl IterationRecord {
    pub fn parse_failure(&self) -> bool {
        !self.extracted.is_found()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptTrace {
    pub problem_id: String,
    pub category_major: String,
    pub category_minor: String,
    pub attempt_key: String,
    pub config: LoopConfig,
    pub iterations: Vec<IterationRecord>,
    /// Class of the last iteration; absent only if the first call failed.
    pub final_class: Option<OutcomeClass>,
    pub iterations_used: u32,
    pub escalated: bool,
    pub wall_time_ms: u64,
    /// Set when a backend failure cut the attempt short.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl AttemptTrace {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.iterations.last()
    }

    pub fn is_success(&self) -> bool {
        self.final_class == Some(OutcomeClass::Success)
    }

    /// Mismatch count of the final iteration, if it was simulated.
    pub fn final_mismatches(&self) -> Option<u64> {
        self.last().and_then(|r| r.sim.as_ref()).map(SimOutcome::mismatch_rank)
    }

    /// Test count reported by the final simulation, if any.
    pub fn final_total_tests(&self) -> Option<u64> {
        self.last()
            .and_then(|r| r.sim.as_ref())
            .and_then(SimOutcome::report)
            .map(|r| r.total_tests)
    }

    pub fn calls_to(&self, model: &str) -> usize {
        self.iterations.iter().filter(|r| r.model_used == model).count()
    }
}

#[derive(Debug, Error)]
pub enum AttemptError {
    #[error("invalid loop configuration: {0}")]
    Config(String),
    #[error("toolchain failure")]
    Toolchain {
        #[source]
        source: ToolchainError,
        trace: Box<AttemptTrace>,
    },
    #[error("model backend failure")]
    Backend {
        #[source]
        source: LlmError,
        trace: Box<AttemptTrace>,
    },
}

impl AttemptError {
    pub fn trace(&self) -> Option<&AttemptTrace> {
        match self {
            AttemptError::Config(_) => None,
            AttemptError::Toolchain { trace, .. } | AttemptError::Backend { trace, .. } => Some(trace),
        }
    }

    pub fn is_config_fault(&self) -> bool {
        match self {
            AttemptError::Config(_) => true,
            AttemptError::Toolchain { source, .. } => source.is_config_fault(),
            AttemptError::Backend { source, .. } => source.is_config_fault(),
        }
    }
}

fn sim_outcome(result: Result<SimReport, ToolchainError>) -> Result<SimOutcome, ToolchainError> {
    match result {
        Ok(report) => Ok(SimOutcome::Completed { report }),
        Err(ToolchainError::SimTimeout { after, partial_output }) => Ok(SimOutcome::TimedOut {
            after_ms: after.as_millis() as u64,
            partial_output,
        }),
        Err(ToolchainError::RuntimeCrash { status, output }) => Ok(SimOutcome::Crashed { exit: status, output }),
        Err(ToolchainError::NoSummary { output }) => Ok(SimOutcome::NoSummary { output }),
        Err(e) => Err(e),
    }
}

fn feedback_for(extracted: &Extraction, compile: Option<&CompileOutcome>, sim: Option<&SimOutcome>) -> Option<FeedbackPayload> {
    let Some(compile) = compile else {
        debug_assert!(!extracted.is_found());
        return Some(FeedbackPayload::parse_failure());
    };
    if !compile.success {
        return Some(FeedbackPayload::compile_error(&compile.diagnostics));
    }
    match sim? {
        SimOutcome::Completed { report } if report.all_passed => None,
        SimOutcome::Completed { report } => Some(FeedbackPayload::simulation(report)),
        SimOutcome::TimedOut { after_ms, partial_output } => Some(FeedbackPayload::simulation_fault(
            &format!(
                "simulation timed out after {}",
                humanize(std::time::Duration::from_millis(*after_ms))
            ),
            partial_output,
        )),
        SimOutcome::Crashed { exit, output } => Some(FeedbackPayload::simulation_fault(
            &format!("simulator {exit} before printing a test summary"),
            output,
        )),
        SimOutcome::NoSummary { output } => Some(FeedbackPayload::simulation_fault(
            "simulation finished without printing a test summary",
            output,
        )),
    }
}

struct Step<'a> {
    problem: &'a Problem,
    toolchain: &'a dyn HdlToolchain,
    attempt_key: &'a str,
}

impl Step<'_> {
    /// One model call plus evaluation of its response.
    fn run(
        &self,
        index: u32,
        escalation: bool,
        model: &mut dyn ChatModel,
        messages: Vec<ChatMessage>,
    ) -> Result<IterationRecord, StepError> {
        let model_used = model.config().name.clone();
        let response = model.complete(&messages).map_err(StepError::Backend)?;
        let extracted = extract(&response.text);
        let (compile, sim) = match extracted.code() {
            None => (None, None),
            Some(code) => {
                let attempt_id = format!("{}/{index}", self.attempt_key);
                let compile = self
                    .toolchain
                    .compile(&code.source, &self.problem.testbench_source, &attempt_id)
                    .map_err(StepError::Toolchain)?;
                let sim = match (&compile.artifact, compile.success) {
                    (Some(artifact), true) => {
                        Some(sim_outcome(self.toolchain.simulate(artifact)).map_err(StepError::Toolchain)?)
                    }
                    _ => None,
                };
                (Some(compile), sim)
            }
        };
        let outcome_class = classify(&extracted, compile.as_ref(), sim.as_ref())
            .expect("loop always builds consistent classification inputs");
        let feedback = feedback_for(&extracted, compile.as_ref(), sim.as_ref());
        info!(
            problem = %self.problem.id,
            attempt = self.attempt_key,
            index,
            model = %model_used,
            class = outcome_class.as_str(),
            mismatches = sim.as_ref().map(SimOutcome::mismatch_rank),
            "iteration finished"
        );
        Ok(IterationRecord {
            index,
            model_used,
            escalation,
            messages_sent: messages,
            response: response.text,
            extracted,
            compile,
            sim,
            outcome_class,
            input_tokens: response.input_tokens,
            output_tokens: response.output_tokens,
            token_source: response.token_source,
            feedback,
        })
    }
}

enum StepError {
    Backend(LlmError),
    Toolchain(ToolchainError),
}

/// Run one attempt at `problem`. `attempt_key` must be unique per attempt
/// within the toolchain's working root; iteration `i` compiles in
/// `<attempt_key>/<i>`.
pub fn run_attempt(
    problem: &Problem,
    config: &LoopConfig,
    toolchain: &dyn HdlToolchain,
    small: &mut dyn ChatModel,
    big: Option<&mut dyn ChatModel>,
    attempt_key: &str,
) -> Result<AttemptTrace, AttemptError> {
    config.validate().map_err(AttemptError::Config)?;
    if config.big_model.is_some() != big.is_some() {
        return Err(AttemptError::Config(
            "a big-model client must be supplied exactly when a big model is configured".into(),
        ));
    }
    let started = Instant::now();
    let mut trace = AttemptTrace {
        problem_id: problem.id.clone(),
        category_major: problem.category_major.clone(),
        category_minor: problem.category_minor.clone(),
        attempt_key: attempt_key.to_string(),
        config: config.clone(),
        iterations: Vec::new(),
        final_class: None,
        iterations_used: 0,
        escalated: false,
        wall_time_ms: 0,
        aborted: None,
    };
    let step = Step {
        problem,
        toolchain,
        attempt_key,
    };

    let finish = |mut trace: AttemptTrace, err: Option<StepError>| {
        trace.final_class = trace.last().map(|r| r.outcome_class);
        trace.iterations_used = trace.iterations.len() as u32;
        trace.wall_time_ms = started.elapsed().as_millis() as u64;
        match err {
            None => Ok(trace),
            Some(StepError::Backend(source)) => {
                trace.aborted = Some(source.to_string());
                Err(AttemptError::Backend {
                    source,
                    trace: Box::new(trace),
                })
            }
            Some(StepError::Toolchain(source)) => {
                trace.aborted = Some(source.to_string());
                Err(AttemptError::Toolchain {
                    source,
                    trace: Box::new(trace),
                })
            }
        }
    };

    let mut sent = initial_messages(problem);
    for index in 0..=config.max_iterations {
        if let Some(prev) = trace.last() {
            let response = echo(&prev.response);
            let feedback = prev.feedback.as_ref().expect("failed iterations carry feedback");
            sent = next_messages(config.strategy, &sent, response, feedback)
                .map_err(|e| AttemptError::Config(e.to_string()))?;
        }
        match step.run(index, false, small, sent.clone()) {
            Ok(record) => {
                let done = record.outcome_class == OutcomeClass::Success;
                trace.iterations.push(record);
                if done {
                    return finish(trace, None);
                }
            }
            Err(e) => return finish(trace, Some(e)),
        }
    }

    if let Some(big) = big {
        let prev = trace.last().expect("at least one iteration ran");
        let messages = next_messages(
            ContextStrategy::Succinct,
            &sent,
            echo(&prev.response),
            prev.feedback.as_ref().expect("failed iterations carry feedback"),
        )
        .map_err(|e| AttemptError::Config(e.to_string()))?;
        debug!(problem = %problem.id, model = %big.config().name, "escalating");
        trace.escalated = true;
        match step.run(config.max_iterations + 1, true, big, messages) {
            Ok(record) => trace.iterations.push(record),
            Err(e) => return finish(trace, Some(e)),
        }
    }
    finish(trace, None)
}

fn echo(response: &str) -> &str {
    if response.is_empty() {
        EMPTY_RESPONSE_PLACEHOLDER
    } else {
        response
    }
}
