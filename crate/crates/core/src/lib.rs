//! Feedback-driven Verilog generation.
//!
//! An LLM is asked for a Verilog module, the candidate is compiled and
//! simulated against a self-checking testbench, and any compiler or
//! simulator output is fed back as a new prompt until the bench passes or
//! the iteration budget runs out. Around that loop sit the pieces needed to
//! run it as an experiment: a problem corpus loader, a provider-agnostic
//! chat gateway with cost accounting, and a Pass@k evaluation harness.
//!
//! Module map:
//!
//! - [`corpus`]: problem directories (`prompt.v`, `tb.v`, `meta`)
//! - [`prompt`]: system/design/feedback prompts and context-window policies
//! - [`extract`]: pulling Verilog out of free-form model responses
//! - [`toolchain`]: compiler/simulator subprocesses and report parsing
//! - [`llm`]: chat backends, token estimates and the cost ledger
//! - [`feedback_loop`]: the generate → compile → simulate → feedback state machine
//! - [`harness`]: multi-run suites, Pass@k and reports

pub mod corpus;
pub mod extract;
pub mod feedback_loop;
pub mod harness;
pub mod llm;
pub mod prompt;
pub mod toolchain;

pub use corpus::{load_corpus, load_problem, Corpus, CorpusError, Problem};
pub use extract::{extract, ExtractedCode, Extraction, ExtractionMethod};
pub use feedback_loop::{
    classify, run_attempt, AttemptError, AttemptTrace, IterationRecord, LoopConfig, OutcomeClass,
};
pub use llm::{
    estimate_tokens, ledger_cost, ChatModel, CostLedger, Dollars, LlmError, LlmResponse,
    ModelConfig,
};
pub use prompt::{
    initial_messages, next_messages, system_prompt, ChatMessage, ContextStrategy, FeedbackKind,
    FeedbackPayload, Role,
};
pub use toolchain::{
    parse_sim_output, CompileOutcome, HdlToolchain, MismatchRecord, SimReport,
    SubprocessToolchain, ToolchainConfig, ToolchainError,
};
