//! Reduction of per-attempt traces into a [`SuiteReport`].
//!
//! Everything here is a pure function of the plan record and the traces, so
//! re-aggregating stored traces reproduces the original report exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::passk::pass_at_k;
use crate::feedback_loop::{AttemptTrace, LoopConfig, OutcomeClass};
use crate::llm::{Dollars, ModelConfig, Usage};

pub const SCHEMA_VERSION: u32 = 1;

/// Pick the best of several attempts at one problem. Success beats
/// SimulationError beats CompileError; then fewer final mismatches (runs that
/// never finished simulating rank last); then fewer iterations; then the
/// earlier run. Attempts without any classified iteration are skipped.
pub fn classify_best(traces: &[AttemptTrace]) -> Option<(usize, OutcomeClass)> {
    traces
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.final_class.map(|c| (i, c, t)))
        .min_by_key(|&(i, class, t)| {
            let mismatches = match class {
                OutcomeClass::SimulationError => t.final_mismatches().unwrap_or(u64::MAX),
                _ => 0,
            };
            (class, mismatches, t.iterations_used, i)
        })
        .map(|(i, class, _)| (i, class))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedProblem {
    pub id: String,
    pub category_major: String,
    pub category_minor: String,
    pub prompt_sha256: String,
    pub testbench_sha256: String,
}

/// What `plan.json` holds: enough to re-aggregate traces offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub schema_version: u32,
    pub fingerprint: String,
    pub config: LoopConfig,
    pub runs_per_problem: u32,
    pub k_values: Vec<u32>,
    pub problems: Vec<PlannedProblem>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassPercentages {
    #[serde(rename = "Success")]
    pub success: f64,
    #[serde(rename = "SimulationError")]
    pub simulation_error: f64,
    #[serde(rename = "CompileError")]
    pub compile_error: f64,
}

impl ClassPercentages {
    fn from_weights(weights: &[(OutcomeClass, f64)]) -> Self {
        let total = weights.iter().fold(0.0, |acc, (_, w)| acc + w);
        if total <= 0.0 {
            return Self::default();
        }
        // Summing from +0.0 keeps empty classes from rendering as -0.
        let share = |class| {
            100.0 * weights.iter().filter(|(c, _)| *c == class).fold(0.0, |acc, (_, w)| acc + w) / total
        };
        Self {
            success: share(OutcomeClass::Success),
            simulation_error: share(OutcomeClass::SimulationError),
            compile_error: share(OutcomeClass::CompileError),
        }
    }

    pub fn get(&self, class: OutcomeClass) -> f64 {
        match class {
            OutcomeClass::Success => self.success,
            OutcomeClass::SimulationError => self.simulation_error,
            OutcomeClass::CompileError => self.compile_error,
        }
    }

    pub fn sum(&self) -> f64 {
        self.success + self.simulation_error + self.compile_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBreakdown {
    /// Each problem's best run counts once.
    pub by_problem: ClassPercentages,
    /// Each problem's best run weighted by its number of test cases.
    pub by_testcase: ClassPercentages,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: u32,
    pub trace: String,
    pub final_class: Option<OutcomeClass>,
    pub iterations_used: u32,
    pub final_mismatches: Option<u64>,
    pub total_tests: Option<u64>,
    pub escalated: bool,
    pub aborted: bool,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub dollars: Dollars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub id: String,
    pub category_major: String,
    pub category_minor: String,
    pub runs: Vec<RunSummary>,
    /// Runs that produced a classification.
    pub runs_counted: u32,
    pub successes: u32,
    pub best_run: Option<u32>,
    pub best_class: Option<OutcomeClass>,
    pub best_mismatches: Option<u64>,
    /// Test-case weight used for the `by_testcase` rollup.
    pub testcase_weight: u64,
    pub pass_at_k: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRollup {
    pub category_major: String,
    /// Absent for the rollup over a whole major category.
    pub category_minor: Option<String>,
    pub problems: u32,
    pub pass_at_k: BTreeMap<u32, f64>,
    pub class_percentages: ClassBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDistribution {
    pub runs: u32,
    pub counts: BTreeMap<OutcomeClass, u32>,
    pub percentages: ClassPercentages,
    pub aborted: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub dollars: Dollars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub fingerprint: String,
    pub config: LoopConfig,
    pub runs_per_problem: u32,
    pub k_values: Vec<u32>,
    /// Percent of problems, averaged over per-problem pass@k.
    pub pass_at_k: BTreeMap<u32, f64>,
    pub class_percentages: ClassBreakdown,
    pub per_run: RunDistribution,
    pub categories: Vec<CategoryRollup>,
    pub ledger: BTreeMap<String, LedgerEntry>,
    pub total_dollars: Dollars,
    /// Problems where no run produced a classification. They count as
    /// failures for pass@k and are left out of the class percentages.
    pub unclassified_problems: Vec<String>,
    pub problems: Vec<ProblemSummary>,
}

fn rates_for<'a>(config: &'a LoopConfig, model: &str) -> Option<&'a ModelConfig> {
    std::iter::once(&config.model)
        .chain(config.big_model.as_ref())
        .find(|m| m.name == model)
}

/// Usage per model recorded in one trace.
pub fn trace_usage(trace: &AttemptTrace) -> BTreeMap<String, Usage> {
    let mut out: BTreeMap<String, Usage> = BTreeMap::new();
    for r in &trace.iterations {
        out.entry(r.model_used.clone()).or_default().add(&Usage {
            calls: 1,
            input_tokens: r.input_tokens,
            output_tokens: r.output_tokens,
        });
    }
    out
}

fn usage_cost(config: &LoopConfig, model: &str, usage: &Usage) -> Dollars {
    rates_for(config, model)
        .map(|m| usage.cost(m.input_rate, m.output_rate))
        .unwrap_or_default()
}

fn mean_pass(problems: &[&ProblemSummary], k_values: &[u32]) -> BTreeMap<u32, f64> {
    k_values
        .iter()
        .map(|&k| {
            let v = if problems.is_empty() {
                0.0
            } else {
                100.0 * problems.iter().fold(0.0, |acc, p| acc + p.pass_at_k[&k]) / problems.len() as f64
            };
            (k, v)
        })
        .collect()
}

fn breakdown(problems: &[&ProblemSummary]) -> ClassBreakdown {
    let classified: Vec<_> = problems.iter().filter_map(|p| p.best_class.map(|c| (c, *p))).collect();
    let by_problem: Vec<_> = classified.iter().map(|(c, _)| (*c, 1.0)).collect();
    let by_testcase: Vec<_> = classified.iter().map(|(c, p)| (*c, p.testcase_weight as f64)).collect();
    ClassBreakdown {
        by_problem: ClassPercentages::from_weights(&by_problem),
        by_testcase: ClassPercentages::from_weights(&by_testcase),
    }
}

/// `traces[i]` holds the attempts for `plan.problems[i]`, indexed by run;
/// `None` marks a run with no stored trace.
pub fn aggregate(plan: &PlanRecord, traces: &[Vec<Option<AttemptTrace>>]) -> SuiteReport {
    assert_eq!(plan.problems.len(), traces.len(), "one trace list per planned problem");
    let config = &plan.config;
    let mut ledger: BTreeMap<String, Usage> = BTreeMap::new();
    let mut per_run_weights = Vec::new();
    let mut aborted_runs = 0;
    let mut problems = Vec::new();

    for (planned, runs) in plan.problems.iter().zip(traces) {
        let mut summaries = Vec::new();
        let mut counted: Vec<&AttemptTrace> = Vec::new();
        let mut counted_runs = Vec::new();
        for (run, trace) in runs.iter().enumerate() {
            let Some(t) = trace else { continue };
            let usage = trace_usage(t);
            let mut dollars = Dollars::ZERO;
            let (mut input_tokens, mut output_tokens) = (0, 0);
            for (model, u) in &usage {
                ledger.entry(model.clone()).or_default().add(u);
                dollars = dollars + usage_cost(config, model, u);
                input_tokens += u.input_tokens;
                output_tokens += u.output_tokens;
            }
            if t.aborted.is_some() {
                aborted_runs += 1;
            }
            if let Some(c) = t.final_class {
                per_run_weights.push((c, 1.0));
                counted.push(t);
                counted_runs.push(run as u32);
            }
            summaries.push(RunSummary {
                run: run as u32,
                trace: format!("traces/{}/{run}.json", planned.id),
                final_class: t.final_class,
                iterations_used: t.iterations_used,
                final_mismatches: t.final_mismatches(),
                total_tests: t.final_total_tests(),
                escalated: t.escalated,
                aborted: t.aborted.is_some(),
                input_tokens,
                output_tokens,
                dollars,
            });
        }

        let owned: Vec<AttemptTrace> = counted.iter().map(|t| (*t).clone()).collect();
        let best = classify_best(&owned);
        let successes = counted.iter().filter(|t| t.is_success()).count() as u64;
        let r = counted.len() as u64;
        let pass = plan
            .k_values
            .iter()
            .map(|&k| {
                let v = if r == 0 {
                    0.0
                } else {
                    pass_at_k(r, successes, (k as u64).min(r)).expect("k clamped to 1..=r")
                };
                (k, v)
            })
            .collect();
        let best_trace = best.map(|(i, _)| &owned[i]);
        let testcase_weight = best_trace
            .and_then(AttemptTrace::final_total_tests)
            .or_else(|| owned.iter().filter_map(AttemptTrace::final_total_tests).max())
            .unwrap_or(1)
            .max(1);
        problems.push(ProblemSummary {
            id: planned.id.clone(),
            category_major: planned.category_major.clone(),
            category_minor: planned.category_minor.clone(),
            runs: summaries,
            runs_counted: r as u32,
            successes: successes as u32,
            best_run: best.map(|(i, _)| counted_runs[i]),
            best_class: best.map(|(_, c)| c),
            best_mismatches: best_trace.and_then(|t| match t.final_class {
                Some(OutcomeClass::SimulationError) => t.final_mismatches(),
                _ => None,
            }),
            testcase_weight,
            pass_at_k: pass,
        });
    }

    let all: Vec<&ProblemSummary> = problems.iter().collect();
    let mut groups: BTreeMap<(String, Option<String>), Vec<&ProblemSummary>> = BTreeMap::new();
    for p in &problems {
        groups.entry((p.category_major.clone(), None)).or_default().push(p);
        groups
            .entry((p.category_major.clone(), Some(p.category_minor.clone())))
            .or_default()
            .push(p);
    }
    let categories = groups
        .into_iter()
        .map(|((major, minor), ps)| CategoryRollup {
            category_major: major,
            category_minor: minor,
            problems: ps.len() as u32,
            pass_at_k: mean_pass(&ps, &plan.k_values),
            class_percentages: breakdown(&ps),
        })
        .collect();

    let mut counts: BTreeMap<OutcomeClass, u32> = OutcomeClass::ALL.iter().map(|&c| (c, 0)).collect();
    for (c, _) in &per_run_weights {
        *counts.get_mut(c).expect("all classes present") += 1;
    }
    let ledger: BTreeMap<String, LedgerEntry> = ledger
        .into_iter()
        .map(|(model, u)| {
            let dollars = usage_cost(config, &model, &u);
            (
                model,
                LedgerEntry {
                    calls: u.calls,
                    input_tokens: u.input_tokens,
                    output_tokens: u.output_tokens,
                    dollars,
                },
            )
        })
        .collect();

    SuiteReport {
        schema_version: SCHEMA_VERSION,
        fingerprint: plan.fingerprint.clone(),
        config: config.clone(),
        runs_per_problem: plan.runs_per_problem,
        k_values: plan.k_values.clone(),
        pass_at_k: mean_pass(&all, &plan.k_values),
        class_percentages: breakdown(&all),
        per_run: RunDistribution {
            runs: per_run_weights.len() as u32,
            counts,
            percentages: ClassPercentages::from_weights(&per_run_weights),
            aborted: aborted_runs,
        },
        categories,
        total_dollars: ledger.values().map(|e| e.dollars).sum(),
        ledger,
        unclassified_problems: problems
            .iter()
            .filter(|p| p.best_class.is_none())
            .map(|p| p.id.clone())
            .collect(),
        problems,
    }
}
