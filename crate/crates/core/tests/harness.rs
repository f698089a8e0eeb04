mod common;

use std::fs;
use std::path::{Path, PathBuf};

use hdlloop_core::harness::{
    classify_best, pass_at_k, report_from_dir, run_suite, write_report, ExperimentPlan, REPORT_JSON,
};
use hdlloop_core::{
    AttemptTrace, CompileOutcome, HdlToolchain, LoopConfig, ModelConfig, OutcomeClass, SimReport,
    ToolchainError,
};

/// Brute force: count k-subsets of r samples (first c correct) that contain
/// at least one correct sample.
fn enumerate(r: u32, c: u32, k: u32) -> f64 {
    let (mut hit, mut all) = (0u32, 0u32);
    for mask in 0u32..(1 << r) {
        if mask.count_ones() != k {
            continue;
        }
        all += 1;
        if mask & ((1 << c) - 1) != 0 {
            hit += 1;
        }
    }
    f64::from(hit) / f64::from(all)
}

#[test]
fn pass_at_k_matches_subset_enumeration() {
    for r in 1..=6u32 {
        for c in 0..=r {
            for k in 1..=r {
                let got = pass_at_k(r.into(), c.into(), k.into()).unwrap();
                let want = enumerate(r, c, k);
                assert!((got - want).abs() <= 1e-12, "r={r} c={c} k={k}: {got} vs {want}");
            }
        }
    }
}

/// Passes or fails each run according to the problem id and run index in
/// the compile id (`<problem>/<run>/<iteration>`).
struct ByRun;

impl HdlToolchain for ByRun {
    fn compile(&self, _module: &str, _tb: &str, attempt_id: &str) -> Result<CompileOutcome, ToolchainError> {
        Ok(CompileOutcome {
            success: true,
            diagnostics: String::new(),
            artifact: Some(PathBuf::from(attempt_id)),
            timed_out: false,
        })
    }

    fn simulate(&self, artifact: &Path) -> Result<SimReport, ToolchainError> {
        let id = artifact.to_str().unwrap();
        let mut parts = id.split('/');
        let problem = parts.next().unwrap();
        let run: u32 = parts.next().unwrap().parse().unwrap();
        let mismatches = match problem {
            "p_all" => 0,
            "p_two" if run < 2 => 0,
            "p_two" => 1 + run,
            _ => 3,
        };
        let text = format!("{mismatches} mismatches out of 10 total tests.\n");
        Ok(hdlloop_core::parse_sim_output(&text).unwrap())
    }
}

fn corpus(dir: &Path) -> PathBuf {
    let root = dir.join("corpus");
    let src = common::workspace_root().join("fixtures/and_gate");
    for id in ["p_all", "p_two", "p_none"] {
        let d = root.join(id);
        fs::create_dir_all(&d).unwrap();
        for f in ["prompt.v", "tb.v", "meta"] {
            fs::copy(src.join(f), d.join(f)).unwrap();
        }
    }
    let script = dir.join("script.txt");
    fs::write(&script, "```verilog\nmodule top_module(input a, output b); assign b = a; endmodule\n```\n").unwrap();
    root
}

fn plan(dir: &Path, out: &str) -> ExperimentPlan {
    let mut cfg = LoopConfig::new(ModelConfig::scripted("scripted:fixed", dir.join("script.txt")));
    cfg.max_iterations = 0;
    let mut plan = ExperimentPlan::new(corpus(dir), cfg, dir.join(out));
    plan.parallelism = 3;
    plan
}

#[test]
fn suite_averages_per_problem_pass_at_k() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(&plan(dir.path(), "a"), &ByRun).unwrap();
    // c = (5, 2, 0) out of r = 5.
    assert!((report.pass_at_k[&1] - 100.0 * (1.0 + 0.4 + 0.0) / 3.0).abs() < 1e-9);
    assert!((report.pass_at_k[&5] - 100.0 * 2.0 / 3.0).abs() < 1e-9);
    let by_problem = &report.class_percentages.by_problem;
    assert!((by_problem.sum() - 100.0).abs() <= 0.01);
    assert!((by_problem.get(OutcomeClass::Success) - 200.0 / 3.0).abs() < 1e-9);
    assert!((by_problem.get(OutcomeClass::SimulationError) - 100.0 / 3.0).abs() < 1e-9);
    assert!((report.class_percentages.by_testcase.sum() - 100.0).abs() <= 0.01);
    assert!((report.per_run.percentages.sum() - 100.0).abs() <= 0.01);
    for p in &report.problems {
        assert_eq!(p.runs.len(), 5);
        assert!(p.runs.iter().all(|r| r.iterations_used == 1));
    }
    assert_eq!(report.ledger["scripted:fixed"].calls, 15);
}

#[test]
fn suite_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    run_suite(&plan(dir.path(), "a"), &ByRun).unwrap();
    run_suite(&plan(dir.path(), "b"), &ByRun).unwrap();
    let a = fs::read(dir.path().join("a").join(REPORT_JSON)).unwrap();
    let b = fs::read(dir.path().join("b").join(REPORT_JSON)).unwrap();
    assert!(a == b, "report.json differs between identical runs");
    let rebuilt = report_from_dir(&dir.path().join("a")).unwrap();
    write_report(&dir.path().join("c"), &rebuilt).unwrap();
    assert!(fs::read(dir.path().join("c").join(REPORT_JSON)).unwrap() == a);
}

fn trace(class: OutcomeClass, mismatches: Option<u64>, iterations: u32) -> AttemptTrace {
    let mut t: AttemptTrace = serde_json::from_value(serde_json::json!({
        "problem_id": "p",
        "category_major": "x",
        "category_minor": "y",
        "attempt_key": "p/0",
        "config": LoopConfig::new(ModelConfig::scripted("s", "s")),
        "iterations": [],
        "final_class": class,
        "iterations_used": iterations,
        "escalated": false,
        "wall_time_ms": 0,
    }))
    .unwrap();
    if let Some(m) = mismatches {
        t.iterations.push(serde_json::from_value(serde_json::json!({
            "index": iterations - 1,
            "model_used": "s",
            "escalation": false,
            "messages_sent": [],
            "response": "",
            "extracted": { "Found": { "source": "module m; endmodule", "method": "FencedBlock", "block_count": 1 } },
            "compile": { "success": true, "diagnostics": "" },
            "sim": { "status": "completed", "report": hdlloop_core::parse_sim_output(&format!("{m} mismatches out of 26 total tests.")).unwrap() },
            "outcome_class": class,
            "input_tokens": 0,
            "output_tokens": 0,
            "token_source": "Approximated",
        }))
        .unwrap());
    }
    t
}

#[test]
fn best_run_ordering() {
    use OutcomeClass::*;
    let ts = [trace(CompileError, None, 3), trace(Success, Some(0), 3), trace(SimulationError, Some(1), 3)];
    assert_eq!(classify_best(&ts), Some((1, Success)));

    let ts = [trace(SimulationError, Some(13), 2), trace(SimulationError, Some(3), 5)];
    assert_eq!(classify_best(&ts), Some((1, SimulationError)));

    let ts = [trace(SimulationError, Some(3), 4), trace(SimulationError, Some(3), 2)];
    assert_eq!(classify_best(&ts), Some((1, SimulationError)));

    let ts = [trace(CompileError, None, 2), trace(CompileError, None, 2)];
    assert_eq!(classify_best(&ts), Some((0, CompileError)));
}
