//! Parser for the testbench feedback grammar.
//!
//! ```text
//! Test 12 passed!
//! Mismatch at clk 13: Inputs = [00000, 00001], Generated = [00000011], Reference = [10000011]
//! 13 mismatches out of 26 total tests.
//! All Tests passed! Testbench ran successfully.
//! ```
//!
//! Anything else is kept in `raw_output` and otherwise ignored.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static PASSED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^Test (\d+) passed!$").unwrap());
static MISMATCH: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^Mismatch at (\w+) (\d+): Inputs = \[([^\]]*)\], Generated = \[([^\]]*)\], Reference = \[([^\]]*)\]$",
    )
    .unwrap()
});
static SUMMARY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d+) mismatches out of (\d+) total tests\.$").unwrap());

const ALL_PASSED_PREFIX: &str = "All Tests passed!";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchRecord {
    pub position_kind: String,
    pub position: u64,
    pub inputs: Vec<String>,
    pub generated: Vec<String>,
    pub reference: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub passed_tests: Vec<u64>,
    pub mismatches: Vec<MismatchRecord>,
    pub mismatch_count: u64,
    pub total_tests: u64,
    pub raw_output: String,
    pub all_passed: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("simulation output has neither a mismatch summary nor an all-passed line")]
    NoSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LineKind {
    Passed,
    Mismatch,
    Summary,
    AllPassed,
    Other,
}

enum Parsed {
    Passed(u64),
    Mismatch(MismatchRecord),
    Summary { mismatches: u64, total: u64 },
    AllPassed,
    Other,
}

fn parse_list(s: &str) -> Option<Vec<String>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(", ")
        .map(|item| {
            let ok = !item.is_empty()
                && !item.contains(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']');
            ok.then(|| item.to_string())
        })
        .collect()
}

fn parse_line(line: &str) -> Parsed {
    if let Some(c) = PASSED.captures(line) {
        if let Ok(id) = c[1].parse() {
            return Parsed::Passed(id);
        }
        return Parsed::Other;
    }
    if let Some(c) = MISMATCH.captures(line) {
        let record = (|| {
            let position = c[2].parse().ok()?;
            let inputs = parse_list(&c[3])?;
            let generated = parse_list(&c[4])?;
            let reference = parse_list(&c[5])?;
            (generated.len() == reference.len()).then(|| MismatchRecord {
                position_kind: c[1].to_string(),
                position,
                inputs,
                generated,
                reference,
            })
        })();
        return record.map_or(Parsed::Other, Parsed::Mismatch);
    }
    if let Some(c) = SUMMARY.captures(line) {
        return match (c[1].parse::<u64>(), c[2].parse::<u64>()) {
            (Ok(m), Ok(t)) if t >= 1 && m <= t => Parsed::Summary {
                mismatches: m,
                total: t,
            },
            _ => Parsed::Other,
        };
    }
    if line.starts_with(ALL_PASSED_PREFIX) {
        return Parsed::AllPassed;
    }
    Parsed::Other
}

pub(crate) fn classify_line(line: &str) -> LineKind {
    match parse_line(line.trim()) {
        Parsed::Passed(_) => LineKind::Passed,
        Parsed::Mismatch(_) => LineKind::Mismatch,
        Parsed::Summary { .. } => LineKind::Summary,
        Parsed::AllPassed => LineKind::AllPassed,
        Parsed::Other => LineKind::Other,
    }
}

/// Parse simulator output.
///
/// The last summary line sets the counts. Without one, an all-passed line
/// means zero mismatches over the reported passing tests. Mismatch lines are
/// evidence of failure even if the summary disagrees, so the count never
/// drops below the number of parsed mismatch records.
pub fn parse_sim_output(text: &str) -> Result<SimReport, ReportError> {
    let mut passed_tests = Vec::new();
    let mut mismatches = Vec::new();
    let mut summary = None;
    let mut saw_all_passed = false;

    for line in text.lines() {
        match parse_line(line.trim()) {
            Parsed::Passed(id) => passed_tests.push(id),
            Parsed::Mismatch(m) => mismatches.push(m),
            Parsed::Summary { mismatches, total } => summary = Some((mismatches, total)),
            Parsed::AllPassed => saw_all_passed = true,
            Parsed::Other => {}
        }
    }

    let (mut mismatch_count, mut total_tests) = match summary {
        Some(s) => s,
        None if saw_all_passed => (0, passed_tests.len() as u64),
        None => return Err(ReportError::NoSummary),
    };
    let parsed = mismatches.len() as u64;
    if parsed > mismatch_count {
        mismatch_count = parsed;
        total_tests = total_tests.max(mismatch_count);
    }

    Ok(SimReport {
        passed_tests,
        mismatches,
        mismatch_count,
        total_tests,
        raw_output: text.to_string(),
        all_passed: mismatch_count == 0,
    })
}

impl MismatchRecord {
    pub fn render(&self) -> String {
        format!(
            "Mismatch at {} {}: Inputs = [{}], Generated = [{}], Reference = [{}]",
            self.position_kind,
            self.position,
            self.inputs.join(", "),
            self.generated.join(", "),
            self.reference.join(", ")
        )
    }
}

impl SimReport {
    /// Render the parsed content back in the feedback grammar: passing
    /// tests, then mismatches, then the summary.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for id in &self.passed_tests {
            out.push_str(&format!("Test {id} passed!\n"));
        }
        for m in &self.mismatches {
            out.push_str(&m.render());
            out.push('\n');
        }
        out.push_str(&format!(
            "{} mismatches out of {} total tests.\n",
            self.mismatch_count, self.total_tests
        ));
        if self.all_passed {
            out.push_str("All Tests passed! Testbench ran successfully.\n");
        }
        out
    }
}
