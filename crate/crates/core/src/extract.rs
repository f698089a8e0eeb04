//! Pulls candidate Verilog out of a raw model response.
//!
//! Fenced blocks win over bare text: every fenced block containing a
//! `module` ... `endmodule` pair is kept, in order. Without such a block the
//! raw text is scanned for `module` ... `endmodule` spans instead. Keyword
//! matching is case-sensitive and token-boundary based; comments are not
//! lexed, so a stray `module` in a comment can be captured and will then
//! surface as a compile error.

use serde::{Deserialize, Serialize};

const FENCE: &str = "```";
const MODULE: &str = "module";
const ENDMODULE: &str = "endmodule";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractionMethod {
    FencedBlock,
    ModuleSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedCode {
    pub source: String,
    pub method: ExtractionMethod,
    /// Number of fenced blocks or module spans merged into `source`.
    pub block_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extraction {
    Found(ExtractedCode),
    NotFound,
}

impl Extraction {
    pub fn code(&self) -> Option<&ExtractedCode> {
        match self {
            Extraction::Found(code) => Some(code),
            Extraction::NotFound => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, Extraction::Found(_))
    }
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

/// Byte offsets of `keyword` occurrences that stand alone as a token.
pub(crate) fn keyword_positions(text: &str, keyword: &str) -> Vec<usize> {
    let bytes = text.as_bytes();
    text.match_indices(keyword)
        .map(|(i, _)| i)
        .filter(|&i| {
            let before_ok = i == 0 || !is_ident_byte(bytes[i - 1]);
            let end = i + keyword.len();
            let after_ok = end >= bytes.len() || !is_ident_byte(bytes[end]);
            before_ok && after_ok
        })
        .collect()
}

pub(crate) fn contains_keyword(text: &str, keyword: &str) -> bool {
    !keyword_positions(text, keyword).is_empty()
}

fn at_line_start(text: &str, pos: usize) -> bool {
    text[..pos]
        .rsplit('\n')
        .next()
        .map(|prefix| prefix.trim().is_empty())
        .unwrap_or(true)
}

/// `module` ... `endmodule` spans in order of appearance. For each
/// `endmodule`, the span starts at the first unconsumed `module` that opens a
/// line, or at the first unconsumed `module` if none does; prose such as
/// "here is the module:" ahead of the code is therefore skipped. Spans never
/// cross a ``` fence.
fn module_spans(text: &str) -> Vec<&str> {
    let modules = keyword_positions(text, MODULE);
    let ends = keyword_positions(text, ENDMODULE);
    let fences: Vec<usize> = text.match_indices(FENCE).map(|(i, _)| i).collect();
    let mut spans = Vec::new();
    let mut cursor = 0;
    for end in ends {
        if end < cursor {
            continue;
        }
        let floor = fences
            .iter()
            .rev()
            .find(|&&f| f < end)
            .map_or(cursor, |&f| cursor.max(f + FENCE.len()));
        let candidates: Vec<usize> = modules
            .iter()
            .copied()
            .filter(|&m| m >= floor && m < end)
            .collect();
        let Some(&first) = candidates.first() else {
            cursor = end + ENDMODULE.len();
            continue;
        };
        let start = candidates
            .iter()
            .copied()
            .find(|&m| at_line_start(text, m))
            .unwrap_or(first);
        let stop = end + ENDMODULE.len();
        spans.push(&text[start..stop]);
        cursor = stop;
    }
    spans
}

fn has_module_pair(text: &str) -> bool {
    !module_spans(text).is_empty()
}

/// Contents of every closed ``` fence pair, with any language tag removed.
fn fenced_blocks(text: &str) -> Vec<&str> {
    let fences: Vec<usize> = text.match_indices(FENCE).map(|(i, _)| i).collect();
    let mut blocks = Vec::new();
    for pair in fences.chunks_exact(2) {
        let (open, close) = (pair[0], pair[1]);
        let after_open = open + FENCE.len();
        let mut start = after_open;
        if let Some(nl) = text[after_open..close].find('\n') {
            let tag = text[after_open..after_open + nl].trim();
            let is_tag = tag.is_empty()
                || (!tag.contains(char::is_whitespace) && tag != MODULE);
            if is_tag {
                start = after_open + nl + 1;
            }
        }
        blocks.push(text[start..close].trim());
    }
    blocks
}

/// Extract the candidate module source from `response`.
pub fn extract(response: &str) -> Extraction {
    let blocks: Vec<&str> = fenced_blocks(response)
        .into_iter()
        .filter(|b| has_module_pair(b))
        .collect();
    if !blocks.is_empty() {
        return Extraction::Found(ExtractedCode {
            source: blocks.join("\n\n"),
            method: ExtractionMethod::FencedBlock,
            block_count: blocks.len(),
        });
    }
    let spans = module_spans(response);
    if spans.is_empty() {
        return Extraction::NotFound;
    }
    Extraction::Found(ExtractedCode {
        source: spans.join("\n\n"),
        method: ExtractionMethod::ModuleSpan,
        block_count: spans.len(),
    })
}
