//! Benchmark problems stored one per directory.
//!
//! ```text
//! <root>/<id>/prompt.v   design prompt: description + module skeleton
//! <root>/<id>/tb.v       self-checking testbench
//! <root>/<id>/meta       optional `key=value` lines, `#` comments
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::contains_keyword;

pub const PROMPT_FILE: &str = "prompt.v";
pub const TESTBENCH_FILE: &str = "tb.v";
pub const META_FILE: &str = "meta";
pub const DEFAULT_TOP_MODULE: &str = "top_module";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("{0} is empty")]
    EmptyPrompt(String),
    #[error("invalid meta at line {line}: {reason}")]
    InvalidMeta { line: usize, reason: String },
    #[error("{0} is not valid UTF-8")]
    InvalidUtf8(String),
    #[error("{file} has no `module` declaration")]
    NoModule { file: String },
    #[error("no problem directory under {0} could be loaded")]
    EmptyCorpus(PathBuf),
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// One benchmark unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub category_major: String,
    pub category_minor: String,
    pub design_prompt: String,
    pub testbench_source: String,
    pub top_module_name: String,
}

/// Result of loading a corpus root: the problems that loaded, sorted by id,
/// plus the directories that did not.
#[derive(Debug)]
pub struct Corpus {
    pub problems: Vec<Problem>,
    pub errors: Vec<(PathBuf, CorpusError)>,
}

impl Corpus {
    pub fn get(&self, id: &str) -> Option<&Problem> {
        self.problems
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.problems[i])
    }
}

#[derive(Debug, Default)]
struct Meta {
    category_major: Option<String>,
    category_minor: Option<String>,
    top_module: Option<String>,
}

fn parse_meta(text: &str) -> Result<Meta, CorpusError> {
    let mut meta = Meta::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let (key, value) = line.split_once('=').ok_or_else(|| CorpusError::InvalidMeta {
            line: lineno,
            reason: format!("expected key=value, got {line:?}"),
        })?;
        let key = key.trim();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(CorpusError::InvalidMeta {
                line: lineno,
                reason: "empty key".into(),
            });
        }
        match key {
            "category_major" => meta.category_major = Some(value),
            "category_minor" => meta.category_minor = Some(value),
            "top_module" => {
                if value.is_empty() {
                    return Err(CorpusError::InvalidMeta {
                        line: lineno,
                        reason: "top_module must not be empty".into(),
                    });
                }
                meta.top_module = Some(value)
            }
            // Unknown keys are tolerated so corpora can carry extra annotations.
            _ => {}
        }
    }
    Ok(meta)
}

fn read_utf8(path: &Path, name: &str) -> Result<String, CorpusError> {
    let bytes = fs::read(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => CorpusError::MissingFile(name.to_string()),
        _ => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
    })?;
    String::from_utf8(bytes).map_err(|_| CorpusError::InvalidUtf8(name.to_string()))
}

/// Load a single problem directory. The id is the directory's base name.
pub fn load_problem(dir: &Path) -> Result<Problem, CorpusError> {
    if !dir.is_dir() {
        return Err(CorpusError::MissingFile(dir.display().to_string()));
    }
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .filter(|n| !n.is_empty())
        .ok_or_else(|| CorpusError::MissingFile(dir.display().to_string()))?
        .to_string();

    let prompt_path = dir.join(PROMPT_FILE);
    let tb_path = dir.join(TESTBENCH_FILE);
    // Report both missing files in a stable order: prompt first.
    if !prompt_path.is_file() {
        return Err(CorpusError::MissingFile(PROMPT_FILE.into()));
    }
    if !tb_path.is_file() {
        return Err(CorpusError::MissingFile(TESTBENCH_FILE.into()));
    }

    let design_prompt = read_utf8(&prompt_path, PROMPT_FILE)?;
    if design_prompt.trim().is_empty() {
        return Err(CorpusError::EmptyPrompt(PROMPT_FILE.into()));
    }
    if !contains_keyword(&design_prompt, "module") {
        return Err(CorpusError::NoModule {
            file: PROMPT_FILE.into(),
        });
    }
    let testbench_source = read_utf8(&tb_path, TESTBENCH_FILE)?;
    if !contains_keyword(&testbench_source, "module") {
        return Err(CorpusError::NoModule {
            file: TESTBENCH_FILE.into(),
        });
    }

    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.is_file() {
        parse_meta(&read_utf8(&meta_path, META_FILE)?)?
    } else {
        Meta::default()
    };

    Ok(Problem {
        id,
        category_major: meta.category_major.unwrap_or_default(),
        category_minor: meta.category_minor.unwrap_or_default(),
        design_prompt,
        testbench_source,
        top_module_name: meta
            .top_module
            .unwrap_or_else(|| DEFAULT_TOP_MODULE.to_string()),
    })
}

/// Load every immediate subdirectory of `root`. Directories that fail to load
/// are collected into [`Corpus::errors`] instead of aborting the whole load.
pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::MissingFile(root.display().to_string()));
    }
    let entries = fs::read_dir(root).map_err(|source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();

    let mut problems = Vec::new();
    let mut errors = Vec::new();
    for dir in dirs {
        match load_problem(&dir) {
            Ok(p) => problems.push(p),
            Err(e) => errors.push((dir, e)),
        }
    }
    if problems.is_empty() {
        return Err(CorpusError::EmptyCorpus(root.to_path_buf()));
    }
    problems.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Corpus { problems, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    const PROMPT: &str = "// Join six 5-bit vectors.\nmodule top_module (\n    input [4:0] a, b, c, d, e, f,\n    output [7:0] w, x, y, z );\n";
    const TB: &str = "module tb;\n  top_module dut();\nendmodule\n";

    fn write_problem(root: &Path, id: &str, files: &[(&str, &str)]) -> PathBuf {
        let dir = root.join(id);
        fs::create_dir_all(&dir).unwrap();
        for (name, body) in files {
            fs::write(dir.join(name), body).unwrap();
        }
        dir
    }

    #[test]
    fn loads_problem_with_defaults() {
        let tmp = TempDir::new().unwrap();
        let dir = write_problem(tmp.path(), "vector_concat", &[("prompt.v", PROMPT), ("tb.v", TB)]);
        let p = load_problem(&dir).unwrap();
        assert_eq!(p.id, "vector_concat");
        assert_eq!(p.top_module_name, "top_module");
        assert_eq!(p.design_prompt, PROMPT);
        assert_eq!(p.category_major, "");
    }

    #[test]
    fn missing_testbench() {
        let tmp = TempDir::new().unwrap();
        let dir = write_problem(tmp.path(), "p", &[("prompt.v", PROMPT)]);
        match load_problem(&dir) {
            Err(CorpusError::MissingFile(f)) => assert_eq!(f, "tb.v"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn meta_top_module() {
        let tmp = TempDir::new().unwrap();
        let dir = write_problem(
            tmp.path(),
            "adder",
            &[
                ("prompt.v", PROMPT),
                ("tb.v", TB),
                ("meta", "# comment\ncategory_major = Comb. Circuits\ntop_module=adder4\n"),
            ],
        );
        let p = load_problem(&dir).unwrap();
        assert_eq!(p.top_module_name, "adder4");
        assert_eq!(p.category_major, "Comb. Circuits");
    }

    #[test]
    fn invalid_meta_reports_line() {
        let tmp = TempDir::new().unwrap();
        let dir = write_problem(
            tmp.path(),
            "p",
            &[("prompt.v", PROMPT), ("tb.v", TB), ("meta", "# c\n\ncategory_major=x\nbogus line\n")],
        );
        match load_problem(&dir) {
            Err(CorpusError::InvalidMeta { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_prompt_rejected() {
        let tmp = TempDir::new().unwrap();
        let dir = write_problem(tmp.path(), "p", &[("prompt.v", "  \n\t\n"), ("tb.v", TB)]);
        assert!(matches!(load_problem(&dir), Err(CorpusError::EmptyPrompt(_))));
    }

    #[test]
    fn prompt_without_module_rejected() {
        let tmp = TempDir::new().unwrap();
        let dir = write_problem(tmp.path(), "p", &[("prompt.v", "// endmodule only\n"), ("tb.v", TB)]);
        assert!(matches!(load_problem(&dir), Err(CorpusError::NoModule { .. })));
    }

    #[test]
    fn invalid_utf8_is_an_error() {
        let tmp = TempDir::new().unwrap();
        let dir = write_problem(tmp.path(), "p", &[("tb.v", TB)]);
        fs::write(dir.join("prompt.v"), b"module m\xff\xfe;").unwrap();
        assert!(matches!(load_problem(&dir), Err(CorpusError::InvalidUtf8(_))));
    }

    #[test]
    fn corpus_sorted_with_partial_failures() {
        let tmp = TempDir::new().unwrap();
        write_problem(tmp.path(), "mux", &[("prompt.v", PROMPT), ("tb.v", TB)]);
        write_problem(tmp.path(), "and", &[("prompt.v", PROMPT), ("tb.v", TB)]);
        write_problem(tmp.path(), "broken", &[("prompt.v", PROMPT)]);
        let corpus = load_corpus(tmp.path()).unwrap();
        let ids: Vec<_> = corpus.problems.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["and", "mux"]);
        assert_eq!(corpus.errors.len(), 1);
        assert!(corpus.errors[0].0.ends_with("broken"));
        assert!(corpus.get("mux").is_some());
        assert!(corpus.get("broken").is_none());
    }

    #[test]
    fn three_valid_dirs() {
        let tmp = TempDir::new().unwrap();
        for id in ["c", "a", "b"] {
            write_problem(tmp.path(), id, &[("prompt.v", PROMPT), ("tb.v", TB)]);
        }
        let corpus = load_corpus(tmp.path()).unwrap();
        assert_eq!(corpus.problems.len(), 3);
        assert!(corpus.errors.is_empty());
        assert!(corpus.problems.windows(2).all(|w| w[0].id < w[1].id));
    }

    #[test]
    fn empty_root_is_empty_corpus() {
        let tmp = TempDir::new().unwrap();
        assert!(matches!(load_corpus(tmp.path()), Err(CorpusError::EmptyCorpus(_))));
    }

    #[test]
    fn missing_root() {
        let tmp = TempDir::new().unwrap();
        let missing = tmp.path().join("nope");
        assert!(matches!(load_corpus(&missing), Err(CorpusError::MissingFile(_))));
    }

    #[test]
    fn deterministic_load() {
        let tmp = TempDir::new().unwrap();
        let dir = write_problem(tmp.path(), "p", &[("prompt.v", PROMPT), ("tb.v", TB)]);
        assert_eq!(load_problem(&dir).unwrap(), load_problem(&dir).unwrap());
    }
}
