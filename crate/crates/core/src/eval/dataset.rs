//! Evaluation datasets: a manifest of project snapshots plus a JSONL file of
//! marked lines.
//!
//! ```text
//! manifest.json  {"projects": [{"id": "p1", "root": "p1", "overlap_flag": false}],
//!                 "examples": "examples.jsonl"}
//! examples.jsonl {"project_id": "p1", "file_path": "pkg/a.py", "line_number": 12,
//!                 "mode_hint": "line", "target": "    return x"}
//! ```
//!
//! Project roots are relative to the manifest. `line_number` is 1-based and
//! the target must start at column 0 of that line.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectEntry {
    pub id: String,
    pub root: PathBuf,
    #[serde(default)]
    pub overlap_flag: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    projects: Vec<ProjectEntry>,
    #[serde(default)]
    examples: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeHint {
    Line,
    Api,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExample {
    project_id: String,
    file_path: String,
    line_number: usize,
    #[serde(default = "default_hint")]
    mode_hint: ModeHint,
    target: String,
}

fn default_hint() -> ModeHint {
    ModeHint::Line
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalExample {
    /// `project/file:line`, unique within a dataset.
    pub id: String,
    pub project_id: String,
    pub file_path: String,
    pub line_number: usize,
    pub mode_hint: ModeHint,
    /// Character offset within the line where completion starts.
    pub cut_offset: usize,
    pub target: String,
    pub context_text: String,
}

impl EvalExample {
    /// Lines in the target, counting a final line without `\n`.
    pub fn target_lines(&self) -> usize {
        self.target.trim_end_matches('\n').split('\n').count().max(1)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    /// Directory the manifest lives in.
    pub base: PathBuf,
    pub projects: Vec<ProjectEntry>,
    pub examples: Vec<EvalExample>,
}

impl Dataset {
    pub fn project(&self, id: &str) -> Option<&ProjectEntry> {
        self.projects.iter().find(|p| p.id == id)
    }

    pub fn project_root(&self, id: &str) -> Option<PathBuf> {
        self.project(id).map(|p| self.base.join(&p.root))
    }

    /// Drops projects flagged as overlapping with model training data, and
    /// their examples.
    pub fn without_overlap(mut self) -> Self {
        let flagged: HashSet<String> = self
            .projects
            .iter()
            .filter(|p| p.overlap_flag)
            .map(|p| p.id.clone())
            .collect();
        self.projects.retain(|p| !flagged.contains(&p.id));
        self.examples.retain(|e| !flagged.contains(&e.project_id));
        self
    }
}

fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    }
}

/// Loads and validates a dataset from a manifest file or its directory.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_file = manifest_path(path.as_ref());
    let text = std::fs::read_to_string(&manifest_file).map_err(|e| Error::io(&manifest_file, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
        Error::parse(
            manifest_file.display().to_string(),
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let base = manifest_file.parent().map(Path::to_path_buf).unwrap_or_default();
    let examples_file = base.join(manifest.examples.clone().unwrap_or_else(|| "examples.jsonl".into()));
    let jsonl = std::fs::read_to_string(&examples_file).map_err(|e| Error::io(&examples_file, e))?;
    let name = base
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    build_dataset(name, base, manifest.projects, &jsonl, &examples_file)
}

fn build_dataset(
    name: String,
    base: PathBuf,
    projects: Vec<ProjectEntry>,
    jsonl: &str,
    examples_file: &Path,
) -> Result<Dataset> {
    let mut ids = HashSet::new();
    for p in &projects {
        if !ids.insert(p.id.clone()) {
            return Err(Error::Dataset(format!("project `{}` listed twice", p.id)));
        }
        let root = base.join(&p.root);
        if !root.is_dir() {
            return Err(Error::Dataset(format!(
                "project `{}`: {} is not a directory",
                p.id,
                root.display()
            )));
        }
    }
    let roots: HashMap<&str, PathBuf> = projects.iter().map(|p| (p.id.as_str(), base.join(&p.root))).collect();
    let mut files: HashMap<PathBuf, String> = HashMap::new();
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    let mut problems = Vec::new();

    for (i, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExample = serde_json::from_str(line).map_err(|e| {
            Error::parse(
                examples_file.display().to_string(),
                format!("line {} column {}", i + 1, e.column()),
                e.to_string(),
            )
        })?;
        let Some(root) = roots.get(raw.project_id.as_str()) else {
            return Err(Error::Dataset(format!(
                "example on line {}: unknown project `{}`",
                i + 1,
                raw.project_id
            )));
        };
        let full = root.join(&raw.file_path);
        if !files.contains_key(&full) {
            match std::fs::read_to_string(&full) {
                Ok(t) => {
                    files.insert(full.clone(), t);
                }
                Err(e) => {
                    problems.push(format!("{}:{}: cannot read file: {e}", raw.file_path, raw.line_number));
                    continue;
                }
            }
        }
        let content = &files[&full];
        match locate(content, raw.line_number, &raw.target) {
            Ok(start) => {
                let id = format!("{}/{}:{}", raw.project_id, raw.file_path, raw.line_number);
                if !seen.insert(id.clone()) {
                    problems.push(format!("{id}: duplicate example"));
                    continue;
                }
                examples.push(EvalExample {
                    id,
                    project_id: raw.project_id,
                    file_path: raw.file_path,
                    line_number: raw.line_number,
                    mode_hint: raw.mode_hint,
                    cut_offset: 0,
                    target: raw.target,
                    context_text: content[..start].to_string(),
                });
            }
            Err(msg) => problems.push(format!("{}:{}: {msg}", raw.file_path, raw.line_number)),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Dataset(format!(
            "{} invalid example(s):\n  {}",
            problems.len(),
            problems.join("\n  ")
        )));
    }
    Ok(Dataset {
        name,
        base,
        projects,
        examples,
    })
}

/// Byte offset of the start of `line_number` when `target` begins there.
fn locate(content: &str, line_number: usize, target: &str) -> std::result::Result<usize, String> {
    if line_number == 0 {
        return Err("line numbers are 1-based".into());
    }
    if target.trim().is_empty() {
        return Err("target is empty".into());
    }
    let mut start = 0;
    for _ in 1..line_number {
        match content[start..].find('\n') {
            Some(p) => start += p + 1,
            None => return Err(format!("file has fewer than {line_number} lines")),
        }
    }
    if content[start..].starts_with(target) {
        Ok(start)
    } else {
        let actual = content[start..].lines().next().unwrap_or("");
        Err(format!("target not found at line start (line reads {actual:?})"))
    }
}

/// Moves a uniformly drawn prefix of the target's first line into the
/// context. The cut is a character offset in `[0, len)`, so at least one
/// character is left to predict; it depends only on `(seed, example.id)`.
pub fn randomize_cut(example: &EvalExample, seed: u64) -> EvalExample {
    let first_line = example.target.split('\n').next().unwrap_or("");
    let chars = first_line.chars().count();
    if chars <= 1 {
        return example.clone();
    }
    let cut = rng_for(seed, &format!("cut/{}", example.id)).gen_range(0..chars);
    let byte = first_line.char_indices().nth(cut).map_or(first_line.len(), |(b, _)| b);
    let mut out = example.clone();
    out.cut_offset = cut;
    out.context_text.push_str(&example.target[..byte]);
    out.target = example.target[byte..].to_string();
    out
}
