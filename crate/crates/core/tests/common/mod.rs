//! Synthetic Python projects and evaluation datasets for integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use repocomplete::chunkstore::{build_database, BuildOptions, RetrievalDatabase};
use repocomplete::eval::{load_dataset, Dataset};
use repocomplete::seed::rng_for;
use repocomplete::TokenizerSpec;

pub fn vocab_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/vocab").join(name)
}

pub fn gpt2() -> TokenizerSpec {
    repocomplete::load_tokenizer(vocab_dir("gpt2")).expect("gpt2 vocab")
}

pub fn starcoder() -> TokenizerSpec {
    repocomplete::load_tokenizer(vocab_dir("starcoder")).expect("starcoder vocab")
}

const WORDS: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "count", "total", "index", "value", "cache", "node", "item", "buffer", "score",
    "path", "name", "limit", "offset", "result", "record", "token", "chunk", "query", "batch", "frame", "layer",
    "weight", "state", "queue", "graph", "edge", "vertex", "matrix", "vector", "window", "stream", "packet", "header",
    "field", "entry", "table", "column", "row", "shard", "epoch", "signal", "sample", "rate", "scale", "bound", "mask",
    "flag", "level", "depth", "width", "height", "parent", "child", "owner", "config", "option", "handle", "target",
    "source", "report", "metric",
];

const CALLS: &[&str] = &[
    "len", "sorted", "sum", "max", "min", "abs", "round", "list", "tuple", "set", "dict", "str", "int",
];

pub struct Gen {
    pub rng: ChaCha8Rng,
    /// Restricts `word` to these when non-empty.
    pub pool: Vec<&'static str>,
}

impl Gen {
    pub fn new(seed: u64, label: &str) -> Self {
        Gen {
            rng: rng_for(seed, label),
            pool: Vec::new(),
        }
    }

    pub fn word(&mut self) -> &'static str {
        if self.pool.is_empty() {
            WORDS.choose(&mut self.rng).unwrap()
        } else {
            self.pool.choose(&mut self.rng).unwrap()
        }
    }

    pub fn ident(&mut self) -> String {
        match self.rng.gen_range(0..3) {
            0 => self.word().to_string(),
            _ => format!("{}_{}", self.word(), self.word()),
        }
    }

    fn number(&mut self) -> u32 {
        *[0u32, 1, 2, 3, 4, 8, 10, 16, 32, 64, 100, 255]
            .choose(&mut self.rng)
            .unwrap()
    }

    fn operand(&mut self, vars: &[String]) -> String {
        if self.rng.gen_bool(0.7) {
            vars.choose(&mut self.rng).unwrap().clone()
        } else {
            self.number().to_string()
        }
    }

    /// One statement at `indent`, possibly introducing a new variable.
    fn statement(&mut self, indent: &str, vars: &mut Vec<String>, out: &mut Vec<String>) {
        let a = self.operand(vars);
        let b = self.operand(vars);
        let v = self.ident();
        match self.rng.gen_range(0..8) {
            0 => out.push(format!("{indent}{v} = {}({a}, {b})", self.ident())),
            1 => out.push(format!("{indent}{v} = {a} * {b} + {}", self.number())),
            2 => {
                out.push(format!("{indent}if {a} > {b}:"));
                out.push(format!(
                    "{indent}    {v} = {}({a})",
                    CALLS.choose(&mut self.rng).unwrap()
                ));
                out.push(format!("{indent}else:"));
                out.push(format!("{indent}    {v} = {b} - {}", self.number()));
            }
            3 => {
                let i = self.word().chars().next().unwrap().to_string();
                out.push(format!("{indent}{v} = []"));
                out.push(format!("{indent}for {i} in range({}):", self.number()));
                out.push(format!("{indent}    {v}.append({i} * {a})"));
            }
            4 => out.push(format!("{indent}{v} = [x for x in {a} if x != {b}]")),
            5 => out.push(format!("{indent}{v} = self.{}.get({a}, {b})", self.ident())),
            6 => out.push(format!(
                "{indent}{v} = {{\"{}\": {a}, \"{}\": {b}}}",
                self.word(),
                self.word()
            )),
            _ => out.push(format!(
                "{indent}{v} = {}({a}) // max(1, {b})",
                CALLS.choose(&mut self.rng).unwrap()
            )),
        }
        vars.push(v);
    }

    /// A top-level function of `body` statements, ending in a return.
    pub fn function(&mut self, body: usize) -> Vec<String> {
        let name = self.ident();
        let mut vars: Vec<String> = (0..self.rng.gen_range(1..4)).map(|_| self.ident()).collect();
        vars.dedup();
        let mut out = vec![format!("def {name}({}):", vars.join(", "))];
        for _ in 0..body {
            self.statement("    ", &mut vars, &mut out);
        }
        let r = vars.last().unwrap().clone();
        out.push(format!("    return {r}"));
        out
    }

    pub fn header(&mut self) -> Vec<String> {
        let mut out = Vec::new();
        for m in ["os", "sys", "json", "math", "itertools", "collections"].choose_multiple(&mut self.rng, 2) {
            out.push(format!("import {m}"));
        }
        out.push(String::new());
        out.push(format!("{} = {}", self.ident().to_uppercase(), self.number()));
        out.push(String::new());
        out
    }

    /// A module of `functions` functions, separated by blank lines.
    pub fn module(&mut self, functions: usize) -> String {
        let mut lines = self.header();
        for _ in 0..functions {
            let body = self.rng.gen_range(3..9);
            lines.extend(self.function(body));
            lines.push(String::new());
            lines.push(String::new());
        }
        lines.join("\n")
    }

    /// Replaces every identifier-like word of `line` with a fresh one, keeping
    /// indentation and punctuation.
    pub fn rename(&mut self, line: &str) -> String {
        let mut out = String::new();
        let mut word = String::new();
        let flush = |word: &mut String, out: &mut String, g: &mut Gen| {
            if !word.is_empty() {
                let keep = [
                    "def", "return", "if", "else", "for", "in", "range", "self", "get", "append", "x", "max",
                ];
                if keep.contains(&word.as_str()) || word.chars().all(|c| c.is_ascii_digit()) {
                    out.push_str(word);
                } else {
                    out.push_str(&g.ident());
                }
                word.clear();
            }
        };
        for c in line.chars() {
            if c.is_ascii_alphanumeric() || c == '_' {
                word.push(c);
            } else {
                flush(&mut word, &mut out, self);
                out.push(c);
            }
        }
        flush(&mut word, &mut out, self);
        out
    }
}

pub struct Project {
    pub id: String,
    pub files: Vec<(String, String)>,
}

/// `(project, file, 1-based line, target)`
pub type Marked = (String, String, usize, String);

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub dataset: Dataset,
}

/// Writes projects plus a manifest and loads them back as a dataset.
pub fn write_dataset(projects: &[Project], examples: &[Marked]) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    write_dataset_at(dir.path(), projects, examples);
    let dataset = load_dataset(dir.path()).expect("fixture dataset loads");
    Fixture { dir, dataset }
}

pub fn write_dataset_at(root: &Path, projects: &[Project], examples: &[Marked]) {
    let mut entries = Vec::new();
    for p in projects {
        for (path, text) in &p.files {
            let full = root.join("projects").join(&p.id).join(path);
            std::fs::create_dir_all(full.parent().unwrap()).unwrap();
            std::fs::write(full, text).unwrap();
        }
        entries.push(json!({"id": p.id, "root": format!("projects/{}", p.id), "overlap_flag": false}));
    }
    std::fs::write(
        root.join("manifest.json"),
        serde_json::to_string_pretty(&json!({"projects": entries})).unwrap(),
    )
    .unwrap();
    let lines: Vec<String> = examples
        .iter()
        .map(|(p, f, l, t)| {
            let hint = if t.contains('\n') { "api" } else { "line" };
            json!({"project_id": p, "file_path": f, "line_number": l, "mode_hint": hint, "target": t}).to_string()
        })
        .collect();
    std::fs::write(root.join("examples.jsonl"), lines.join("\n") + "\n").unwrap();
}

pub fn databases(dataset: &Dataset, spec: &TokenizerSpec, chunk_size: usize) -> HashMap<String, RetrievalDatabase> {
    let opts = BuildOptions {
        chunk_size,
        ..BuildOptions::default()
    };
    dataset
        .projects
        .iter()
        .map(|p| {
            let root = dataset.base.join(&p.root);
            (p.id.clone(), build_database(&root, spec, &opts).unwrap().database)
        })
        .collect()
}

fn is_candidate(line: &str) -> bool {
    let t = line.trim();
    line.starts_with("    ") && t.len() >= 8 && !t.starts_with("def ") && t != "else:"
}

/// Projects whose evaluated file `pkg/core.py` has every function duplicated
/// verbatim in `pkg/core_copy.py`, next to unrelated modules. Marked lines
/// are function-body lines that occur once in `core.py`.
pub fn copy_corpus(seed: u64, projects: usize, per_project: usize) -> (Vec<Project>, Vec<Marked>) {
    let mut all = Vec::new();
    let mut marked = Vec::new();
    for p in 0..projects {
        let mut g = Gen::new(seed, &format!("copy/{p}"));
        let id = format!("proj{p:02}");
        let mut core = g.header();
        let mut functions = Vec::new();
        for _ in 0..6 {
            let body = g.rng.gen_range(5..9);
            let f = g.function(body);
            core.extend(f.iter().cloned());
            core.extend([String::new(), String::new()]);
            functions.push(f);
        }
        let mut copy = g.header();
        let mut order: Vec<usize> = (0..functions.len()).collect();
        order.shuffle(&mut g.rng);
        for i in order {
            copy.extend(g.function(4));
            copy.extend([String::new(), String::new()]);
            copy.extend(functions[i].iter().cloned());
            copy.extend([String::new(), String::new()]);
        }
        let core_text = core.join("\n");
        let mut candidates: Vec<(usize, String)> = core
            .iter()
            .enumerate()
            .filter(|(i, l)| {
                is_candidate(l)
                    && core.iter().filter(|x| x == l).count() == 1
                    && *i > 1
                    && core[i - 2..*i].iter().all(|x| x.starts_with("    "))
            })
            .map(|(i, l)| (i + 1, l.clone()))
            .collect();
        candidates.shuffle(&mut g.rng);
        candidates.truncate(per_project);
        candidates.sort();
        for (line, target) in candidates {
            marked.push((id.clone(), "pkg/core.py".to_string(), line, target));
        }
        all.push(Project {
            id,
            files: vec![
                ("pkg/core.py".into(), core_text),
                ("pkg/core_copy.py".into(), copy.join("\n")),
                ("pkg/misc.py".into(), g.module(4)),
                ("main.py".into(), g.module(2)),
            ],
        });
    }
    (all, marked)
}

/// `n` files of `functions` functions each.
pub fn code_files(seed: u64, n: usize, functions: usize) -> Vec<(String, String)> {
    (0..n)
        .map(|i| {
            let mut g = Gen::new(seed, &format!("file/{i}"));
            (format!("pkg{}/mod_{i:04}.py", i % 10), g.module(functions))
        })
        .collect()
}

/// Projects whose sibling `pkg/core_variant.py` holds a variant of every
/// function in `pkg/core.py`. Project `p` renames a fraction
/// `(p % 5) / 4` of the variant's lines, always including the marked ones
/// unless the variant is verbatim, so projects span similarity levels.
///
/// Every other function of `core.py` is preceded by a verbatim legacy copy
/// and a filler function. Marked lines in those functions sit 270 to 360
/// tokens after their copy: inside a 384-token window without snippets,
/// beyond it once a snippet takes its share. Half of the marked lines come
/// from such functions.
pub fn similarity_corpus(
    seed: u64,
    projects: usize,
    per_project: usize,
    spec: &TokenizerSpec,
) -> (Vec<Project>, Vec<Marked>) {
    let tokens = |lines: &[String]| spec.encode(lines.join("\n").as_bytes()).len();
    let mut all = Vec::new();
    let mut marked = Vec::new();
    for p in 0..projects {
        let rate = (p % 5) as f64 / 4.0;
        let mut g = Gen::new(seed, &format!("similar/{p}"));
        let id = format!("proj{p:02}");
        let mut core = g.header();
        g.pool = WORDS.choose_multiple(&mut g.rng, 5).copied().collect();
        // (span of the function, start of its legacy copy)
        let mut spans = Vec::new();
        for f in 0..6 {
            let body = g.rng.gen_range(5..9);
            let fun = g.function(body);
            let mut legacy = None;
            if f % 2 == 0 {
                let mut copy = fun.clone();
                copy[0] = copy[0].replacen('(', "_legacy(", 1);
                legacy = Some(core.len());
                core.extend(copy);
                core.extend([String::new(), String::new()]);
                let body = g.rng.gen_range(6..12);
                core.extend(g.function(body));
                core.extend([String::new(), String::new()]);
            }
            spans.push((core.len()..core.len() + fun.len(), legacy));
            core.extend(fun);
            core.extend([String::new(), String::new()]);
        }
        let mut copied = Vec::new();
        let mut fresh = Vec::new();
        for (span, legacy) in &spans {
            for i in span.clone() {
                let line = &core[i];
                if !is_candidate(line) || !core[i - 2..i].iter().all(|x| x.starts_with("    ")) {
                    continue;
                }
                let count = core.iter().filter(|x| *x == line).count();
                match legacy {
                    Some(l) => {
                        let d = tokens(&core[l + (i - span.start)..i]);
                        if count == 2 && (270..=360).contains(&d) {
                            copied.push(i);
                        }
                    }
                    None if count == 1 => fresh.push(i),
                    None => {}
                }
            }
        }
        copied.shuffle(&mut g.rng);
        fresh.shuffle(&mut g.rng);
        copied.truncate(per_project * 3 / 4);
        fresh.truncate(per_project - copied.len());
        let mut candidates: Vec<usize> = copied.into_iter().chain(fresh).collect();
        candidates.sort();
        let targets: HashSet<usize> = candidates.iter().copied().collect();
        g.pool.clear();

        let mut variant = g.header();
        for (span, _) in &spans {
            for i in span.clone() {
                let line = &core[i];
                let renamed = rate > 0.0 && (targets.contains(&i) || g.rng.gen_bool(rate));
                variant.push(if renamed { g.rename(line) } else { line.clone() });
            }
            variant.extend([String::new(), String::new()]);
        }
        for &i in &candidates {
            marked.push((id.clone(), "pkg/core.py".to_string(), i + 1, core[i].clone()));
        }
        all.push(Project {
            id,
            files: vec![
                ("pkg/core.py".into(), core.join("\n")),
                ("pkg/core_variant.py".into(), variant.join("\n")),
                ("pkg/misc.py".into(), g.module(4)),
            ],
        });
    }
    (all, marked)
}
