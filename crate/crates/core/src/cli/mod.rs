//! Command-line front end. [`main`] returns the process exit code:
//! 0 success, 1 usage, 2 data or validation, 3 model or transport.

mod config;

use std::collections::HashMap;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{builtin_tokenizer, open_model, open_tokenizer, DynModel, EngineConfig};

use crate::chunkstore::{
    build_database, load_database, relative_path, save_database, BuildOptions, HashEmbedding, RetrievalDatabase,
};
use crate::context::RagConfig;
use crate::error::{Error, Result};
use crate::eval::{
    analyze, generate, load_dataset, prepare, run, select_snippets, threshold_sweep, CompletionOptions, EvalMode,
    RetrievalKind, RunConfig, SnippetTrace,
};
use crate::lm::{serve_model, StopReason};
use crate::metrics::ConfidenceInterval;

#[derive(Debug, Parser)]
#[command(
    name = "repocomplete",
    version,
    about = "Retrieval-augmented line completion over local projects"
)]
pub struct Cli {
    /// Engine config file (TOML); flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a retrieval database over a project.
    Index(IndexArgs),
    /// Complete the line at a cursor position.
    Complete(CompleteArgs),
    /// Run an evaluation over a dataset.
    Eval(EvalArgs),
    /// Compare a retrieval report with a no-retrieval baseline by similarity bucket.
    Analyze(AnalyzeArgs),
    /// Serve a model over the line-delimited JSON protocol.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    pub project_root: PathBuf,
    /// Builtin vocabulary name (gpt2, starcoder) or a vocab directory.
    #[arg(long)]
    pub tokenizer: Option<String>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// Also store hash-projection embeddings (dimension defaults to the
    /// config's `embedding_dim`, else 256).
    #[arg(long, value_name = "DIM", num_args = 0..=1)]
    pub embeddings: Option<Option<usize>>,
    /// File extensions to index.
    #[arg(long = "ext", default_values_t = vec!["py".to_string()])]
    pub extensions: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[arg(long)]
    pub db: Option<PathBuf>,
    #[arg(long)]
    pub file: PathBuf,
    /// 1-based line.
    #[arg(long)]
    pub line: usize,
    /// 0-based character column.
    #[arg(long, default_value_t = 0)]
    pub col: usize,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub tokenizer: Option<String>,
    /// Project root, for the file's path inside the database.
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub no_retrieval: bool,
    /// Allow snippets from the file being completed.
    #[arg(long)]
    pub copying: bool,
    #[arg(long)]
    pub no_healing: bool,
    #[arg(long, default_value_t = 128)]
    pub max_tokens: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Manifest file or the directory holding manifest.json.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "line")]
    pub mode: EvalMode,
    #[arg(long, default_value = "jaccard")]
    pub retrieval: RetrievalKind,
    #[arg(long)]
    pub copying: bool,
    /// One threshold, or a comma-separated ascending list for a sweep.
    #[arg(long, value_delimiter = ',')]
    pub threshold: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub tokenizer: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub no_healing: bool,
    #[arg(long)]
    pub exclude_overlap: bool,
    /// Also report perplexity, R@k and MRR over target tokens.
    #[arg(long)]
    pub single_token: bool,
    #[arg(long)]
    pub max_tokens: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub baseline: PathBuf,
    /// Bucket edges, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0])]
    pub buckets: Vec<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub addr: String,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub tokenizer: Option<String>,
}

/// Parses `args`, runs the command and returns the exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = if no_color() {
                e.render().to_string()
            } else {
                e.render().ansi().to_string()
            };
            let _ = if code == 0 {
                write!(stdout, "{rendered}")
            } else {
                write!(stderr, "{rendered}")
            };
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    main_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn no_color() -> bool {
    std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty()) || !std::io::stdout().is_terminal()
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = EngineConfig::load_optional(cli.config.as_deref())?;
    match cli.command {
        Command::Index(a) => cmd_index(&cfg, a, out),
        Command::Complete(a) => cmd_complete(&cfg, a, out),
        Command::Eval(a) => cmd_eval(&cfg, a, out),
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Serve(a) => cmd_serve(&cfg, a, out),
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn tokenizer_name(flag: Option<String>, cfg: &EngineConfig) -> Result<String> {
    flag.or_else(|| cfg.tokenizer.clone())
        .ok_or_else(|| Error::Config("no tokenizer given (--tokenizer or `tokenizer` in the config)".into()))
}

fn rag_config(cfg: &EngineConfig, k: Option<usize>) -> Result<RagConfig> {
    let mut rag = cfg.rag.clone().unwrap_or_default();
    if let Some(m) = cfg.chunk_size {
        if cfg.rag.is_none() {
            rag.m = m;
        }
    }
    if let Some(k) = k {
        rag.k = k;
    }
    rag.validate()?;
    Ok(rag)
}

pub fn cmd_index(cfg: &EngineConfig, a: IndexArgs, out: &mut dyn Write) -> Result<()> {
    let chunk_size = a.chunk_size.or(cfg.chunk_size).unwrap_or(64);
    if chunk_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "--chunk-size must be at least 2, got {chunk_size}"
        )));
    }
    let spec = open_tokenizer(&tokenizer_name(a.tokenizer, cfg)?)?;
    let opts = BuildOptions {
        chunk_size,
        extensions: a.extensions,
    };
    let mut built = build_database(&a.project_root, &spec, &opts)?;
    if let Some(dim) = a.embeddings.map(|d| d.or(cfg.embedding_dim).unwrap_or(256)) {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        built
            .database
            .compute_embeddings(&HashEmbedding::new(dim, cfg.seed.unwrap_or(0), true))?;
    }
    save_database(&built.database, &a.out)?;
    let size = std::fs::metadata(&a.out).map_err(|e| Error::io(&a.out, e))?.len();
    for w in &built.warnings {
        log::warn!("skipped {}: {}", w.path, w.message);
    }
    writeln!(out, "files: {}", built.files_indexed).map_err(io_out)?;
    writeln!(out, "records: {}", built.database.len()).map_err(io_out)?;
    writeln!(out, "tokens: {}", built.database.token_count()).map_err(io_out)?;
    writeln!(out, "size: {size} bytes").map_err(io_out)?;
    if !built.warnings.is_empty() {
        writeln!(out, "warnings: {}", built.warnings.len()).map_err(io_out)?;
    }
    Ok(())
}

/// Byte offset of `(line, col)`, `line` 1-based and `col` in characters.
pub fn cursor_offset(text: &str, line: usize, col: usize) -> Result<usize> {
    let outside = || Error::InvalidArgument(format!("cursor {line}:{col} is outside the file"));
    if line == 0 {
        return Err(outside());
    }
    let mut start = 0;
    for _ in 1..line {
        start += text[start..].find('\n').ok_or_else(outside)? + 1;
    }
    let line_text = text[start..].split('\n').next().unwrap_or("");
    let line_text = line_text.strip_suffix('\r').unwrap_or(line_text);
    if start == text.len() && line > 1 && !text.ends_with('\n') {
        return Err(outside());
    }
    let chars = line_text.chars().count();
    if col > chars {
        return Err(outside());
    }
    Ok(start + line_text.char_indices().nth(col).map_or(line_text.len(), |(b, _)| b))
}

/// The database path of `file`: relative to `root` when given, otherwise
/// the longest database path that `file` ends with.
fn db_path_for(file: &Path, root: Option<&Path>, db: Option<&RetrievalDatabase>) -> String {
    if let Some(root) = root {
        return relative_path(root, file);
    }
    let full = relative_path(Path::new(""), file);
    db.and_then(|db| {
        db.file_paths()
            .iter()
            .filter(|p| full == **p || full.ends_with(&format!("/{p}")))
            .max_by_key(|p| p.len())
            .cloned()
    })
    .unwrap_or(full)
}

#[derive(Debug, Serialize)]
pub struct CompletionOutput {
    pub file: String,
    pub line: usize,
    pub col: usize,
    pub completion: String,
    pub healed_prefix: String,
    pub stop_reason: StopReason,
    pub model_id: String,
    pub tokenizer_id: String,
    pub prompt_tokens: usize,
    pub input_tokens_kept: usize,
    pub truncated: bool,
    pub snippets: Vec<SnippetTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn cmd_complete(cfg: &EngineConfig, a: CompleteArgs, out: &mut dyn Write) -> Result<()> {
    let spec = open_tokenizer(&tokenizer_name(a.tokenizer, cfg)?)?;
    let text = std::fs::read_to_string(&a.file).map_err(|e| Error::io(&a.file, e))?;
    let cut = cursor_offset(&text, a.line, a.col)?;
    let mut rag = rag_config(cfg, a.k)?;
    if a.no_retrieval {
        rag.k = 0;
    }
    let db = match (&a.db, rag.k) {
        (_, 0) => None,
        (Some(p), _) => Some(load_database(p)?),
        (None, _) => return Err(Error::Config("--db is required unless retrieval is off".into())),
    };
    if let Some(db) = &db {
        db.check_tokenizer(&spec)?;
    }
    let embedder = db
        .as_ref()
        .and_then(|d| d.embeddings())
        .and_then(|m| HashEmbedding::from_id(m.provider_id()));
    let opts = CompletionOptions {
        retrieval: if rag.k == 0 {
            RetrievalKind::None
        } else {
            RetrievalKind::Jaccard
        },
        copying_allowed: a.copying,
        rag,
        similarity_threshold: None,
        healing: !a.no_healing,
        max_tokens: a.max_tokens,
    };
    let model = open_model(
        &a.model.or_else(|| cfg.model.clone()).unwrap_or_else(|| "copy".into()),
        &spec,
        &["py".into()],
    )?;
    let file_key = db_path_for(&a.file, a.root.as_deref(), db.as_ref());
    let prepared = prepare(
        &spec,
        db.as_ref(),
        embedder.as_ref().map(|e| e as _),
        &opts,
        &text.as_bytes()[..cut],
        &file_key,
    )?;
    let used = select_snippets(&prepared.retrieved, None);
    let (prompt, result) = generate(&model, &spec, &prepared, &used, &opts, 1)?;
    if a.json {
        let payload = CompletionOutput {
            file: file_key,
            line: a.line,
            col: a.col,
            completion: result.generated_text.clone(),
            healed_prefix: result.healed_prefix.clone(),
            stop_reason: result.stop_reason,
            model_id: model.model_id(),
            tokenizer_id: spec.id().to_string(),
            prompt_tokens: prompt.tokens.len(),
            input_tokens_kept: prompt.input_tokens_kept,
            truncated: prompt.truncated,
            snippets: used.iter().map(SnippetTrace::from).collect(),
            error: result.error.clone(),
        };
        let s = serde_json::to_string_pretty(&payload).expect("completion output serializes");
        writeln!(out, "{s}").map_err(io_out)?;
    } else {
        writeln!(out, "{}", result.generated_text).map_err(io_out)?;
    }
    if result.stop_reason == StopReason::ModelError {
        return Err(Error::Model(result.error.unwrap_or_else(|| "model failed".into())));
    }
    Ok(())
}

fn project_databases(
    dataset: &crate::eval::Dataset,
    spec: &crate::tokenizer::TokenizerSpec,
    chunk_size: usize,
    embedder: Option<&HashEmbedding>,
) -> Result<HashMap<String, RetrievalDatabase>> {
    let mut dbs = HashMap::new();
    for p in &dataset.projects {
        let root = dataset.base.join(&p.root);
        let mut built = build_database(
            &root,
            spec,
            &BuildOptions {
                chunk_size,
                ..BuildOptions::default()
            },
        )?;
        if let Some(e) = embedder {
            built.database.compute_embeddings(e)?;
        }
        dbs.insert(p.id.clone(), built.database);
    }
    Ok(dbs)
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{secs}")
}

struct Table {
    color: bool,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            color: !no_color(),
            rows: vec![header.iter().map(|s| s.to_string()).collect()],
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    fn write(&self, out: &mut dyn Write) -> Result<()> {
        let cols = self.rows[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| self.rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        for (i, r) in self.rows.iter().enumerate() {
            let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let line = line.join("  ");
            let line = line.trim_end();
            if i == 0 && self.color {
                writeln!(out, "\x1b[1m{line}\x1b[0m").map_err(io_out)?;
            } else {
                writeln!(out, "{line}").map_err(io_out)?;
            }
        }
        Ok(())
    }
}

fn ci(c: &ConfidenceInterval) -> String {
    format!("{:.3} [{:.3}, {:.3}]", c.point, c.lo, c.hi)
}

pub fn cmd_eval(cfg: &EngineConfig, a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let mut dataset = load_dataset(&a.dataset)?;
    if a.exclude_overlap {
        dataset = dataset.without_overlap();
    }
    let spec = open_tokenizer(&tokenizer_name(a.tokenizer, cfg)?)?;
    let rag = rag_config(cfg, a.k)?;
    let seed = a.seed.or(cfg.seed);
    if a.mode.randomized() && seed.is_none() {
        return Err(Error::InvalidArgument(format!(
            "--mode {} requires --seed",
            mode_name(a.mode)
        )));
    }
    let run_cfg = RunConfig {
        mode: a.mode,
        retrieval: a.retrieval,
        copying_allowed: a.copying,
        rag: rag.clone(),
        seed,
        similarity_threshold: (a.threshold.len() == 1).then(|| a.threshold[0]),
        healing: !a.no_healing,
        max_tokens: a.max_tokens,
        single_token: a.single_token,
        resamples: 1000,
    };
    run_cfg.validate()?;
    let model = open_model(
        &a.model.or_else(|| cfg.model.clone()).unwrap_or_else(|| "copy".into()),
        &spec,
        &["py".into()],
    )?;
    let embedder = (a.retrieval == RetrievalKind::Embedding)
        .then(|| HashEmbedding::new(cfg.embedding_dim.unwrap_or(256), cfg.seed.unwrap_or(0), true));
    let chunk_size = cfg.chunk_size.unwrap_or(rag.m);
    let dbs = if a.retrieval == RetrievalKind::None {
        HashMap::new()
    } else {
        project_databases(&dataset, &spec, chunk_size, embedder.as_ref())?
    };
    let embedder_dyn = embedder
        .as_ref()
        .map(|e| e as &dyn crate::chunkstore::EmbeddingProvider);

    if a.threshold.len() > 1 {
        let mut sweep = threshold_sweep(&dataset, &model, &spec, &dbs, embedder_dyn, &run_cfg, &a.threshold)?;
        let stamp = timestamp();
        sweep.baseline.timestamp = Some(stamp.clone());
        for r in &mut sweep.rows {
            r.report.timestamp = Some(stamp.clone());
        }
        write_json(&a.out, &sweep)?;
        let mut t = Table::new(&[
            "threshold",
            "with_snippets",
            "EM",
            "ES",
            "PrefixSim",
            "improved",
            "worsened",
        ]);
        let b = &sweep.baseline.metrics;
        t.row(vec![
            "none".into(),
            "0".into(),
            ci(&b.em),
            ci(&b.edit_sim),
            ci(&b.prefix_sim),
            "-".into(),
            "-".into(),
        ]);
        for r in &sweep.rows {
            let m = &r.report.metrics;
            t.row(vec![
                format!("{}", r.threshold),
                r.with_snippets.to_string(),
                ci(&m.em),
                ci(&m.edit_sim),
                ci(&m.prefix_sim),
                r.improved.to_string(),
                r.worsened.to_string(),
            ]);
        }
        t.write(out)?;
        if sweep.rows.iter().any(|r| r.report.failed) {
            return Err(Error::Model("more than 10% of examples failed".into()));
        }
        return Ok(());
    }

    let mut report = run(&dataset, &model, &spec, &dbs, embedder_dyn, &run_cfg)?;
    report.timestamp = Some(timestamp());
    write_json(&a.out, &report)?;
    let m = &report.metrics;
    let mut t = Table::new(&["n", "EM", "ES", "PrefixSim", "failures"]);
    t.row(vec![
        m.n.to_string(),
        ci(&m.em),
        ci(&m.edit_sim),
        ci(&m.prefix_sim),
        report.failures.to_string(),
    ]);
    t.write(out)?;
    if let Some(s) = &m.single_token {
        writeln!(
            out,
            "ppl {:.3}  R@1 {:.3}  R@5 {:.3}  MRR@5 {:.3}",
            s.ppl, s.r1, s.r5, s.mrr5
        )
        .map_err(io_out)?;
    }
    if report.failed {
        return Err(Error::Model(format!("{} of {} examples failed", report.failures, m.n)));
    }
    Ok(())
}

fn mode_name(m: EvalMode) -> &'static str {
    match m {
        EvalMode::Line => "line",
        EvalMode::LineR => "lineR",
        EvalMode::Api => "api",
        EvalMode::ApiR => "apiR",
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn read_report(path: &Path) -> Result<crate::eval::RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::parse(
            path.display().to_string(),
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })
}

pub fn cmd_analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let report = read_report(&a.report)?;
    let baseline = read_report(&a.baseline)?;
    let analysis = analyze(&report, &baseline, &a.buckets)?;
    if a.json {
        let s = serde_json::to_string_pretty(&analysis).expect("analysis serializes");
        writeln!(out, "{s}").map_err(io_out)?;
        return Ok(());
    }
    let mut t = Table::new(&["bucket", "n", "EM", "baseline EM", "improved", "worsened"]);
    for (i, b) in analysis.buckets.iter().enumerate() {
        let close = if i + 1 == analysis.buckets.len() { "]" } else { ")" };
        t.row(vec![
            format!("[{:.2}, {:.2}{close}", b.lo, b.hi),
            b.n.to_string(),
            format!("{:.3}", b.em),
            format!("{:.3}", b.baseline_em),
            format!("{:.3}", b.improved_fraction()),
            format!("{:.3}", b.worsened_fraction()),
        ]);
    }
    t.write(out)
}

pub fn cmd_serve(cfg: &EngineConfig, a: ServeArgs, out: &mut dyn Write) -> Result<()> {
    let spec = open_tokenizer(&tokenizer_name(a.tokenizer, cfg)?)?;
    let model_name = a.model.or_else(|| cfg.model.clone()).unwrap_or_else(|| "copy".into());
    if model_name.starts_with("tcp://") {
        return Err(Error::InvalidArgument("serve needs a local model".into()));
    }
    let model = open_model(&model_name, &spec, &["py".into()])?;
    let listener = std::net::TcpListener::bind(&a.addr)
        .map_err(|e| Error::Protocol(format!("cannot listen on {}: {e}", a.addr)))?;
    let local = listener.local_addr().map_err(|e| Error::Protocol(e.to_string()))?;
    writeln!(out, "serving {} on {local}", model.model_id()).map_err(io_out)?;
    out.flush().map_err(io_out)?;
    serve_model(listener, &*model, Some(spec.id()), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cursor_positions() {
        let text = "ab\ncdé\n";
        assert_eq!(cursor_offset(text, 1, 0).unwrap(), 0);
        assert_eq!(cursor_offset(text, 2, 3).unwrap(), text.len() - 1);
        assert_eq!(cursor_offset(text, 3, 0).unwrap(), text.len());
        assert!(cursor_offset(text, 2, 4).is_err());
        assert!(cursor_offset(text, 4, 0).is_err());
        assert!(cursor_offset(text, 0, 0).is_err());
        assert!(cursor_offset("x", 2, 0).is_err());
    }

    #[test]
    fn usage_errors_exit_1() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(main_with(["repocomplete", "frobnicate"], &mut o, &mut e), 1);
        assert_eq!(main_with(["repocomplete", "--help"], &mut o, &mut e), 0);
    }

    #[test]
    fn db_path_matches_suffix() {
        let db = RetrievalDatabase::from_token_files(
            vec![("pkg/a.py".into(), vec![1, 2]), ("a.py".into(), vec![3])],
            4,
            "t",
        )
        .unwrap();
        assert_eq!(db_path_for(Path::new("/x/proj/pkg/a.py"), None, Some(&db)), "pkg/a.py");
        assert_eq!(db_path_for(Path::new("/x/proj/a.py"), None, Some(&db)), "a.py");
        assert_eq!(
            db_path_for(Path::new("/x/proj/pkg/a.py"), Some(Path::new("/x/proj")), None),
            "pkg/a.py"
        );
    }
}
