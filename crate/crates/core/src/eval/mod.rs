//! Evaluation harness: per-example healing, retrieval, prompt assembly,
//! greedy completion and scoring, with random-cut variants, copying mode
//! and similarity-threshold sweeps.

mod analysis;
mod dataset;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use analysis::{analyze, Analysis, BucketRow};
pub use dataset::{load_dataset, randomize_cut, Dataset, EvalExample, ModeHint, ProjectEntry};

use crate::chunkstore::{EmbeddingProvider, RetrievalDatabase, RetrievedSnippet, ScoreKind};
use crate::context::{assemble, build_query, AssembledPrompt, RagConfig};
use crate::error::{Error, Result};
use crate::lm::{greedy_complete, score_next_token, DecodeResult, LanguageModel, StopReason, StopRule};
use crate::metrics::{BootstrapConfig, MetricsReport, PredictionPair, SingleTokenStats};
use crate::tokenizer::{HealingPlan, TokenId, TokenizerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    #[serde(rename = "line")]
    Line,
    #[serde(rename = "lineR")]
    LineR,
    #[serde(rename = "api")]
    Api,
    #[serde(rename = "apiR")]
    ApiR,
}

impl EvalMode {
    pub fn randomized(self) -> bool {
        matches!(self, EvalMode::LineR | EvalMode::ApiR)
    }

    pub fn multi_line(self) -> bool {
        matches!(self, EvalMode::Api | EvalMode::ApiR)
    }

    pub fn default_max_tokens(self) -> usize {
        if self.multi_line() {
            512
        } else {
            128
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(EvalMode::Line),
            "lineR" => Ok(EvalMode::LineR),
            "api" => Ok(EvalMode::Api),
            "apiR" => Ok(EvalMode::ApiR),
            _ => Err(Error::InvalidArgument(format!(
                "unknown mode `{s}` (line, lineR, api, apiR)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalKind {
    None,
    Jaccard,
    Embedding,
}

impl std::str::FromStr for RetrievalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RetrievalKind::None),
            "jaccard" => Ok(RetrievalKind::Jaccard),
            "embedding" => Ok(RetrievalKind::Embedding),
            _ => Err(Error::InvalidArgument(format!(
                "unknown retrieval `{s}` (none, jaccard, embedding)"
            ))),
        }
    }
}

/// What happens for one completion, independent of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionOptions {
    pub retrieval: RetrievalKind,
    /// Lets snippets come from the file being completed.
    pub copying_allowed: bool,
    pub rag: RagConfig,
    /// Jaccard snippets scoring below this are discarded.
    pub similarity_threshold: Option<f64>,
    pub healing: bool,
    pub max_tokens: usize,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            retrieval: RetrievalKind::Jaccard,
            copying_allowed: false,
            rag: RagConfig::default(),
            similarity_threshold: None,
            healing: true,
            max_tokens: 128,
        }
    }
}

/// Healing and retrieval for one cursor position, before any decoding.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub plan: HealingPlan,
    pub context_tokens: Vec<TokenId>,
    /// Top-k before any similarity threshold.
    pub retrieved: Vec<RetrievedSnippet>,
}

impl Prepared {
    pub fn top_similarity(&self) -> Option<f64> {
        self.retrieved
            .iter()
            .find(|s| s.rank == 1 && s.kind == ScoreKind::Jaccard)
            .map(|s| s.score)
    }
}

/// Heals `context`, then queries `db` with the last `m` tokens of the
/// trimmed context.
pub fn prepare(
    spec: &TokenizerSpec,
    db: Option<&RetrievalDatabase>,
    embedder: Option<&dyn EmbeddingProvider>,
    opts: &CompletionOptions,
    context: &[u8],
    file_path: &str,
) -> Result<Prepared> {
    let plan = if opts.healing {
        spec.compute_healing(context)
    } else {
        HealingPlan::disabled(context)
    };
    let context_tokens = spec.encode(&plan.trimmed_input).into_vec();
    let query = build_query(&context_tokens, opts.rag.m);
    let exclude = (!opts.copying_allowed).then_some(file_path);
    let retrieved = match (opts.retrieval, db) {
        (RetrievalKind::None, _) => Vec::new(),
        _ if opts.rag.k == 0 || query.is_empty() => Vec::new(),
        (_, None) => return Err(Error::InvalidArgument("retrieval requested without a database".into())),
        (RetrievalKind::Jaccard, Some(db)) => {
            db.check_tokenizer(spec)?;
            db.retrieve_jaccard(query, opts.rag.k, exclude)?
        }
        (RetrievalKind::Embedding, Some(db)) => {
            db.check_tokenizer(spec)?;
            let provider =
                embedder.ok_or_else(|| Error::InvalidArgument("embedding retrieval needs a provider".into()))?;
            db.retrieve_embedding(provider, query, opts.rag.k, exclude)?
        }
    };
    Ok(Prepared {
        plan,
        context_tokens,
        retrieved,
    })
}

/// Snippets surviving `threshold`. Distances are never thresholded.
pub fn select_snippets(retrieved: &[RetrievedSnippet], threshold: Option<f64>) -> Vec<RetrievedSnippet> {
    retrieved
        .iter()
        .filter(|s| match (threshold, s.kind) {
            (Some(t), ScoreKind::Jaccard) => s.score >= t,
            _ => true,
        })
        .cloned()
        .collect()
}

/// Assembles the prompt and decodes. `lines` is the newline count that ends
/// generation.
pub fn generate<M: LanguageModel + ?Sized>(
    model: &M,
    spec: &TokenizerSpec,
    prepared: &Prepared,
    snippets: &[RetrievedSnippet],
    opts: &CompletionOptions,
    lines: usize,
) -> Result<(AssembledPrompt, DecodeResult)> {
    let rag = if opts.retrieval == RetrievalKind::None {
        RagConfig {
            k: 0,
            ..opts.rag.clone()
        }
    } else {
        opts.rag.clone()
    };
    let prompt = assemble(&prepared.context_tokens, snippets, spec, &rag)?;
    let rule = StopRule {
        lines: lines.max(1),
        max_tokens: opts.max_tokens,
    };
    let result = greedy_complete(model, spec, &prompt.tokens, &prepared.plan, rule)?;
    Ok((prompt, result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: EvalMode,
    pub retrieval: RetrievalKind,
    #[serde(default)]
    pub copying_allowed: bool,
    #[serde(default)]
    pub rag: RagConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub similarity_threshold: Option<f64>,
    #[serde(default = "yes")]
    pub healing: bool,
    /// Defaults by mode: 128 for line modes, 512 for api modes.
    #[serde(default)]
    pub max_tokens: Option<usize>,
    /// Also score teacher-forced next-token ranks over each target line.
    #[serde(default)]
    pub single_token: bool,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
}

fn yes() -> bool {
    true
}

fn default_resamples() -> usize {
    1000
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: EvalMode::Line,
            retrieval: RetrievalKind::Jaccard,
            copying_allowed: false,
            rag: RagConfig::default(),
            seed: None,
            similarity_threshold: None,
            healing: true,
            max_tokens: None,
            single_token: false,
            resamples: default_resamples(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.rag.validate()?;
        if self.mode.randomized() && self.seed.is_none() {
            return Err(Error::Config(format!("mode {:?} needs a seed", self.mode)));
        }
        if let Some(t) = self.similarity_threshold {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Config(format!("similarity threshold {t} must be >= 0")));
            }
            if self.retrieval == RetrievalKind::None {
                return Err(Error::Config("a similarity threshold needs retrieval enabled".into()));
            }
        }
        if self.max_tokens == Some(0) {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn completion_options(&self) -> CompletionOptions {
        CompletionOptions {
            retrieval: self.retrieval,
            copying_allowed: self.copying_allowed,
            rag: self.rag.clone(),
            similarity_threshold: self.similarity_threshold,
            healing: self.healing,
            max_tokens: self.max_tokens.unwrap_or_else(|| self.mode.default_max_tokens()),
        }
    }

    fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            resamples: self.resamples,
            level: 0.95,
            seed: self.seed.unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnippetTrace {
    pub file_path: String,
    pub chunk_index: u32,
    pub score: f64,
    pub kind: ScoreKind,
    pub rank: usize,
}

impl From<&RetrievedSnippet> for SnippetTrace {
    fn from(s: &RetrievedSnippet) -> Self {
        SnippetTrace {
            file_path: s.record.file_path.clone(),
            chunk_index: s.record.chunk_index,
            score: s.score,
            kind: s.kind,
            rank: s.rank,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub project_id: String,
    pub file_path: String,
    pub line_number: usize,
    pub cut_offset: usize,
    pub target: String,
    pub prediction: String,
    pub healed_prefix: String,
    pub stop_reason: StopReason,
    pub em: f64,
    pub edit_sim: f64,
    pub prefix_len: usize,
    pub target_len: usize,
    pub prompt_tokens: usize,
    pub snippet_tokens: usize,
    pub truncated: bool,
    /// Jaccard score of the best retrieved snippet, before thresholding.
    pub top_similarity: Option<f64>,
    pub snippets: Vec<SnippetTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Examples per similarity bucket `[i/10, (i+1)/10)`, the last bucket
/// closed at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Examples with no Jaccard retrieval.
    pub unscored: usize,
}

pub const HISTOGRAM_BUCKETS: usize = 10;

pub fn bucket_of(similarity: f64, buckets: usize) -> usize {
    ((similarity * buckets as f64).floor().max(0.0) as usize).min(buckets - 1)
}

impl SimilarityHistogram {
    pub fn from_records(records: &[ExampleRecord]) -> Self {
        let mut counts = vec![0; HISTOGRAM_BUCKETS];
        let mut unscored = 0;
        for r in records {
            match r.top_similarity {
                Some(s) => counts[bucket_of(s, HISTOGRAM_BUCKETS)] += 1,
                None => unscored += 1,
            }
        }
        SimilarityHistogram {
            edges: (0..=HISTOGRAM_BUCKETS)
                .map(|i| i as f64 / HISTOGRAM_BUCKETS as f64)
                .collect(),
            counts,
            unscored,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub config: RunConfig,
    pub metrics: MetricsReport,
    pub examples: Vec<ExampleRecord>,
    pub histogram: SimilarityHistogram,
    pub failures: usize,
    /// More than 10% of examples failed.
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// Dataset examples as evaluated under `mode`: random-cut modes move a
/// seeded prefix of the target into the context.
pub fn effective_examples(dataset: &Dataset, cfg: &RunConfig) -> Vec<EvalExample> {
    dataset
        .examples
        .iter()
        .map(|e| match (cfg.mode.randomized(), cfg.seed) {
            (true, Some(seed)) => randomize_cut(e, seed),
            _ => e.clone(),
        })
        .collect()
}

fn stop_lines(mode: EvalMode, example: &EvalExample) -> usize {
    if mode.multi_line() {
        example.target_lines()
    } else {
        1
    }
}

fn check_databases(
    examples: &[EvalExample],
    spec: &TokenizerSpec,
    dbs: &HashMap<String, RetrievalDatabase>,
    cfg: &RunConfig,
) -> Result<()> {
    if cfg.retrieval == RetrievalKind::None || cfg.rag.k == 0 {
        return Ok(());
    }
    let projects: HashSet<&str> = examples.iter().map(|e| e.project_id.as_str()).collect();
    for p in projects {
        let db = dbs
            .get(p)
            .ok_or_else(|| Error::Dataset(format!("no retrieval database for project `{p}`")))?;
        db.check_tokenizer(spec)?;
        if db.chunk_size() != cfg.rag.m {
            log::warn!(
                "project {p}: database chunk size {} differs from query length {}",
                db.chunk_size(),
                cfg.rag.m
            );
        }
    }
    Ok(())
}

/// Teacher-forced ranks of the first target line's tokens after the prompt.
fn single_token_stats<M: LanguageModel + ?Sized>(
    model: &M,
    spec: &TokenizerSpec,
    prompt: &[TokenId],
    target: &str,
) -> Result<SingleTokenStats> {
    let line = target.split('\n').next().unwrap_or("");
    let ids = spec.encode_str(line);
    let mut stats = SingleTokenStats::default();
    let mut prefix = prompt.to_vec();
    for &t in ids.iter().take(128) {
        let (lp, rank) = score_next_token(model, &prefix, t)?;
        stats.push(lp, rank);
        prefix.push(t);
    }
    Ok(stats)
}

struct Outcome {
    record: ExampleRecord,
    single: SingleTokenStats,
}

fn record_for(
    example: &EvalExample,
    prepared: &Prepared,
    used: &[RetrievedSnippet],
    prompt: &AssembledPrompt,
    result: &DecodeResult,
) -> ExampleRecord {
    let pair = PredictionPair::new(&result.generated_text, &example.target);
    ExampleRecord {
        id: example.id.clone(),
        project_id: example.project_id.clone(),
        file_path: example.file_path.clone(),
        line_number: example.line_number,
        cut_offset: example.cut_offset,
        target: example.target.clone(),
        prediction: result.generated_text.clone(),
        healed_prefix: result.healed_prefix.clone(),
        stop_reason: result.stop_reason,
        em: pair.exact_match(),
        edit_sim: pair.edit_similarity(),
        prefix_len: pair.prefix_len(),
        target_len: pair.target_len(),
        prompt_tokens: prompt.tokens.len(),
        snippet_tokens: prompt.snippet_tokens,
        truncated: prompt.truncated,
        top_similarity: prepared.top_similarity(),
        snippets: used.iter().map(SnippetTrace::from).collect(),
        error: result.error.clone(),
    }
}

fn finish_report(dataset: &Dataset, model_id: String, cfg: &RunConfig, outcomes: Vec<Outcome>) -> Result<RunReport> {
    let mut examples = Vec::with_capacity(outcomes.len());
    let mut single = SingleTokenStats::default();
    for o in outcomes {
        single.log_probs.extend(o.single.log_probs);
        single.ranks.extend(o.single.ranks);
        examples.push(o.record);
    }
    let ids: Vec<String> = examples.iter().map(|r| r.id.clone()).collect();
    let pairs: Vec<PredictionPair> = examples
        .iter()
        .map(|r| PredictionPair::new(&r.prediction, &r.target))
        .collect();
    let metrics = MetricsReport::from_pairs(
        dataset.name.clone(),
        model_id,
        &ids,
        &pairs,
        cfg.single_token.then_some(&single),
        &cfg.bootstrap(),
    )?;
    let failures = examples.iter().filter(|r| r.error.is_some()).count();
    Ok(RunReport {
        dataset: dataset.name.clone(),
        config: cfg.clone(),
        metrics,
        histogram: SimilarityHistogram::from_records(&examples),
        failed: failures * 10 > examples.len(),
        failures,
        examples,
        timestamp: None,
    })
}

/// Evaluates every example. Examples run in parallel; the report keeps
/// dataset order.
pub fn run<M: LanguageModel + Sync + ?Sized>(
    dataset: &Dataset,
    model: &M,
    spec: &TokenizerSpec,
    dbs: &HashMap<String, RetrievalDatabase>,
    embedder: Option<&dyn EmbeddingProvider>,
    cfg: &RunConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    let examples = effective_examples(dataset, cfg);
    check_databases(&examples, spec, dbs, cfg)?;
    let opts = cfg.completion_options();
    let outcomes: Vec<Outcome> = examples
        .par_iter()
        .map(|ex| {
            let prepared = prepare(
                spec,
                dbs.get(&ex.project_id),
                embedder,
                &opts,
                ex.context_text.as_bytes(),
                &ex.file_path,
            )?;
            let used = select_snippets(&prepared.retrieved, opts.similarity_threshold);
            let (prompt, result) = generate(model, spec, &prepared, &used, &opts, stop_lines(cfg.mode, ex))?;
            let single = if cfg.single_token {
                single_token_stats(model, spec, &prompt.tokens, &ex.target)?
            } else {
                SingleTokenStats::default()
            };
            Ok(Outcome {
                record: record_for(ex, &prepared, &used, &prompt, &result),
                single,
            })
        })
        .collect::<Result<_>>()?;
    finish_report(dataset, model.model_id(), cfg, outcomes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    /// Examples with at least one snippet in the prompt.
    pub with_snippets: usize,
    /// Prefix match longer than the no-retrieval baseline.
    pub improved: usize,
    pub worsened: usize,
    pub unchanged: usize,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset: String,
    pub baseline: RunReport,
    pub rows: Vec<SweepRow>,
}

/// One row per threshold plus a no-retrieval baseline. Retrieval runs once
/// per example and the model once per distinct snippet set.
pub fn threshold_sweep<M: LanguageModel + Sync + ?Sized>(
    dataset: &Dataset,
    model: &M,
    spec: &TokenizerSpec,
    dbs: &HashMap<String, RetrievalDatabase>,
    embedder: Option<&dyn EmbeddingProvider>,
    cfg: &RunConfig,
    thresholds: &[f64],
) -> Result<SweepReport> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("thresholds must be sorted ascending".into()));
    }
    if cfg.retrieval == RetrievalKind::None {
        return Err(Error::Config("a threshold sweep needs retrieval enabled".into()));
    }
    let base_cfg = RunConfig {
        similarity_threshold: None,
        ..cfg.clone()
    };
    base_cfg.validate()?;
    for &t in thresholds {
        RunConfig {
            similarity_threshold: Some(t),
            ..cfg.clone()
        }
        .validate()?;
    }
    let examples = effective_examples(dataset, &base_cfg);
    check_databases(&examples, spec, dbs, &base_cfg)?;
    let opts = base_cfg.completion_options();

    let prepared: Vec<Prepared> = examples
        .par_iter()
        .map(|ex| {
            prepare(
                spec,
                dbs.get(&ex.project_id),
                embedder,
                &opts,
                ex.context_text.as_bytes(),
                &ex.file_path,
            )
        })
        .collect::<Result<_>>()?;

    // distinct snippet sets per example; the empty set is the baseline
    let sets: Vec<Vec<Vec<RetrievedSnippet>>> = prepared
        .iter()
        .map(|p| {
            let mut v: Vec<Vec<RetrievedSnippet>> = vec![Vec::new()];
            for &t in thresholds {
                let s = select_snippets(&p.retrieved, Some(t));
                if !v.iter().any(|x| same_records(x, &s)) {
                    v.push(s);
                }
            }
            v
        })
        .collect();
    let jobs: Vec<(usize, usize)> = sets
        .iter()
        .enumerate()
        .flat_map(|(i, v)| (0..v.len()).map(move |j| (i, j)))
        .collect();
    let done: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let ex = &examples[i];
            let used = &sets[i][j];
            let (prompt, result) = generate(model, spec, &prepared[i], used, &opts, stop_lines(cfg.mode, ex))?;
            let single = if cfg.single_token {
                single_token_stats(model, spec, &prompt.tokens, &ex.target)?
            } else {
                SingleTokenStats::default()
            };
            Ok(Outcome {
                record: record_for(ex, &prepared[i], used, &prompt, &result),
                single,
            })
        })
        .collect::<Result<_>>()?;
    let cache: HashMap<(usize, usize), Outcome> = jobs.into_iter().zip(done).collect();
    let take = |i: usize, j: usize| {
        let o = &cache[&(i, j)];
        Outcome {
            record: o.record.clone(),
            single: o.single.clone(),
        }
    };

    let baseline_cfg = RunConfig {
        retrieval: RetrievalKind::None,
        similarity_threshold: None,
        ..cfg.clone()
    };
    let baseline_outcomes: Vec<Outcome> = (0..examples.len()).map(|i| take(i, 0)).collect();
    let baseline = finish_report(dataset, model.model_id(), &baseline_cfg, baseline_outcomes)?;

    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let outcomes: Vec<Outcome> = (0..examples.len())
            .map(|i| {
                let s = select_snippets(&prepared[i].retrieved, Some(t));
                let j = sets[i]
                    .iter()
                    .position(|x| same_records(x, &s))
                    .expect("set was cached");
                take(i, j)
            })
            .collect();
        let row_cfg = RunConfig {
            similarity_threshold: Some(t),
            ..cfg.clone()
        };
        let report = finish_report(dataset, model.model_id(), &row_cfg, outcomes)?;
        let (improved, worsened, unchanged) = compare(&report.examples, &baseline.examples);
        rows.push(SweepRow {
            threshold: t,
            with_snippets: report.examples.iter().filter(|r| !r.snippets.is_empty()).count(),
            improved,
            worsened,
            unchanged,
            report,
        });
    }
    Ok(SweepReport {
        dataset: dataset.name.clone(),
        baseline,
        rows,
    })
}

fn same_records(a: &[RetrievedSnippet], b: &[RetrievedSnippet]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.record_index == y.record_index)
}

/// `(improved, worsened, unchanged)` by common-prefix length, pairing
/// records by position.
pub fn compare(report: &[ExampleRecord], baseline: &[ExampleRecord]) -> (usize, usize, usize) {
    let mut out = (0, 0, 0);
    for (r, b) in report.iter().zip(baseline) {
        match r.prefix_len.cmp(&b.prefix_len) {
            std::cmp::Ordering::Greater => out.0 += 1,
            std::cmp::Ordering::Less => out.1 += 1,
            std::cmp::Ordering::Equal => out.2 += 1,
        }
    }
    out
}
