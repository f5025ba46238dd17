//! In-context prompt assembly: query from the context tail, retrieved
//! snippets prepended with file metadata, everything fit to a token budget.

use serde::{Deserialize, Serialize};

use crate::chunkstore::RetrievedSnippet;
use crate::error::{Error, Result};
use crate::tokenizer::{TokenId, TokenSequence, TokenizerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RagConfig {
    /// Query length in tokens; matches the database chunk size.
    pub m: usize,
    /// Snippets per prompt; 0 disables retrieval.
    pub k: usize,
    pub context_budget: usize,
    pub include_metadata: bool,
    pub include_continuation: bool,
    pub reserve_for_input: usize,
}

impl Default for RagConfig {
    fn default() -> Self {
        RagConfig {
            m: 64,
            k: 1,
            context_budget: 384,
            include_metadata: true,
            include_continuation: true,
            reserve_for_input: 192,
        }
    }
}

impl RagConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        if self.reserve_for_input == 0 || self.reserve_for_input >= self.context_budget {
            return Err(Error::Config(format!(
                "reserve_for_input ({}) must be in (0, context_budget = {})",
                self.reserve_for_input, self.context_budget
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledPrompt {
    pub tokens: TokenSequence,
    pub snippets_used: Vec<RetrievedSnippet>,
    /// Leading tokens of `tokens` that belong to the snippet block.
    pub snippet_tokens: usize,
    pub input_tokens_kept: usize,
    pub snippets_dropped: usize,
    /// Set when input was cut or any snippet had to be dropped.
    pub truncated: bool,
}

/// The last `m` tokens of the context (all of it when shorter).
pub fn build_query(context: &[TokenId], m: usize) -> &[TokenId] {
    &context[context.len().saturating_sub(m)..]
}

/// `# <path>\n` (optional), key tokens, continuation (optional), `\n`.
pub fn format_snippet(snippet: &RetrievedSnippet, spec: &TokenizerSpec, cfg: &RagConfig) -> TokenSequence {
    let mut out = Vec::new();
    if cfg.include_metadata {
        out.extend(spec.encode_str(&format!("# {}\n", snippet.record.file_path)).0);
    }
    out.extend_from_slice(&snippet.record.key_tokens);
    if cfg.include_continuation {
        out.extend_from_slice(&snippet.record.continuation_tokens);
    }
    out.extend(spec.encode(b"\n").0);
    TokenSequence(out)
}

/// Builds `snippets · input tail`.
///
/// Snippets go best rank first. Whole snippets are dropped from the worst
/// rank until the kept input can hold at least `reserve_for_input` tokens
/// (or all of it, when shorter); the input is then cut from the front to
/// fill what is left of the budget.
pub fn assemble(
    context: &[TokenId],
    snippets: &[RetrievedSnippet],
    spec: &TokenizerSpec,
    cfg: &RagConfig,
) -> Result<AssembledPrompt> {
    cfg.validate()?;
    if cfg.k == 0 {
        let keep = context.len().min(cfg.context_budget);
        return Ok(AssembledPrompt {
            tokens: TokenSequence(context[context.len() - keep..].to_vec()),
            snippets_used: Vec::new(),
            snippet_tokens: 0,
            input_tokens_kept: keep,
            snippets_dropped: 0,
            truncated: keep < context.len(),
        });
    }
    let mut ranked: Vec<&RetrievedSnippet> = snippets.iter().collect();
    ranked.sort_by_key(|s| s.rank);
    ranked.truncate(cfg.k);
    let mut formatted: Vec<TokenSequence> = ranked.iter().map(|s| format_snippet(s, spec, cfg)).collect();

    let min_input = context.len().min(cfg.reserve_for_input);
    let mut block: usize = formatted.iter().map(TokenSequence::len).sum();
    while block + min_input > cfg.context_budget {
        let dropped = formatted.pop().expect("budget exceeds reserve, so dropping ends");
        ranked.pop();
        block -= dropped.len();
    }
    let dropped = snippets.len().min(cfg.k) - formatted.len();
    let keep = context.len().min(cfg.context_budget - block);

    let mut tokens = Vec::with_capacity(block + keep);
    for f in &formatted {
        tokens.extend_from_slice(f);
    }
    tokens.extend_from_slice(&context[context.len() - keep..]);
    Ok(AssembledPrompt {
        tokens: TokenSequence(tokens),
        snippets_used: ranked.into_iter().cloned().collect(),
        snippet_tokens: block,
        input_tokens_kept: keep,
        snippets_dropped: dropped,
        truncated: keep < context.len() || dropped > 0,
    })
}
