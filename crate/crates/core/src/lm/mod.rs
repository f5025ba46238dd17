//! The language-model boundary: a next-token score contract, greedy decoding
//! with the healing constraint, and next-token ranking for single-token
//! metrics.

pub mod oracle;
pub mod wire;

use serde::{Deserialize, Serialize};

pub use oracle::{CopyOracle, NgramOracle, UniformOracle};
pub use wire::{external_model_connect, serve_connection, serve_model, ExternalModel, Message};

use crate::error::{Error, Result};
use crate::tokenizer::{HealingPlan, TokenId, TokenizerSpec};

/// An autoregressive model over a fixed vocabulary.
///
/// `next_log_probs` returns one score per vocabulary entry. Scores may be
/// unnormalized; `f64::NEG_INFINITY` marks impossible tokens.
pub trait LanguageModel {
    fn vocab_size(&self) -> usize;
    fn next_log_probs(&self, prefix: &[TokenId]) -> Result<Vec<f64>>;

    /// Label used in reports.
    fn model_id(&self) -> String {
        "model".to_string()
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_log_probs(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
        (**self).next_log_probs(prefix)
    }
    fn model_id(&self) -> String {
        (**self).model_id()
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for Box<M> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_log_probs(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
        (**self).next_log_probs(prefix)
    }
    fn model_id(&self) -> String {
        (**self).model_id()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Newline,
    MaxTokens,
    HealingDeadEnd,
    ModelError,
}

/// When generation ends, besides `max_tokens`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    /// Stop at the n-th newline of the completion (1 for line completion).
    pub lines: usize,
    pub max_tokens: usize,
}

impl StopRule {
    pub fn line(max_tokens: usize) -> Self {
        StopRule { lines: 1, max_tokens }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub generated_tokens: Vec<TokenId>,
    /// The completion: decoded output after the healed prefix, cut before
    /// the stopping newline.
    pub generated_text: String,
    /// Bytes of the output that re-created the healing suffix.
    pub healed_prefix: String,
    pub stop_reason: StopReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn argmax(scores: &[f64], candidates: impl Iterator<Item = TokenId>) -> Option<TokenId> {
    let mut best: Option<(TokenId, f64)> = None;
    for id in candidates {
        let s = scores[id as usize];
        if s.is_nan() || s == f64::NEG_INFINITY {
            continue;
        }
        // strict comparison keeps the lowest id on ties
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((id, s));
        }
    }
    best.map(|(id, _)| id)
}

/// Greedy decoding from `prompt`, honoring the healing constraint.
///
/// While healing bytes remain, only tokens that are a prefix of the
/// remainder, or that the remainder is a prefix of, are eligible. Once the
/// remainder is consumed decoding is unconstrained. Completion text stops
/// at the `rule.lines`-th newline, which is excluded.
pub fn greedy_complete<M: LanguageModel + ?Sized>(
    model: &M,
    spec: &TokenizerSpec,
    prompt: &[TokenId],
    healing: &HealingPlan,
    rule: StopRule,
) -> Result<DecodeResult> {
    if model.vocab_size() != spec.vocab_size() {
        return Err(Error::Model(format!(
            "model vocabulary has {} entries, tokenizer has {}",
            model.vocab_size(),
            spec.vocab_size()
        )));
    }
    let mut context = prompt.to_vec();
    let mut generated = Vec::new();
    let mut pending: &[u8] = &healing.pending;
    let mut healed: Vec<u8> = Vec::new();
    let mut completion: Vec<u8> = Vec::new();
    let mut newlines = 0;

    let finish = |generated: Vec<TokenId>, healed: &[u8], completion: &[u8], reason, error| DecodeResult {
        generated_tokens: generated,
        generated_text: String::from_utf8_lossy(completion).into_owned(),
        healed_prefix: String::from_utf8_lossy(healed).into_owned(),
        stop_reason: reason,
        error,
    };

    while generated.len() < rule.max_tokens {
        let scores = match model.next_log_probs(&context) {
            Ok(s) if s.len() == spec.vocab_size() => s,
            Ok(s) => {
                let msg = format!("model returned {} scores for {} tokens", s.len(), spec.vocab_size());
                return Ok(finish(
                    generated,
                    &healed,
                    &completion,
                    StopReason::ModelError,
                    Some(msg),
                ));
            }
            Err(e) => {
                return Ok(finish(
                    generated,
                    &healed,
                    &completion,
                    StopReason::ModelError,
                    Some(e.to_string()),
                ))
            }
        };
        let choice = if pending.is_empty() {
            argmax(&scores, 0..scores.len() as TokenId)
        } else {
            argmax(&scores, spec.tokens_compatible_with(pending).into_iter())
        };
        let Some(id) = choice else {
            let reason = if pending.is_empty() {
                StopReason::ModelError
            } else {
                StopReason::HealingDeadEnd
            };
            let msg = (reason == StopReason::ModelError).then(|| "no finite score".to_string());
            return Ok(finish(generated, &healed, &completion, reason, msg));
        };
        generated.push(id);
        context.push(id);
        let mut bytes = spec.token_bytes(id)?;
        if !pending.is_empty() {
            let used = bytes.len().min(pending.len());
            healed.extend_from_slice(&bytes[..used]);
            pending = &pending[used..];
            bytes = &bytes[used..];
        }
        for (i, &b) in bytes.iter().enumerate() {
            if b == b'\n' {
                newlines += 1;
                if newlines >= rule.lines {
                    completion.extend_from_slice(&bytes[..i]);
                    return Ok(finish(generated, &healed, &completion, StopReason::Newline, None));
                }
            }
        }
        completion.extend_from_slice(bytes);
    }
    Ok(finish(generated, &healed, &completion, StopReason::MaxTokens, None))
}

/// Log-probability of `actual` after `prefix` (scores renormalized) and its
/// 1-based rank, ties ordered by token id.
pub fn score_next_token<M: LanguageModel + ?Sized>(
    model: &M,
    prefix: &[TokenId],
    actual: TokenId,
) -> Result<(f64, usize)> {
    let scores = model.next_log_probs(prefix)?;
    let a = actual as usize;
    if a >= scores.len() {
        return Err(Error::TokenOutOfRange {
            id: actual,
            vocab_size: scores.len(),
        });
    }
    let target = scores[a];
    let better = scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| s > target || (s == target && i < a))
        .count();
    Ok((target - log_sum_exp(&scores), better + 1))
}

pub fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln()
}
