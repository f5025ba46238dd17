//! Deterministic stand-in models. None of them learns anything; they exist
//! to exercise decoding, retrieval and metrics end to end without weights.

use std::collections::HashMap;

use super::LanguageModel;
use crate::error::Result;
use crate::tokenizer::TokenId;

/// The same score for every token, `-ln |V|`.
#[derive(Debug, Clone)]
pub struct UniformOracle {
    vocab_size: usize,
}

impl UniformOracle {
    pub fn new(vocab_size: usize) -> Self {
        UniformOracle { vocab_size }
    }
}

impl LanguageModel for UniformOracle {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_log_probs(&self, _prefix: &[TokenId]) -> Result<Vec<f64>> {
        Ok(vec![-(self.vocab_size as f64).ln(); self.vocab_size])
    }

    fn model_id(&self) -> String {
        "uniform-oracle".into()
    }
}

/// Predicts the token that followed the longest earlier occurrence of the
/// prefix's suffix.
///
/// Every earlier position whose preceding tokens match the current suffix
/// for `L >= 1` tokens votes for the token after it with score `L` plus a
/// recency bonus below 1, so the longest match wins and the most recent one
/// breaks ties. Tokens without a vote score 0 (the uniform fallback).
#[derive(Debug, Clone)]
pub struct CopyOracle {
    vocab_size: usize,
    max_match: usize,
}

impl CopyOracle {
    pub fn new(vocab_size: usize) -> Self {
        CopyOracle {
            vocab_size,
            max_match: 256,
        }
    }

    /// `(token, score)` votes, without the dense vector.
    pub fn votes(&self, prefix: &[TokenId]) -> HashMap<TokenId, f64> {
        let n = prefix.len();
        let mut votes: HashMap<TokenId, f64> = HashMap::new();
        if n < 2 {
            return votes;
        }
        let last = n - 1;
        for j in 0..last {
            let mut len = 0;
            while len < self.max_match && len <= j && prefix[j - len] == prefix[last - len] {
                len += 1;
            }
            if len == 0 {
                continue;
            }
            let score = len as f64 + 0.5 * (j + 1) as f64 / n as f64;
            let e = votes.entry(prefix[j + 1]).or_insert(0.0);
            if score > *e {
                *e = score;
            }
        }
        votes
    }
}

impl LanguageModel for CopyOracle {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_log_probs(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let mut scores = vec![0.0; self.vocab_size];
        for (t, s) in self.votes(prefix) {
            if let Some(x) = scores.get_mut(t as usize) {
                *x = s;
            }
        }
        Ok(scores)
    }

    fn model_id(&self) -> String {
        "copy-oracle".into()
    }
}

type Counts = HashMap<Vec<TokenId>, (f64, HashMap<TokenId, f64>)>;

fn count_into(counts: &mut Counts, seq: &[TokenId], order: usize, weight: f64) {
    for i in 0..seq.len() {
        for k in 1..order {
            if k > i {
                break;
            }
            let e = counts.entry(seq[i - k..i].to_vec()).or_default();
            e.0 += weight;
            *e.1.entry(seq[i]).or_insert(0.0) += weight;
        }
    }
}

/// Order-n counts with stupid backoff, from a fixed corpus plus a cache of
/// the prefix being completed (so text placed in the prompt, such as
/// retrieved snippets, shifts predictions).
#[derive(Debug, Clone)]
pub struct NgramOracle {
    vocab_size: usize,
    order: usize,
    backoff: f64,
    cache_weight: f64,
    unigrams: Vec<f64>,
    unigram_total: f64,
    counts: Counts,
}

impl NgramOracle {
    pub const DEFAULT_ORDER: usize = 4;
    pub const DEFAULT_BACKOFF: f64 = 0.4;

    pub fn new(vocab_size: usize, order: usize) -> Self {
        NgramOracle {
            vocab_size,
            order: order.max(1),
            backoff: Self::DEFAULT_BACKOFF,
            cache_weight: 1.0,
            unigrams: vec![0.0; vocab_size],
            unigram_total: 0.0,
            counts: Counts::new(),
        }
    }

    pub fn from_corpus<'a>(vocab_size: usize, order: usize, corpus: impl IntoIterator<Item = &'a [TokenId]>) -> Self {
        let mut m = Self::new(vocab_size, order);
        for seq in corpus {
            m.add_sequence(seq);
        }
        m
    }

    pub fn with_cache_weight(mut self, w: f64) -> Self {
        self.cache_weight = w;
        self
    }

    pub fn add_sequence(&mut self, seq: &[TokenId]) {
        for &t in seq {
            if let Some(u) = self.unigrams.get_mut(t as usize) {
                *u += 1.0;
                self.unigram_total += 1.0;
            }
        }
        count_into(&mut self.counts, seq, self.order, 1.0);
    }
}

impl LanguageModel for NgramOracle {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_log_probs(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let v = self.vocab_size as f64;
        let w = self.cache_weight;
        let mut uni = self.unigrams.clone();
        let mut total = self.unigram_total;
        for &t in prefix {
            if let Some(u) = uni.get_mut(t as usize) {
                *u += w;
                total += w;
            }
        }
        // add-one unigram base keeps every score finite
        let mut scores: Vec<f64> = uni.iter().map(|c| (c + 1.0) / (total + v)).collect();

        for k in 1..self.order.min(prefix.len() + 1) {
            let ctx = &prefix[prefix.len() - k..];
            let base = self.counts.get(ctx);
            let mut seen: HashMap<TokenId, f64> = HashMap::new();
            let mut ctx_total = 0.0;
            if let Some(b) = base {
                ctx_total += b.0;
                for (t, c) in &b.1 {
                    *seen.entry(*t).or_insert(0.0) += c;
                }
            }
            // occurrences of the context earlier in the prefix itself
            for i in k..prefix.len() {
                if &prefix[i - k..i] == ctx {
                    ctx_total += w;
                    *seen.entry(prefix[i]).or_insert(0.0) += w;
                }
            }
            scores.iter_mut().for_each(|s| *s *= self.backoff);
            if ctx_total == 0.0 {
                continue;
            }
            for (t, c) in seen {
                if let Some(s) = scores.get_mut(t as usize) {
                    *s = c / ctx_total;
                }
            }
        }
        Ok(scores.into_iter().map(f64::ln).collect())
    }

    fn model_id(&self) -> String {
        format!("ngram-oracle(n={})", self.order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn greedy(m: &impl LanguageModel, prompt: &[TokenId], steps: usize) -> Vec<TokenId> {
        let mut ctx = prompt.to_vec();
        for _ in 0..steps {
            let s = m.next_log_probs(&ctx).unwrap();
            let best = (0..s.len()).fold(0, |b, i| if s[i] > s[b] { i } else { b });
            ctx.push(best as TokenId);
        }
        ctx[prompt.len()..].to_vec()
    }

    #[test]
    fn copy_oracle_reproduces_repeated_text() {
        let m = CopyOracle::new(100);
        // P = 1 2 3 4 5 6, then context "9 1 2" should continue 3 4 5 6
        let out = greedy(&m, &[1, 2, 3, 4, 5, 6, 9, 1, 2], 4);
        assert_eq!(out, [3, 4, 5, 6]);
    }

    #[test]
    fn copy_oracle_prefers_longer_match() {
        let m = CopyOracle::new(100);
        // "7 2" -> 50 (match length 2) beats "2" -> 60 (length 1, more recent)
        let out = greedy(&m, &[7, 2, 50, 8, 2, 60, 7, 2], 1);
        assert_eq!(out, [50]);
    }

    #[test]
    fn copy_oracle_falls_back_to_uniform() {
        let m = CopyOracle::new(10);
        assert!(m.next_log_probs(&[1, 2, 3]).unwrap().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn ngram_follows_corpus_and_cache() {
        let corpus: Vec<TokenId> = vec![1, 2, 3, 1, 2, 3, 1, 2, 3];
        let m = NgramOracle::from_corpus(10, 3, [corpus.as_slice()]);
        assert_eq!(greedy(&m, &[1, 2], 1), [3]);
        // the prompt itself teaches 4 5 -> 6
        let m = NgramOracle::new(10, 3);
        assert_eq!(greedy(&m, &[4, 5, 6, 0, 4, 5], 1), [6]);
        assert!(m.next_log_probs(&[]).unwrap().iter().all(|s| s.is_finite()));
    }
}
