//! Completion metrics: perplexity, R@k and MRR over next-token ranks;
//! exact match, edit similarity and prefix similarity over strings; BCa
//! bootstrap intervals for the aggregates.

mod bootstrap;
mod report;

use serde::{Deserialize, Serialize};

pub use bootstrap::{bca_interval, bca_mean, BootstrapConfig, ConfidenceInterval};
pub use report::{ExampleScore, MetricsReport, SingleTokenSummary};

use crate::error::{Error, Result};

/// Per-position next-token log-probabilities and 1-based ranks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SingleTokenStats {
    pub log_probs: Vec<f64>,
    pub ranks: Vec<usize>,
}

impl SingleTokenStats {
    pub fn new(log_probs: Vec<f64>, ranks: Vec<usize>) -> Result<Self> {
        if log_probs.len() != ranks.len() {
            return Err(Error::InvalidArgument(format!(
                "{} log-probs but {} ranks",
                log_probs.len(),
                ranks.len()
            )));
        }
        if ranks.contains(&0) {
            return Err(Error::InvalidArgument("ranks are 1-based".into()));
        }
        Ok(SingleTokenStats { log_probs, ranks })
    }

    pub fn push(&mut self, log_prob: f64, rank: usize) {
        self.log_probs.push(log_prob);
        self.ranks.push(rank);
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("no positions to score".into()));
        }
        Ok(())
    }
}

/// `exp(-mean log p)`.
pub fn perplexity(stats: &SingleTokenStats) -> Result<f64> {
    stats.require_nonempty()?;
    if let Some(lp) = stats.log_probs.iter().find(|&&lp| lp > 0.0 || lp.is_nan()) {
        return Err(Error::InvalidArgument(format!("log-probability {lp} is not <= 0")));
    }
    let mean = stats.log_probs.iter().sum::<f64>() / stats.len() as f64;
    Ok((-mean).exp())
}

/// Fraction of positions whose rank is at most `k`.
pub fn recall_at_k(stats: &SingleTokenStats, k: usize) -> Result<f64> {
    stats.require_nonempty()?;
    let hits = stats.ranks.iter().filter(|&&r| r <= k).count();
    Ok(hits as f64 / stats.len() as f64)
}

/// Mean reciprocal rank, ranks beyond `k` counting 0.
pub fn mrr_at_k(stats: &SingleTokenStats, k: usize) -> Result<f64> {
    stats.require_nonempty()?;
    let sum: f64 = stats.ranks.iter().filter(|&&r| r <= k).map(|&r| 1.0 / r as f64).sum();
    Ok(sum / stats.len() as f64)
}

/// A prediction and its target, both trimmed of surrounding whitespace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionPair {
    predicted: Vec<char>,
    target: Vec<char>,
}

impl PredictionPair {
    pub fn new(predicted: &str, target: &str) -> Self {
        PredictionPair {
            predicted: predicted.trim().chars().collect(),
            target: target.trim().chars().collect(),
        }
    }

    pub fn predicted(&self) -> String {
        self.predicted.iter().collect()
    }

    pub fn target(&self) -> String {
        self.target.iter().collect()
    }

    /// Target length in characters.
    pub fn target_len(&self) -> usize {
        self.target.len()
    }

    pub fn exact_match(&self) -> f64 {
        if self.predicted == self.target {
            1.0
        } else {
            0.0
        }
    }

    pub fn edit_similarity(&self) -> f64 {
        edit_similarity_chars(&self.predicted, &self.target)
    }

    /// `|pi(s, t)|`: length of the common prefix, in characters.
    pub fn prefix_len(&self) -> usize {
        self.predicted
            .iter()
            .zip(&self.target)
            .take_while(|(a, b)| a == b)
            .count()
    }
}

/// Levenshtein distance over `char`s.
pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn edit_similarity_chars(s: &[char], t: &[char]) -> f64 {
    let longest = s.len().max(t.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(s, t) as f64 / longest as f64
}

/// `1 - lev(s, t) / max(|s|, |t|)` on untrimmed input; two empty strings
/// score 1.
pub fn edit_similarity(s: &str, t: &str) -> f64 {
    let s: Vec<char> = s.chars().collect();
    let t: Vec<char> = t.chars().collect();
    edit_similarity_chars(&s, &t)
}

/// Mean exact match.
pub fn exact_match_rate(pairs: &[PredictionPair]) -> f64 {
    mean(pairs.iter().map(PredictionPair::exact_match))
}

/// Mean edit similarity.
pub fn edit_similarity_mean(pairs: &[PredictionPair]) -> f64 {
    mean(pairs.iter().map(PredictionPair::edit_similarity))
}

/// `sum |pi(s, t)| / sum |t|` over all pairs. Not the mean of per-pair
/// ratios.
pub fn prefix_similarity_aggregate(pairs: &[PredictionPair]) -> Result<f64> {
    let total: usize = pairs.iter().map(PredictionPair::target_len).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("targets have zero total length".into()));
    }
    let matched: usize = pairs.iter().map(PredictionPair::prefix_len).sum();
    Ok(matched as f64 / total as f64)
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        return 0.0;
    }
    xs.sum::<f64>() / n as f64
}
