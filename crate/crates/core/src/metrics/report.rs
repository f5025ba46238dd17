use serde::{Deserialize, Serialize};

use super::bootstrap::{bca_interval, BootstrapConfig, ConfidenceInterval};
use super::{mrr_at_k, perplexity, recall_at_k, PredictionPair, SingleTokenStats};
use crate::error::Result;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTokenSummary {
    pub ppl: f64,
    pub r1: f64,
    pub r5: f64,
    pub mrr5: f64,
}

impl SingleTokenSummary {
    pub fn from_stats(stats: &SingleTokenStats) -> Result<Self> {
        Ok(SingleTokenSummary {
            ppl: perplexity(stats)?,
            r1: recall_at_k(stats, 1)?,
            r5: recall_at_k(stats, 5)?,
            mrr5: mrr_at_k(stats, 5)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub id: String,
    pub em: f64,
    pub edit_sim: f64,
    /// Common-prefix length in characters.
    pub prefix_len: usize,
    pub target_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub model_id: String,
    pub n: usize,
    pub em: ConfidenceInterval,
    pub edit_sim: ConfidenceInterval,
    pub prefix_sim: ConfidenceInterval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_token: Option<SingleTokenSummary>,
    pub per_example: Vec<ExampleScore>,
}

fn mean_of(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn ratio_of(items: &[(f64, f64)]) -> f64 {
    let (num, den) = items.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn interval<T: Clone + Sync>(
    items: &[T],
    stat: impl Fn(&[T]) -> f64 + Sync,
    cfg: &BootstrapConfig,
    label: &str,
) -> Result<ConfidenceInterval> {
    if items.len() < 2 {
        return Ok(ConfidenceInterval::degenerate(stat(items), cfg));
    }
    let cfg = BootstrapConfig {
        seed: derive_seed(cfg.seed, label),
        ..*cfg
    };
    bca_interval(items, stat, &cfg)
}

impl MetricsReport {
    /// Scores `pairs` (parallel to `ids`) and bootstraps each aggregate.
    /// With fewer than two examples the intervals collapse to the point.
    pub fn from_pairs(
        dataset: impl Into<String>,
        model_id: impl Into<String>,
        ids: &[String],
        pairs: &[PredictionPair],
        single_token: Option<&SingleTokenStats>,
        cfg: &BootstrapConfig,
    ) -> Result<Self> {
        assert_eq!(ids.len(), pairs.len(), "one id per pair");
        let per_example: Vec<ExampleScore> = ids
            .iter()
            .zip(pairs)
            .map(|(id, p)| ExampleScore {
                id: id.clone(),
                em: p.exact_match(),
                edit_sim: p.edit_similarity(),
                prefix_len: p.prefix_len(),
                target_len: p.target_len(),
            })
            .collect();
        let em: Vec<f64> = per_example.iter().map(|e| e.em).collect();
        let es: Vec<f64> = per_example.iter().map(|e| e.edit_sim).collect();
        let ps: Vec<(f64, f64)> = per_example
            .iter()
            .map(|e| (e.prefix_len as f64, e.target_len as f64))
            .collect();
        Ok(MetricsReport {
            dataset: dataset.into(),
            model_id: model_id.into(),
            n: pairs.len(),
            em: interval(&em, mean_of, cfg, "em")?,
            edit_sim: interval(&es, mean_of, cfg, "edit_sim")?,
            prefix_sim: interval(&ps, ratio_of, cfg, "prefix_sim")?,
            single_token: single_token
                .filter(|s| !s.is_empty())
                .map(SingleTokenSummary::from_stats)
                .transpose()?,
            per_example,
        })
    }
}
