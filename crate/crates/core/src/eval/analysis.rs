use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ExampleRecord, RunReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub mean_similarity: f64,
    pub em: f64,
    pub baseline_em: f64,
    pub improved: usize,
    pub worsened: usize,
    pub unchanged: usize,
}

impl BucketRow {
    pub fn improved_fraction(&self) -> f64 {
        frac(self.improved, self.n)
    }

    pub fn worsened_fraction(&self) -> f64 {
        frac(self.worsened, self.n)
    }
}

fn frac(a: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        a as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub n: usize,
    pub buckets: Vec<BucketRow>,
}

/// Splits examples by top retrieved similarity into `[edges[i],
/// edges[i+1])` (the last bucket closed) and compares each bucket with the
/// baseline run. Examples without a similarity count as 0.
pub fn analyze(report: &RunReport, baseline: &RunReport, edges: &[f64]) -> Result<Analysis> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "bucket edges must be at least two strictly increasing values".into(),
        ));
    }
    let base: HashMap<&str, &ExampleRecord> = baseline.examples.iter().map(|r| (r.id.as_str(), r)).collect();
    if base.len() != report.examples.len() || report.examples.iter().any(|r| !base.contains_key(r.id.as_str())) {
        return Err(Error::Dataset("report and baseline cover different examples".into()));
    }
    let last = edges.len() - 2;
    let mut rows: Vec<BucketRow> = edges
        .windows(2)
        .map(|w| BucketRow {
            lo: w[0],
            hi: w[1],
            n: 0,
            mean_similarity: 0.0,
            em: 0.0,
            baseline_em: 0.0,
            improved: 0,
            worsened: 0,
            unchanged: 0,
        })
        .collect();
    for r in &report.examples {
        let s = r.top_similarity.unwrap_or(0.0);
        let Some(i) = (0..=last).find(|&i| s >= edges[i] && (s < edges[i + 1] || (i == last && s <= edges[i + 1])))
        else {
            continue;
        };
        let b = base[r.id.as_str()];
        let row = &mut rows[i];
        row.n += 1;
        row.mean_similarity += s;
        row.em += r.em;
        row.baseline_em += b.em;
        match r.prefix_len.cmp(&b.prefix_len) {
            std::cmp::Ordering::Greater => row.improved += 1,
            std::cmp::Ordering::Less => row.worsened += 1,
            std::cmp::Ordering::Equal => row.unchanged += 1,
        }
    }
    for row in &mut rows {
        if row.n > 0 {
            let n = row.n as f64;
            row.mean_similarity /= n;
            row.em /= n;
            row.baseline_em /= n;
        }
    }
    Ok(Analysis {
        n: report.examples.len(),
        buckets: rows,
    })
}
