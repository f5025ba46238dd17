use std::cmp::Ordering;

use super::{RetrievalDatabase, RetrievedSnippet, ScoreKind};
use crate::error::{Error, Result};
use crate::tokenizer::TokenId;

/// `|Q ∩ R| / |Q ∪ R|` over two ascending, deduplicated id slices.
/// Two empty sets have similarity 0.
pub fn jaccard(q: &[TokenId], r: &[TokenId]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < q.len() && j < r.len() {
        match q[i].cmp(&r[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = q.len() + r.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Descending score, then ascending record index (which is path, chunk order).
pub(super) fn by_score_desc(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

pub(super) fn top_k<F>(mut cands: Vec<(f64, usize)>, k: usize, cmp: F) -> Vec<(f64, usize)>
where
    F: Fn(&(f64, usize), &(f64, usize)) -> Ordering,
{
    if cands.len() > k {
        cands.select_nth_unstable_by(k - 1, &cmp);
        cands.truncate(k);
    }
    cands.sort_by(cmp);
    cands
}

impl RetrievalDatabase {
    /// The `k` records whose key token sets are most Jaccard-similar to the
    /// distinct tokens of `query`, skipping records from `exclude_file`.
    ///
    /// Only records sharing a token with the query are scored; zero-score
    /// records fill the remainder in `(path, chunk)` order when fewer than
    /// `k` records overlap.
    pub fn retrieve_jaccard(
        &self,
        query: &[TokenId],
        k: usize,
        exclude_file: Option<&str>,
    ) -> Result<Vec<RetrievedSnippet>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        if query.is_empty() {
            return Err(Error::InvalidArgument("query is empty".into()));
        }
        let mut q = query.to_vec();
        q.sort_unstable();
        q.dedup();
        let excluded = self.excluded_file(exclude_file);

        let mut counts = vec![0u32; self.records.len()];
        let mut touched = Vec::new();
        for &t in &q {
            let Some(list) = self.postings.get(t as usize) else {
                continue;
            };
            for &r in list {
                let c = &mut counts[r as usize];
                if *c == 0 {
                    touched.push(r);
                }
                *c += 1;
            }
        }
        let qn = q.len();
        let cands: Vec<(f64, usize)> = touched
            .iter()
            .map(|&r| r as usize)
            .filter(|&r| Some(self.record_file[r]) != excluded)
            .map(|r| {
                let inter = counts[r] as usize;
                let union = qn + self.records[r].key_token_set.len() - inter;
                (inter as f64 / union as f64, r)
            })
            .collect();
        let mut best = top_k(cands, k, by_score_desc);
        if best.len() < k {
            let fill = (0..self.records.len())
                .filter(|&r| counts[r] == 0 && Some(self.record_file[r]) != excluded)
                .take(k - best.len())
                .map(|r| (0.0, r));
            best.extend(fill.collect::<Vec<_>>());
        }
        Ok(best
            .into_iter()
            .enumerate()
            .map(|(i, (score, r))| self.snippet(r, score, ScoreKind::Jaccard, i + 1))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db() -> RetrievalDatabase {
        RetrievalDatabase::from_token_files(
            vec![
                ("a.py".into(), vec![1, 2, 3, 4, 5, 6]),
                ("b.py".into(), vec![2, 3, 4, 9, 9, 9]),
                ("c.py".into(), vec![7, 8]),
            ],
            3,
            "t",
        )
        .unwrap()
    }

    #[test]
    fn worked_example() {
        // Q = {a, b, c}, R = {b, c, d}
        assert_eq!(jaccard(&[1, 2, 3], &[2, 3, 4]), 0.5);
        assert_eq!(jaccard(&[], &[]), 0.0);
        assert_eq!(jaccard(&[4], &[4]), 1.0);
    }

    #[test]
    fn identical_query_ranks_first() {
        let hits = db().retrieve_jaccard(&[2, 3, 4], 2, None).unwrap();
        assert_eq!(hits[0].record.file_path, "b.py");
        assert_eq!(hits[0].score, 1.0);
        assert_eq!(hits[0].rank, 1);
        assert_eq!(hits[1].record.file_path, "a.py");
    }

    #[test]
    fn exclusion_and_zero_fill() {
        let hits = db().retrieve_jaccard(&[2, 3, 4], 10, Some("b.py")).unwrap();
        assert!(hits.iter().all(|h| h.record.file_path != "b.py"));
        assert_eq!(hits.len(), 3);
        assert_eq!(hits[2].record.file_path, "c.py");
        assert_eq!(hits[2].score, 0.0);
    }

    #[test]
    fn disjoint_query_returns_tiebreak_order() {
        let hits = db().retrieve_jaccard(&[100], 3, None).unwrap();
        let order: Vec<(&str, u32)> = hits
            .iter()
            .map(|h| (h.record.file_path.as_str(), h.record.chunk_index))
            .collect();
        assert_eq!(order, [("a.py", 0), ("a.py", 1), ("b.py", 0)]);
        assert!(hits.iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn k_zero_and_empty_query_rejected() {
        assert!(db().retrieve_jaccard(&[1], 0, None).is_err());
        assert!(db().retrieve_jaccard(&[], 1, None).is_err());
    }
}
