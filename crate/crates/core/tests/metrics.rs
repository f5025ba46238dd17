use proptest::prelude::*;

use repocomplete::metrics::{
    bca_mean, edit_similarity, exact_match_rate, levenshtein, mrr_at_k, perplexity, prefix_similarity_aggregate,
    recall_at_k, BootstrapConfig, PredictionPair, SingleTokenStats,
};

/// Edit distance by memoized recursion over suffixes.
fn lev_oracle(a: &[char], b: &[char]) -> usize {
    fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if let Some(d) = memo[i][j] {
            return d;
        }
        let d = if i == a.len() {
            b.len() - j
        } else if j == b.len() {
            a.len() - i
        } else if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo[i][j] = Some(d);
        d
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, 0, 0, &mut memo)
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

fn short() -> impl Strategy<Value = String> {
    "[ab éx]{0,12}"
}

#[test]
fn prefix_similarity_is_length_weighted() {
    let pairs = [PredictionPair::new("ab", "abcd"), PredictionPair::new("", "xy")];
    // (2 + 0) / (4 + 2), not the mean of 1/2 and 0
    assert!((prefix_similarity_aggregate(&pairs).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!(prefix_similarity_aggregate(&[PredictionPair::new("a", "  ")]).is_err());
}

#[test]
fn uniform_model_perplexity_is_vocab_size() {
    let v = 50257f64;
    let stats = SingleTokenStats::new(vec![-(v.ln()); 200], vec![1; 200]).unwrap();
    assert!((perplexity(&stats).unwrap() - v).abs() / v < 1e-12);
}

#[test]
fn bootstrap_of_a_constant_is_a_point() {
    let ci = bca_mean(&[0.25; 40], &BootstrapConfig::default()).unwrap();
    assert_eq!((ci.lo, ci.hi), (ci.point, ci.point));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn levenshtein_matches_oracle(a in short(), b in short()) {
        prop_assert_eq!(levenshtein(&chars(&a), &chars(&b)), lev_oracle(&chars(&a), &chars(&b)));
    }

    #[test]
    fn levenshtein_is_a_metric(a in short(), b in short(), c in short()) {
        let (a, b, c) = (chars(&a), chars(&b), chars(&c));
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert_eq!(levenshtein(&a, &b) == 0, a == b);
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
    }

    #[test]
    fn edit_similarity_bounds_and_symmetry(a in short(), b in short()) {
        let s = edit_similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, edit_similarity(&b, &a));
        let n = a.chars().count().max(b.chars().count());
        if n > 0 {
            let expected = 1.0 - lev_oracle(&chars(&a), &chars(&b)) as f64 / n as f64;
            prop_assert_eq!(s, expected);
        }
    }

    #[test]
    fn exact_match_implies_full_similarity(a in short(), pad in "[ \n]{0,3}") {
        let p = PredictionPair::new(&format!("{pad}{a}"), &format!("{a}{pad}"));
        prop_assert_eq!(p.exact_match(), 1.0);
        prop_assert_eq!(p.edit_similarity(), 1.0);
        prop_assert_eq!(p.prefix_len(), p.target_len());
    }

    #[test]
    fn prefix_aggregate_matches_definition(pairs in prop::collection::vec((short(), short()), 1..10)) {
        let ps: Vec<PredictionPair> = pairs.iter().map(|(p, t)| PredictionPair::new(p, t)).collect();
        let total: usize = pairs.iter().map(|(_, t)| t.trim().chars().count()).sum();
        let matched: usize = pairs
            .iter()
            .map(|(p, t)| p.trim().chars().zip(t.trim().chars()).take_while(|(x, y)| x == y).count())
            .sum();
        match prefix_similarity_aggregate(&ps) {
            Ok(v) => prop_assert_eq!(v, matched as f64 / total as f64),
            Err(_) => prop_assert_eq!(total, 0),
        }
        let em = exact_match_rate(&ps);
        prop_assert!((0.0..=1.0).contains(&em));
    }

    #[test]
    fn recall_is_monotone_in_k(ranks in prop::collection::vec(1usize..30, 1..60)) {
        let stats = SingleTokenStats::new(vec![-1.0; ranks.len()], ranks.clone()).unwrap();
        let mut last = 0.0;
        for k in 1..32 {
            let r = recall_at_k(&stats, k).unwrap();
            let mrr = mrr_at_k(&stats, k).unwrap();
            prop_assert!(r >= last);
            prop_assert!(mrr <= r);
            let expected = ranks.iter().filter(|&&x| x <= k).count() as f64 / ranks.len() as f64;
            prop_assert_eq!(r, expected);
            last = r;
        }
        prop_assert_eq!(mrr_at_k(&stats, 1).unwrap(), recall_at_k(&stats, 1).unwrap());
    }
}
