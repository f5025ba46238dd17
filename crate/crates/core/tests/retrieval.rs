use std::collections::HashSet;

use proptest::prelude::*;

use repocomplete::chunkstore::{
    chunk_file, load_database, save_database, EmbeddingMatrix, RetrievalDatabase, RetrievedSnippet,
};
use repocomplete::context::{assemble, build_query, format_snippet, RagConfig};
use repocomplete::{TokenId, TokenizerSpec};

fn files() -> impl Strategy<Value = Vec<(String, Vec<TokenId>)>> {
    prop::collection::vec(prop::collection::vec(0u32..40, 0..60), 1..6).prop_map(|fs| {
        fs.into_iter()
            .enumerate()
            .map(|(i, t)| (format!("d{}/f{i}.py", i % 2), t))
            .collect()
    })
}

fn brute_jaccard(db: &RetrievalDatabase, query: &[TokenId], k: usize, exclude: Option<&str>) -> Vec<(usize, f64)> {
    let q: HashSet<TokenId> = query.iter().copied().collect();
    let mut scored: Vec<(usize, f64)> = db
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| Some(r.file_path.as_str()) != exclude)
        .map(|(i, r)| {
            let s: HashSet<TokenId> = r.key_tokens.0.iter().copied().collect();
            let inter = q.intersection(&s).count();
            (i, inter as f64 / (q.len() + s.len() - inter) as f64)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

fn brute_l2(rows: &[Vec<f32>], skip: &[bool], v: &[f32], k: usize) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip[*i])
        .map(|(i, r)| {
            let mut d = 0.0;
            for (x, y) in r.iter().zip(v) {
                d += (f64::from(*x) - f64::from(*y)).powi(2);
            }
            (i, d)
        })
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

fn ids(hits: &[RetrievedSnippet]) -> Vec<(usize, f64)> {
    hits.iter().map(|h| (h.record_index, h.score)).collect()
}

fn snippet(path: &str, index: u32, key: Vec<TokenId>, cont: Vec<TokenId>, rank: usize) -> RetrievedSnippet {
    RetrievedSnippet {
        record: repocomplete::chunkstore::ChunkRecord::new(path, index, key, cont),
        score: 0.5,
        kind: repocomplete::chunkstore::ScoreKind::Jaccard,
        rank,
        record_index: rank - 1,
    }
}

#[test]
fn database_survives_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let db = RetrievalDatabase::from_token_files(
        vec![
            ("a.py".into(), (0..150).collect()),
            ("b.py".into(), vec![3, 1, 4, 1, 5]),
        ],
        64,
        "toy",
    )
    .unwrap();
    let path = dir.path().join("db.bin");
    save_database(&db, &path).unwrap();
    assert_eq!(load_database(&path).unwrap(), db);
}

#[test]
fn chunk_size_one_is_rejected() {
    assert!(RetrievalDatabase::from_token_files(vec![("a.py".into(), vec![1, 2])], 1, "t").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jaccard_matches_brute_force(
        fs in files(),
        m in 2usize..12,
        query in prop::collection::vec(0u32..45, 1..30),
        k in 1usize..8,
        exclude in prop::option::of(0usize..6),
    ) {
        let db = RetrievalDatabase::from_token_files(fs.clone(), m, "t").unwrap();
        prop_assume!(!db.is_empty());
        let ex = exclude.and_then(|i| fs.get(i)).map(|f| f.0.clone());
        let hits = db.retrieve_jaccard(&query, k, ex.as_deref()).unwrap();
        prop_assert_eq!(ids(&hits), brute_jaccard(&db, &query, k, ex.as_deref()));
        for (i, h) in hits.iter().enumerate() {
            prop_assert_eq!(h.rank, i + 1);
            prop_assert!(Some(h.record.file_path.as_str()) != ex.as_deref());
        }
    }

    #[test]
    fn embedding_matches_brute_force(
        fs in files(),
        dim in 1usize..6,
        seed in any::<u64>(),
        k in 1usize..8,
        exclude in prop::option::of(0usize..6),
    ) {
        let mut db = RetrievalDatabase::from_token_files(fs.clone(), 4, "t").unwrap();
        prop_assume!(!db.is_empty());
        let mut rng = repocomplete::seed::rng_for(seed, "emb");
        use rand::Rng;
        let rows: Vec<Vec<f32>> = (0..db.len())
            .map(|_| (0..dim).map(|_| rng.gen_range(-3i32..4) as f32 * 0.5).collect())
            .collect();
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-3i32..4) as f32 * 0.5).collect();
        db.set_embeddings(EmbeddingMatrix::new(dim, "fixed", rows.concat()).unwrap()).unwrap();
        let ex = exclude.and_then(|i| fs.get(i)).map(|f| f.0.clone());
        let skip: Vec<bool> = db.records().iter().map(|r| Some(r.file_path.as_str()) == ex.as_deref()).collect();
        let hits = db.retrieve_by_vector(&v, k, ex.as_deref()).unwrap();
        prop_assert_eq!(ids(&hits), brute_l2(&rows, &skip, &v, k));
    }

    #[test]
    fn chunks_tile_the_file(tokens in prop::collection::vec(0u32..100, 0..200), m in 2usize..20) {
        let recs = chunk_file("a.py", &tokens, m);
        let keys: Vec<TokenId> = recs.iter().flat_map(|r| r.key_tokens.0.clone()).collect();
        prop_assert_eq!(&keys, &tokens);
        for (i, r) in recs.iter().enumerate() {
            prop_assert_eq!(r.chunk_index as usize, i);
            let next = recs.get(i + 1).map(|n| n.key_tokens.0.clone()).unwrap_or_default();
            prop_assert_eq!(&r.continuation_tokens.0, &next);
        }
    }

    #[test]
    fn prompt_fits_budget(
        context in prop::collection::vec(0u32..256, 0..500),
        keys in prop::collection::vec((1usize..120, 0usize..120), 0..5),
        k in 0usize..5,
        budget in 64usize..400,
        reserve_frac in 0.1f64..0.9,
    ) {
        let spec = TokenizerSpec::byte_level();
        let reserve = ((budget as f64 * reserve_frac) as usize).max(1);
        let cfg = RagConfig { k, context_budget: budget, reserve_for_input: reserve, ..RagConfig::default() };
        let snippets: Vec<RetrievedSnippet> = keys
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| snippet(&format!("s{i}.py"), i as u32, vec![7; a], vec![8; b], i + 1))
            .collect();
        let p = assemble(&context, &snippets, &spec, &cfg).unwrap();

        // expected: the most best-ranked snippets that still leave room for the reserve
        let lens: Vec<usize> = snippets.iter().take(k).map(|s| format_snippet(s, &spec, &cfg).len()).collect();
        let min_input = context.len().min(reserve);
        let used = if k == 0 {
            0
        } else {
            (0..=lens.len()).rev().find(|&j| lens[..j].iter().sum::<usize>() + min_input <= budget).unwrap()
        };
        let block: usize = lens[..used].iter().sum();
        let keep = context.len().min(budget - block);
        prop_assert_eq!(p.snippets_used.len(), used);
        prop_assert_eq!(p.snippet_tokens, block);
        prop_assert_eq!(p.input_tokens_kept, keep);
        prop_assert!(p.tokens.len() <= budget);
        prop_assert_eq!(&p.tokens.0[block..], &context[context.len() - keep..]);
        prop_assert_eq!(p.truncated, keep < context.len() || used < lens.len());
    }

    #[test]
    fn query_is_the_context_tail(context in prop::collection::vec(0u32..9, 0..100), m in 1usize..80) {
        let q = build_query(&context, m);
        prop_assert_eq!(q.len(), context.len().min(m));
        prop_assert!(context.ends_with(q));
    }
}
