mod common;

use std::collections::HashMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::*;
use repocomplete::chunkstore::RetrievalDatabase;
use repocomplete::eval::{
    self, analyze, randomize_cut, EvalExample, EvalMode, ModeHint, RetrievalKind, RunConfig, RunReport,
};
use repocomplete::lm::CopyOracle;
use repocomplete::TokenizerSpec;

struct Setup {
    fx: Fixture,
    spec: TokenizerSpec,
    dbs: HashMap<String, RetrievalDatabase>,
}

fn setup() -> Setup {
    let spec = gpt2();
    let (projects, marked) = copy_corpus(21, 6, 8);
    let fx = write_dataset(&projects, &marked);
    let dbs = databases(&fx.dataset, &spec, 64);
    Setup { fx, spec, dbs }
}

fn run(s: &Setup, cfg: &RunConfig) -> RunReport {
    let model = CopyOracle::new(s.spec.vocab_size());
    eval::run(&s.fx.dataset, &model, &s.spec, &s.dbs, None, cfg).unwrap()
}

fn cfg(retrieval: RetrievalKind) -> RunConfig {
    RunConfig {
        retrieval,
        resamples: 100,
        ..RunConfig::default()
    }
}

#[test]
fn random_cuts_are_uniform() {
    let cells = 10;
    let trials = 5000;
    let mut counts = vec![0usize; cells];
    for i in 0..trials {
        let e = EvalExample {
            id: format!("p/f.py:{i}"),
            project_id: "p".into(),
            file_path: "f.py".into(),
            line_number: i + 1,
            mode_hint: ModeHint::Line,
            cut_offset: 0,
            target: "abcdefghij".into(),
            context_text: String::new(),
        };
        counts[randomize_cut(&e, 3).cut_offset] += 1;
    }
    let expected = trials as f64 / cells as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2:.2} >= {critical:.2}, counts {counts:?}");
}

#[test]
fn threshold_above_one_equals_no_retrieval() {
    let s = setup();
    let none = run(&s, &cfg(RetrievalKind::None));
    let high = run(
        &s,
        &RunConfig {
            similarity_threshold: Some(1.01),
            ..cfg(RetrievalKind::Jaccard)
        },
    );
    assert_eq!(none.metrics, high.metrics);
    for (a, b) in none.examples.iter().zip(&high.examples) {
        assert_eq!(
            (&a.prediction, a.em, a.prompt_tokens),
            (&b.prediction, b.em, b.prompt_tokens)
        );
        assert!(b.snippets.is_empty());
    }
}

#[test]
fn threshold_zero_equals_plain_retrieval() {
    let s = setup();
    let plain = run(&s, &cfg(RetrievalKind::Jaccard));
    let zero = run(
        &s,
        &RunConfig {
            similarity_threshold: Some(0.0),
            ..cfg(RetrievalKind::Jaccard)
        },
    );
    assert_eq!(plain.metrics, zero.metrics);
    assert_eq!(plain.examples, zero.examples);
}

#[test]
fn snippets_never_come_from_the_evaluated_file() {
    let s = setup();
    let r = run(
        &s,
        &RunConfig {
            rag: repocomplete::context::RagConfig {
                k: 3,
                ..Default::default()
            },
            ..cfg(RetrievalKind::Jaccard)
        },
    );
    assert!(r.examples.iter().all(|e| !e.snippets.is_empty()));
    for e in &r.examples {
        assert!(e.snippets.iter().all(|t| t.file_path != e.file_path), "{}", e.id);
    }
    let copying = run(
        &s,
        &RunConfig {
            copying_allowed: true,
            ..cfg(RetrievalKind::Jaccard)
        },
    );
    assert!(copying
        .examples
        .iter()
        .any(|e| e.snippets.iter().any(|t| t.file_path == e.file_path)));
}

#[test]
fn report_against_itself_changes_nothing() {
    let s = setup();
    let r = run(&s, &cfg(RetrievalKind::Jaccard));
    let a = analyze(&r, &r, &[0.0, 0.5, 1.0]).unwrap();
    assert_eq!(a.buckets.iter().map(|b| b.n).sum::<usize>(), r.examples.len());
    assert!(a.buckets.iter().all(|b| b.improved == 0 && b.worsened == 0));
}

#[test]
fn analysis_needs_matching_examples() {
    let s = setup();
    let r = run(&s, &cfg(RetrievalKind::Jaccard));
    let mut other = r.clone();
    other.examples.pop();
    assert!(analyze(&r, &other, &[0.0, 1.0]).is_err());
    assert!(analyze(&r, &r, &[0.5, 0.5]).is_err());
}

#[test]
fn bucket_em_rises_on_copy_corpus() {
    let s = setup();
    let with = run(&s, &cfg(RetrievalKind::Jaccard));
    let without = run(&s, &cfg(RetrievalKind::None));
    let a = analyze(&with, &without, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    let em: Vec<f64> = a.buckets.iter().filter(|b| b.n > 0).map(|b| b.em).collect();
    assert!(em.len() >= 2, "{em:?}");
    assert!(em.windows(2).all(|w| w[0] <= w[1]), "{em:?}");
}

#[test]
fn random_position_runs_repeat() {
    let s = setup();
    let c = RunConfig {
        mode: EvalMode::LineR,
        seed: Some(11),
        ..cfg(RetrievalKind::Jaccard)
    };
    let a = run(&s, &c);
    assert_eq!(a, run(&s, &c));
    assert!(a.examples.iter().any(|e| e.cut_offset > 0));
    assert!(RunConfig { seed: None, ..c }.validate().is_err());
}

#[test]
fn misplaced_target_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let projects = vec![Project {
        id: "p".into(),
        files: vec![("a.py".into(), "x = 1\ny = 2\n".into())],
    }];
    write_dataset_at(dir.path(), &projects, &[("p".into(), "a.py".into(), 1, "y = 2".into())]);
    let err = eval::load_dataset(dir.path()).unwrap_err().to_string();
    assert!(err.contains("a.py:1"), "{err}");
}
