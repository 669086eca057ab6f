use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use avkit::dataset::{
    build_split, compute_stats, read_jsonl, sample_pairs, synthetic_corpus, write_jsonl, DatasetError, DatasetSplit,
    DatasetStats,
};
use avkit::types::{ClassificationLabel, DatasetSetting, InstructionSample};
use proptest::prelude::*;

fn balanced(samples: &[InstructionSample]) -> bool {
    let yes = samples.iter().filter(|s| s.label == ClassificationLabel::SameAuthor).count();
    yes.abs_diff(samples.len() - yes) <= 1
}

fn explained_split(n_pairs: usize, train: usize, test: usize, seed: u64) -> DatasetSplit {
    let corpus = synthetic_corpus("c", 30, 10, seed).unwrap();
    let pairs = sample_pairs(&corpus, n_pairs, seed, true).unwrap();
    let expl: HashMap<String, String> = pairs
        .iter()
        .map(|p| (p.id.clone(), format!("The correct answer is {}. Analysis of {}.", p.label.as_yes_no(), p.id)))
        .collect();
    build_split(&pairs, &expl, DatasetSetting::ClassificationAndExplanation, train, test, seed).unwrap()
}

#[test]
fn jsonl_roundtrip_of_200_samples() {
    let split = explained_split(220, 200, 20, 4);
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("ds").display().to_string();
    let (train_path, test_path) = write_jsonl(&split, &prefix).unwrap();
    assert_eq!(read_jsonl(&train_path).unwrap(), split.train);
    assert_eq!(read_jsonl(&test_path).unwrap(), split.test);
    let bytes = std::fs::read(&train_path).unwrap();
    assert_eq!(bytes.last(), Some(&b'\n'));
}

#[test]
fn truncated_last_line_reports_its_number() {
    let split = explained_split(40, 20, 0, 1);
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("t").display().to_string();
    let (train_path, _) = write_jsonl(&split, &prefix).unwrap();
    let body = std::fs::read_to_string(&train_path).unwrap();
    let cut = &body[..body.len() - 25];
    std::fs::write(&train_path, cut).unwrap();
    match read_jsonl(&train_path) {
        Err(DatasetError::MalformedLine { line_no, .. }) => assert_eq!(line_no, 20),
        other => panic!("expected MalformedLine, got {other:?}"),
    }
}

#[test]
fn unknown_field_is_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(
        f,
        r#"{{"id":"a","instruction":"i","text1":"x","text2":"y","label":"yes","setting":"cls","extra":1}}"#
    )
    .unwrap();
    assert!(matches!(read_jsonl(&path), Err(DatasetError::MalformedLine { line_no: 1, .. })));
}

#[test]
fn empty_split_writes_empty_files() {
    let split = DatasetSplit {
        train: vec![],
        test: vec![],
        stats: DatasetStats { n_authors: 0, n_train: 0, n_test: 0, avg_length_words: 0.0 },
    };
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("e").display().to_string();
    let (a, b) = write_jsonl(&split, &prefix).unwrap();
    assert!(read_jsonl(a).unwrap().is_empty());
    assert!(read_jsonl(b).unwrap().is_empty());
}

#[test]
fn twenty_two_pairs_into_twenty_and_two() {
    let split = explained_split(22, 20, 2, 9);
    assert_eq!((split.train.len(), split.test.len()), (20, 2));
    assert!(balanced(&split.train) && balanced(&split.test));
    let train_ids: BTreeSet<_> = split.train.iter().map(|s| &s.id).collect();
    assert!(split.test.iter().all(|s| !train_ids.contains(&s.id)));
    for s in split.train.iter().chain(&split.test) {
        assert!(s.target().starts_with(&format!("The correct answer is {}.", s.label.as_yes_no())));
    }
}

#[test]
fn stats_count_words_and_authors() {
    let corpus = synthetic_corpus("c", 7, 5, 3).unwrap();
    let pairs = sample_pairs(&corpus, 20, 3, true).unwrap();
    let split = build_split(&pairs, &HashMap::new(), DatasetSetting::ClassificationOnly, 12, 4, 3).unwrap();
    let stats = compute_stats(&corpus, &split);
    assert_eq!(stats.n_authors, 7);
    let texts: BTreeSet<&str> = split
        .train
        .iter()
        .chain(&split.test)
        .flat_map(|s| [s.text1.as_str(), s.text2.as_str()])
        .collect();
    let words: usize = texts.iter().map(|t| t.split_whitespace().count()).sum();
    assert!((stats.avg_length_words - words as f64 / texts.len() as f64).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn splits_are_balanced_disjoint_and_deterministic(
        seed in 0u64..1000,
        train in 0usize..40,
        test in 0usize..15,
    ) {
        let a = explained_split(80, train, test, seed);
        let b = explained_split(80, train, test, seed);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.train.len(), train);
        prop_assert_eq!(a.test.len(), test);
        prop_assert!(balanced(&a.train) && balanced(&a.test));
        let train_ids: BTreeSet<_> = a.train.iter().map(|s| &s.id).collect();
        prop_assert!(a.test.iter().all(|s| !train_ids.contains(&s.id)));
    }
}
