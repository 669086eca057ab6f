//! Corpus ingestion, balanced pair sampling, split construction and JSONL I/O.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::build_instruction;
use crate::types::{
    sample_id, AVPair, AuthorText, ClassificationLabel, DatasetSetting, InstructionSample, SourceDataset, TypeError,
};

/// Train/test sizes used for every dataset setting.
pub const DEFAULT_TRAIN_N: usize = 10_000;
pub const DEFAULT_TEST_N: usize = 1_000;
/// Pairs drawn per corpus for the classification-only setting.
pub const CLS_POOL_N: usize = 11_000;
/// Pairs sent for explanation generation before verification.
pub const EXPLANATION_POOL_N: usize = 20_000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("corpus needs at least 2 distinct authors, found {0}")]
    TooFewAuthors(usize),
    #[error("pair count must be even to balance classes, got {0}")]
    OddPairCount(usize),
    #[error("corpus cannot supply {requested} {label} pairs (capacity {capacity})")]
    InsufficientCorpus {
        label: ClassificationLabel,
        requested: usize,
        capacity: u128,
    },
    #[error("verified pool too small: need {need_yes} yes / {need_no} no, have {have_yes} / {have_no}")]
    InsufficientVerified {
        need_yes: usize,
        need_no: usize,
        have_yes: usize,
        have_no: usize,
    },
    #[error("duplicate sample id {0}")]
    DuplicateId(String),
    #[error("{path}: malformed line {line_no}: {message}")]
    MalformedLine {
        path: String,
        line_no: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    CorpusFormat { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    entries: Vec<AuthorText>,
}

#[derive(Deserialize)]
struct CorpusRow {
    author_id: String,
    text: String,
}

impl Corpus {
    pub fn new(name: impl Into<String>, entries: Vec<AuthorText>) -> Result<Self, DatasetError> {
        let authors: BTreeSet<&str> = entries.iter().map(|e| e.author_id.as_str()).collect();
        if authors.len() < 2 {
            return Err(DatasetError::TooFewAuthors(authors.len()));
        }
        Ok(Self {
            name: name.into(),
            entries,
        })
    }

    pub fn entries(&self) -> &[AuthorText] {
        &self.entries
    }

    pub fn n_authors(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.author_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Loads `author_id,text` rows from a `.csv` file or `{"author_id","text"}`
    /// objects from a `.jsonl` file. The corpus is named after the file stem.
    pub fn load(path: impl AsRef<Path>, source: SourceDataset) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("corpus")
            .to_string();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let rows: Vec<CorpusRow> = match ext.as_str() {
            "csv" => {
                let mut reader = csv::Reader::from_path(path).map_err(|e| DatasetError::CorpusFormat {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                reader
                    .deserialize()
                    .enumerate()
                    .map(|(i, row)| {
                        row.map_err(|e| DatasetError::MalformedLine {
                            path: path.display().to_string(),
                            line_no: i + 2,
                            message: e.to_string(),
                        })
                    })
                    .collect::<Result<_, _>>()?
            }
            "jsonl" | "json" => read_records(path)?,
            other => {
                return Err(DatasetError::CorpusFormat {
                    path: path.display().to_string(),
                    message: format!("unsupported corpus extension {other:?}, expected csv or jsonl"),
                })
            }
        };
        let entries = rows
            .into_iter()
            .map(|r| AuthorText::new(r.author_id, r.text, source.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        Corpus::new(name, entries)
    }
    /// Writes `author_id,text` rows with a header, loadable by [`Corpus::load`].
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = path.as_ref();
        let to_err = |e: csv::Error| DatasetError::CorpusFormat {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(to_err)?;
        w.write_record(["author_id", "text"]).map_err(to_err)?;
        for e in &self.entries {
            w.write_record([e.author_id.as_str(), e.text.as_str()]).map_err(to_err)?;
        }
        w.flush().map_err(io_err(path))
    }
}

const SHARED_WORDS: &[&str] = &[
    "the", "a", "movie", "film", "story", "food", "place", "service", "was", "is", "really", "quite", "and", "but",
    "i", "we", "it", "this", "that", "time", "again", "people", "day", "night", "just", "very",
];
const STYLE_WORDS: &[&str] = &[
    "splendid", "awful", "lol", "indeed", "honestly", "gorgeous", "meh", "brilliant", "dreadful", "superb", "cheap",
    "pricey", "cozy", "bland", "epic", "lame", "charming", "gritty", "witty", "dull", "stellar", "soggy", "vibrant",
    "tedious", "classy", "rowdy", "sublime", "clunky", "breezy", "moody",
];
const ENDINGS: &[&str] = &[".", "!", "!!", "...", " :)", "?!"];

/// Seeded toy corpus in which each author has a favourite vocabulary,
/// sentence ending and capitalization habit. Useful for demos and tests.
pub fn synthetic_corpus(name: &str, n_authors: usize, texts_per_author: usize, seed: u64) -> Result<Corpus, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n_authors * texts_per_author);
    for a in 0..n_authors {
        let vocab: Vec<&str> = STYLE_WORDS.choose_multiple(&mut rng, 4).copied().collect();
        let ending = *ENDINGS.choose(&mut rng).expect("non-empty");
        let shout = rng.random_bool(0.3);
        for _ in 0..texts_per_author {
            let n_sentences = rng.random_range(1..=3);
            let mut sentences = Vec::with_capacity(n_sentences);
            for _ in 0..n_sentences {
                let len = rng.random_range(4..=12);
                let words: Vec<&str> = (0..len)
                    .map(|_| {
                        if rng.random_bool(0.35) {
                            *vocab.choose(&mut rng).expect("non-empty")
                        } else {
                            *SHARED_WORDS.choose(&mut rng).expect("non-empty")
                        }
                    })
                    .collect();
                let mut sentence = words.join(" ");
                if shout {
                    sentence = sentence.to_uppercase();
                } else if let Some(first) = sentence.get(..1) {
                    sentence = first.to_uppercase() + &sentence[1..];
                }
                sentences.push(sentence + ending);
            }
            entries.push(AuthorText::new(format!("author{a:03}"), sentences.join(" "), SourceDataset::Synthetic)?);
        }
    }
    Corpus::new(name, entries)
}

fn choose2(k: usize) -> u128 {
    let k = k as u128;
    k * k.saturating_sub(1) / 2
}

struct PairDrawer<'a> {
    by_author: Vec<Vec<usize>>,
    multi: Vec<usize>,
    entries: &'a [AuthorText],
}

impl<'a> PairDrawer<'a> {
    fn new(corpus: &'a Corpus) -> Self {
        let mut grouped: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, e) in corpus.entries.iter().enumerate() {
            grouped.entry(e.author_id.as_str()).or_default().push(i);
        }
        let by_author: Vec<Vec<usize>> = grouped.into_values().collect();
        let multi = (0..by_author.len()).filter(|&a| by_author[a].len() >= 2).collect();
        Self {
            by_author,
            multi,
            entries: &corpus.entries,
        }
    }

    fn capacity(&self, label: ClassificationLabel) -> u128 {
        let same: u128 = self.by_author.iter().map(|t| choose2(t.len())).sum();
        match label {
            ClassificationLabel::SameAuthor => same,
            ClassificationLabel::DifferentAuthor => choose2(self.entries.len()) - same,
        }
    }

    fn draw(&self, label: ClassificationLabel, rng: &mut ChaCha8Rng) -> (usize, usize) {
        match label {
            ClassificationLabel::SameAuthor => {
                let author = &self.by_author[*self.multi.choose(rng).unwrap()];
                let picked = index::sample(rng, author.len(), 2);
                (author[picked.index(0)], author[picked.index(1)])
            }
            ClassificationLabel::DifferentAuthor => {
                let picked = index::sample(rng, self.by_author.len(), 2);
                let a = &self.by_author[picked.index(0)];
                let b = &self.by_author[picked.index(1)];
                (a[rng.random_range(0..a.len())], b[rng.random_range(0..b.len())])
            }
        }
    }

    fn enumerate(&self, label: ClassificationLabel) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        match label {
            ClassificationLabel::SameAuthor => {
                for texts in &self.by_author {
                    for (i, &a) in texts.iter().enumerate() {
                        for &b in &texts[i + 1..] {
                            out.push((a, b));
                        }
                    }
                }
            }
            ClassificationLabel::DifferentAuthor => {
                for (x, ta) in self.by_author.iter().enumerate() {
                    for tb in &self.by_author[x + 1..] {
                        for &a in ta {
                            for &b in tb {
                                out.push((a, b));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn draw_many(
        &self,
        label: ClassificationLabel,
        count: usize,
        dedup: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<(usize, usize)>, DatasetError> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let capacity = self.capacity(label);
        let feasible = if dedup { capacity >= count as u128 } else { capacity > 0 };
        if !feasible {
            return Err(DatasetError::InsufficientCorpus {
                label,
                requested: count,
                capacity,
            });
        }
        if !dedup {
            return Ok((0..count).map(|_| self.draw(label, rng)).collect());
        }
        let key = |(a, b): (usize, usize)| (a.min(b), a.max(b));
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        let mut budget = 20 * count + 1_000;
        while out.len() < count && budget > 0 {
            budget -= 1;
            let p = self.draw(label, rng);
            if seen.insert(key(p)) {
                out.push(p);
            }
        }
        if out.len() < count {
            // Close to capacity: finish from the explicit candidate list.
            let mut rest: Vec<_> = self
                .enumerate(label)
                .into_iter()
                .filter(|p| !seen.contains(&key(*p)))
                .collect();
            rest.shuffle(rng);
            out.extend(rest.into_iter().take(count - out.len()));
        }
        Ok(out)
    }
}

/// Draws `n` labelled pairs, half same-author and half different-author.
///
/// Pairs never reuse one text twice. With `dedup`, no unordered pair of
/// texts is drawn more than once. Ids are `"{corpus}-{i}"` in output order.
pub fn sample_pairs(corpus: &Corpus, n: usize, seed: u64, dedup: bool) -> Result<Vec<AVPair>, DatasetError> {
    if !n.is_multiple_of(2) {
        return Err(DatasetError::OddPairCount(n));
    }
    let drawer = PairDrawer::new(corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labelled = Vec::with_capacity(n);
    for label in ClassificationLabel::ALL {
        for p in drawer.draw_many(label, n / 2, dedup, &mut rng)? {
            labelled.push((p, label));
        }
    }
    labelled.shuffle(&mut rng);
    labelled
        .into_iter()
        .enumerate()
        .map(|(i, ((a, b), label))| {
            AVPair::new(
                sample_id(&corpus.name, i),
                corpus.entries[a].text.clone(),
                corpus.entries[b].text.clone(),
                label,
            )
            .map_err(DatasetError::from)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_authors: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub avg_length_words: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<InstructionSample>,
    pub test: Vec<InstructionSample>,
    pub stats: DatasetStats,
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn split_stats(train: &[InstructionSample], test: &[InstructionSample], n_authors: usize) -> DatasetStats {
    let texts: BTreeSet<&str> = train
        .iter()
        .chain(test)
        .flat_map(|s| [s.text1.as_str(), s.text2.as_str()])
        .collect();
    let avg_length_words = if texts.is_empty() {
        0.0
    } else {
        texts.iter().map(|t| word_count(t)).sum::<usize>() as f64 / texts.len() as f64
    };
    DatasetStats {
        n_authors,
        n_train: train.len(),
        n_test: test.len(),
        avg_length_words,
    }
}

/// Corpus-level author count plus split sizes and the mean whitespace-token
/// length over the distinct texts used in the split.
pub fn compute_stats(corpus: &Corpus, split: &DatasetSplit) -> DatasetStats {
    split_stats(&split.train, &split.test, corpus.n_authors())
}

/// Selects balanced, disjoint train and test sets from `pairs` and renders
/// them as instruction samples.
///
/// For [`DatasetSetting::ClassificationAndExplanation`] only pairs with a
/// non-empty entry in `explanations` are eligible. `stats.n_authors` is left
/// at 0; [`compute_stats`] fills it from the corpus.
pub fn build_split(
    pairs: &[AVPair],
    explanations: &HashMap<String, String>,
    setting: DatasetSetting,
    train_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    let mut ids = HashSet::new();
    for p in pairs {
        if !ids.insert(p.id.as_str()) {
            return Err(DatasetError::DuplicateId(p.id.clone()));
        }
    }
    let with_expl = setting == DatasetSetting::ClassificationAndExplanation;
    let eligible = |p: &&AVPair| !with_expl || explanations.get(&p.id).is_some_and(|e| !e.trim().is_empty());
    let mut yes: Vec<&AVPair> = pairs
        .iter()
        .filter(eligible)
        .filter(|p| p.label == ClassificationLabel::SameAuthor)
        .collect();
    let mut no: Vec<&AVPair> = pairs
        .iter()
        .filter(eligible)
        .filter(|p| p.label == ClassificationLabel::DifferentAuthor)
        .collect();

    let (train_yes, train_no) = (train_n.div_ceil(2), train_n / 2);
    let (test_yes, test_no) = (test_n / 2, test_n.div_ceil(2));
    if yes.len() < train_yes + test_yes || no.len() < train_no + test_no {
        return Err(DatasetError::InsufficientVerified {
            need_yes: train_yes + test_yes,
            need_no: train_no + test_no,
            have_yes: yes.len(),
            have_no: no.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    yes.shuffle(&mut rng);
    no.shuffle(&mut rng);

    let render = |p: &AVPair| InstructionSample {
        id: p.id.clone(),
        instruction: build_instruction(p, setting),
        text1: p.text1.clone(),
        text2: p.text2.clone(),
        label: p.label,
        explanation: if with_expl { explanations.get(&p.id).cloned() } else { None },
        setting,
    };
    let mut train: Vec<InstructionSample> = yes[..train_yes]
        .iter()
        .chain(&no[..train_no])
        .map(|p| render(p))
        .collect();
    let mut test: Vec<InstructionSample> = yes[train_yes..train_yes + test_yes]
        .iter()
        .chain(&no[train_no..train_no + test_no])
        .map(|p| render(p))
        .collect();
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    let stats = split_stats(&train, &test, 0);
    Ok(DatasetSplit { train, test, stats })
}

/// Writes one JSON object per line, each newline-terminated.
pub fn write_records<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record types serialize infallibly");
        w.write_all(line.as_bytes()).map_err(io_err(path))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads JSONL, skipping blank lines. Line numbers in errors are 1-based.
pub fn read_records<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedLine {
            path: path.display().to_string(),
            line_no: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn split_paths(path_prefix: &str) -> (PathBuf, PathBuf) {
    (
        PathBuf::from(format!("{path_prefix}.train.jsonl")),
        PathBuf::from(format!("{path_prefix}.test.jsonl")),
    )
}

/// Writes `{prefix}.train.jsonl` and `{prefix}.test.jsonl`.
pub fn write_jsonl(split: &DatasetSplit, path_prefix: &str) -> Result<(PathBuf, PathBuf), DatasetError> {
    let (train_path, test_path) = split_paths(path_prefix);
    write_records(&train_path, &split.train)?;
    write_records(&test_path, &split.test)?;
    Ok((train_path, test_path))
}

/// Reads and validates an instruction-sample JSONL file.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<InstructionSample>, DatasetError> {
    let path = path.as_ref();
    let samples: Vec<InstructionSample> = read_records(path)?;
    for s in &samples {
        s.validate()?;
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(authors: usize, per_author: usize) -> Corpus {
        let entries = (0..authors)
            .flat_map(|a| {
                (0..per_author).map(move |t| {
                    AuthorText::new(format!("a{a}"), format!("author {a} text {t} words"), SourceDataset::Synthetic)
                        .unwrap()
                })
            })
            .collect();
        Corpus::new("syn", entries).unwrap()
    }

    fn hist(pairs: &[AVPair]) -> (usize, usize) {
        let yes = pairs.iter().filter(|p| p.label == ClassificationLabel::SameAuthor).count();
        (yes, pairs.len() - yes)
    }

    #[test]
    fn synthetic_corpus_roundtrips_through_csv() {
        let c = synthetic_corpus("syn", 5, 4, 1).unwrap();
        assert_eq!(c.n_authors(), 5);
        assert_eq!(c, synthetic_corpus("syn", 5, 4, 1).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("syn.csv");
        c.write_csv(&path).unwrap();
        assert_eq!(Corpus::load(&path, SourceDataset::Synthetic).unwrap(), c);
    }

    #[test]
    fn corpus_needs_two_authors() {
        let one = vec![AuthorText::new("a", "t", SourceDataset::Synthetic).unwrap()];
        assert!(matches!(Corpus::new("c", one), Err(DatasetError::TooFewAuthors(1))));
    }

    #[test]
    fn minimal_corpus() {
        let c = corpus(2, 2);
        let pairs = sample_pairs(&c, 2, 9, false).unwrap();
        assert_eq!(hist(&pairs), (1, 1));
    }

    #[test]
    fn balance_and_pair_constraints() {
        let c = corpus(100, 4);
        let pairs = sample_pairs(&c, 1000, 1, false).unwrap();
        assert_eq!(hist(&pairs), (500, 500));
        let author_of: HashMap<&str, &str> = c.entries.iter().map(|e| (e.text.as_str(), e.author_id.as_str())).collect();
        for p in &pairs {
            assert_ne!(p.text1, p.text2);
            let same = author_of[p.text1.as_str()] == author_of[p.text2.as_str()];
            assert_eq!(same, p.label == ClassificationLabel::SameAuthor);
        }
        let ids: HashSet<_> = pairs.iter().map(|p| &p.id).collect();
        assert_eq!(ids.len(), 1000);
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = corpus(10, 5);
        assert_eq!(sample_pairs(&c, 40, 3, true).unwrap(), sample_pairs(&c, 40, 3, true).unwrap());
        assert_ne!(sample_pairs(&c, 40, 3, true).unwrap(), sample_pairs(&c, 40, 4, true).unwrap());
    }

    #[test]
    fn dedup_reaches_exact_capacity() {
        // 3 authors x 2 texts: 3 same-author pairs, 12 different-author pairs.
        let c = corpus(3, 2);
        let pairs = sample_pairs(&c, 6, 0, true).unwrap();
        let keys: HashSet<(String, String)> = pairs
            .iter()
            .map(|p| {
                let (a, b) = (p.text1.clone(), p.text2.clone());
                if a < b { (a, b) } else { (b, a) }
            })
            .collect();
        assert_eq!(keys.len(), 6);
        assert!(matches!(
            sample_pairs(&c, 8, 0, true),
            Err(DatasetError::InsufficientCorpus { label: ClassificationLabel::SameAuthor, .. })
        ));
        // without dedup repeats are allowed
        assert!(sample_pairs(&c, 8, 0, false).is_ok());
    }

    #[test]
    fn no_same_author_pairs_possible() {
        let c = corpus(5, 1);
        assert!(matches!(sample_pairs(&c, 2, 0, false), Err(DatasetError::InsufficientCorpus { .. })));
        assert!(matches!(sample_pairs(&c, 3, 0, false), Err(DatasetError::OddPairCount(3))));
    }

    fn pool(n: usize) -> Vec<AVPair> {
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { ClassificationLabel::SameAuthor } else { ClassificationLabel::DifferentAuthor };
                AVPair::new(format!("p-{i}"), format!("first {i}"), format!("second text {i}"), label).unwrap()
            })
            .collect()
    }

    #[test]
    fn split_arithmetic() {
        let pairs = pool(22);
        let expl: HashMap<String, String> = pairs.iter().map(|p| (p.id.clone(), format!("why {}", p.id))).collect();
        let split = build_split(&pairs, &expl, DatasetSetting::ClassificationAndExplanation, 20, 2, 5).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (20, 2));
        let train_ids: HashSet<_> = split.train.iter().map(|s| &s.id).collect();
        assert!(split.test.iter().all(|s| !train_ids.contains(&s.id)));
        for part in [&split.train, &split.test] {
            let yes = part.iter().filter(|s| s.label == ClassificationLabel::SameAuthor).count();
            assert!((2 * yes as isize - part.len() as isize).abs() <= 1);
        }
        assert!(split.train.iter().all(|s| s.explanation.is_some() && s.validate().is_ok()));
    }

    #[test]
    fn classification_only_has_no_explanations() {
        let pairs = pool(10);
        let split = build_split(&pairs, &HashMap::new(), DatasetSetting::ClassificationOnly, 6, 4, 0).unwrap();
        assert!(split.train.iter().chain(&split.test).all(|s| s.explanation.is_none()));
        assert!(split.train[0].instruction.contains(&split.train[0].text1));
    }

    #[test]
    fn unverified_pairs_are_ineligible() {
        let pairs = pool(10);
        let expl: HashMap<String, String> = pairs.iter().take(4).map(|p| (p.id.clone(), "x".into())).collect();
        assert!(matches!(
            build_split(&pairs, &expl, DatasetSetting::ClassificationAndExplanation, 4, 2, 0),
            Err(DatasetError::InsufficientVerified { .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut pairs = pool(4);
        pairs[1].id = pairs[0].id.clone();
        assert!(matches!(
            build_split(&pairs, &HashMap::new(), DatasetSetting::ClassificationOnly, 2, 0, 0),
            Err(DatasetError::DuplicateId(_))
        ));
    }

    #[test]
    fn stats_average_words() {
        let ten = "w ".repeat(10);
        let twenty = "v ".repeat(20);
        let pairs = vec![AVPair::new("s-0", ten.trim(), twenty.trim(), ClassificationLabel::SameAuthor).unwrap()];
        let split = build_split(&pairs, &HashMap::new(), DatasetSetting::ClassificationOnly, 1, 0, 0).unwrap();
        assert_eq!(split.stats.avg_length_words, 15.0);
        assert_eq!(split.stats.n_test, 0);
        let c = corpus(3, 1);
        assert_eq!(compute_stats(&c, &split).n_authors, 3);
    }

    #[test]
    fn defaults() {
        assert_eq!((DEFAULT_TRAIN_N, DEFAULT_TEST_N), (10_000, 1_000));
    }
}
