//! Automatic evaluation: answer accuracy, ROUGE-1/2/L, greedy embedding
//! matching, and accuracy of the best/worst explained samples.
//!
//! ROUGE uses clipped n-gram counts with a balanced F1, no stemming and no
//! stopword removal. ROUGE-L is plain LCS over the whole sequence.
//! Embedding matching is greedy cosine matching with uniform token weights
//! and no baseline rescaling.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::{parse_answer, strip_answer_sentence};
use crate::hashing::stable_hash;
use crate::types::{InstructionSample, PredictionRecord};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction id {0} does not exist in the gold set")]
    UnknownId(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("no predictions to score")]
    NoPredictions,
    #[error("embedding match needs non-empty token sequences")]
    EmptySequence,
    #[error("ROUGE-N needs n >= 1")]
    ZeroN,
    #[error("fraction must satisfy 0 < fraction <= 0.5, got {0}")]
    BadFraction(f64),
    #[error("need at least 2 scored samples, got {0}")]
    TooFewSamples(usize),
}

/// Lowercased tokens, never empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    /// Lowercases and drops empty strings.
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence(
            iter.into_iter()
                .map(|s| s.into().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
        )
    }
}

/// Case-folds and splits on every maximal run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence(
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }

    fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self::from_pr(ratio(overlap, candidate_total), ratio(overlap, reference_total))
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

pub fn rouge_n(candidate: &TokenSequence, reference: &TokenSequence, n: usize) -> Result<RougeScore, MetricsError> {
    if n == 0 {
        return Err(MetricsError::ZeroN);
    }
    let cand = ngram_counts(&candidate.0, n);
    let refs = ngram_counts(&reference.0, n);
    let overlap: usize = cand
        .iter()
        .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    Ok(RougeScore::from_counts(
        overlap,
        candidate.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    ))
}

/// Length of the longest common subsequence, two-row DP.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> RougeScore {
    let l = lcs_len(&candidate.0, &reference.0);
    RougeScore::from_counts(l, candidate.len(), reference.len())
}

/// Maps a token to a fixed-dimension vector. Must be deterministic per token.
pub trait EmbeddingProvider: Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, token: &str) -> Vec<f64>;
}

/// Deterministic toy embedder: each token hashes to a vector with entries
/// in `[0, 1)`, so cosine similarities are never negative.
#[derive(Debug, Clone)]
pub struct HashEmbedding {
    dimension: usize,
    seed: u64,
}

impl HashEmbedding {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension >= 1, "embedding dimension must be positive");
        Self { dimension, seed }
    }
}

impl Default for HashEmbedding {
    fn default() -> Self {
        Self::new(64, 0)
    }
}

impl EmbeddingProvider for HashEmbedding {
    fn name(&self) -> &str {
        "hash-embedding"
    }
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn embed(&self, token: &str) -> Vec<f64> {
        (0..self.dimension as u64)
            .map(|i| {
                let h = stable_hash(&[&self.seed.to_le_bytes(), &i.to_le_bytes(), token.as_bytes()]);
                crate::hashing::unit_interval(h)
            })
            .collect()
    }
}

/// Explicit token→vector table; unknown tokens map to the zero vector.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedding {
    dimension: usize,
    table: HashMap<String, Vec<f64>>,
}

impl TableEmbedding {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            table: HashMap::new(),
        }
    }

    pub fn with(mut self, token: &str, vector: Vec<f64>) -> Self {
        assert_eq!(vector.len(), self.dimension);
        self.table.insert(token.to_lowercase(), vector);
        self
    }
}

impl EmbeddingProvider for TableEmbedding {
    fn name(&self) -> &str {
        "table-embedding"
    }
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn embed(&self, token: &str) -> Vec<f64> {
        self.table.get(token).cloned().unwrap_or_else(|| vec![0.0; self.dimension])
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Greedy embedding match. Identical tokens score exactly 1; negative
/// cosine maxima count as 0, keeping every component in `[0, 1]`.
pub fn embed_match_f1(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    provider: &dyn EmbeddingProvider,
) -> Result<RougeScore, MetricsError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricsError::EmptySequence);
    }
    let mut cache: HashMap<&str, Vec<f64>> = HashMap::new();
    for t in candidate.0.iter().chain(&reference.0) {
        cache.entry(t.as_str()).or_insert_with(|| normalize(provider.embed(t)));
    }
    let sim = |a: &str, b: &str| -> f64 {
        if a == b {
            return 1.0;
        }
        let dot: f64 = cache[a].iter().zip(&cache[b]).map(|(x, y)| x * y).sum();
        dot.clamp(0.0, 1.0)
    };
    let greedy = |from: &[String], to: &[String]| -> f64 {
        from.iter()
            .map(|a| to.iter().map(|b| sim(a, b)).fold(0.0, f64::max))
            .sum::<f64>()
            / from.len() as f64
    };
    Ok(RougeScore::from_pr(
        greedy(&candidate.0, &reference.0),
        greedy(&reference.0, &candidate.0),
    ))
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), MetricsError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(MetricsError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Fraction of predictions whose parsed answer equals the gold label.
/// Unparseable answers count as wrong.
pub fn accuracy(predictions: &[PredictionRecord], gold: &[InstructionSample]) -> Result<f64, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::NoPredictions);
    }
    check_unique(gold.iter().map(|g| g.id.as_str()))?;
    check_unique(predictions.iter().map(|p| p.id.as_str()))?;
    let labels: HashMap<&str, _> = gold.iter().map(|g| (g.id.as_str(), g.label)).collect();
    let mut correct = 0usize;
    for p in predictions {
        let gold_label = labels
            .get(p.id.as_str())
            .ok_or_else(|| MetricsError::UnknownId(p.id.clone()))?;
        if parse_answer(&p.output_text) == Some(*gold_label) {
            correct += 1;
        }
    }
    Ok(correct as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    pub human_mean: f64,
    pub correct: bool,
}

/// Accuracy over the highest- and lowest-rated `ceil(fraction * N)` samples.
/// Ranking is by score descending, ties broken by id ascending.
pub fn quartile_accuracy(samples: &[ScoredSample], fraction: f64) -> Result<(f64, f64), MetricsError> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(MetricsError::BadFraction(fraction));
    }
    if samples.len() < 2 {
        return Err(MetricsError::TooFewSamples(samples.len()));
    }
    let ranked = rank_by_score(samples);
    let k = ((fraction * samples.len() as f64) - 1e-9).ceil() as usize;
    let k = k.clamp(1, samples.len());
    let acc = |set: &[&ScoredSample]| set.iter().filter(|s| s.correct).count() as f64 / set.len() as f64;
    Ok((acc(&ranked[..k]), acc(&ranked[ranked.len() - k..])))
}

pub fn rank_by_score(samples: &[ScoredSample]) -> Vec<&ScoredSample> {
    let mut ranked: Vec<&ScoredSample> = samples.iter().collect();
    ranked.sort_by(|a, b| b.human_mean.total_cmp(&a.human_mean).then_with(|| a.id.cmp(&b.id)));
    ranked
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Score the whole output instead of the body after the answer sentence.
    pub full_text: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub correct: bool,
    pub rouge1: Option<RougeScore>,
    pub rouge2: Option<RougeScore>,
    pub rouge_l: Option<RougeScore>,
    pub embed_match: Option<RougeScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub system: String,
    pub embedder: String,
    pub n_samples: usize,
    pub n_explained: usize,
    pub accuracy: f64,
    pub rouge1_f1: f64,
    pub rouge2_f1: f64,
    pub rouge_l_f1: f64,
    pub embed_match_f1: f64,
    pub per_sample: Vec<SampleScore>,
}

impl ScoreReport {
    /// Fixed-width table: system, accuracy, ROUGE-1, ROUGE-2, ROUGE-L, embedding F1.
    pub fn to_table(&self) -> String {
        let header = format!(
            "{:<16} {:>8} {:>8} {:>8} {:>8} {:>10}",
            "System", "Acc", "ROUGE-1", "ROUGE-2", "ROUGE-L", "Embed-F1"
        );
        let row = format!(
            "{:<16} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>10.3}",
            self.system, self.accuracy, self.rouge1_f1, self.rouge2_f1, self.rouge_l_f1, self.embed_match_f1
        );
        format!("{header}\n{row}\n")
    }
}

fn explanation_scores(
    output: &str,
    reference: &str,
    provider: &dyn EmbeddingProvider,
    options: ReportOptions,
) -> Option<[RougeScore; 4]> {
    let body = |t: &str| if options.full_text { tokenize(t) } else { tokenize(strip_answer_sentence(t)) };
    let reference = body(reference);
    if reference.is_empty() {
        return None;
    }
    let candidate = body(output);
    let embed = embed_match_f1(&candidate, &reference, provider).unwrap_or_default();
    Some([
        rouge_n(&candidate, &reference, 1).expect("n = 1"),
        rouge_n(&candidate, &reference, 2).expect("n = 2"),
        rouge_l(&candidate, &reference),
        embed,
    ])
}

/// Per-sample and mean accuracy, ROUGE and embedding scores. Explanation
/// metrics cover samples that have a non-empty explanation label; an output
/// with no explanation body scores 0 on them.
pub fn aggregate_report(
    system: &str,
    predictions: &[PredictionRecord],
    gold: &[InstructionSample],
    explanation_labels: &HashMap<String, String>,
    provider: &dyn EmbeddingProvider,
    options: ReportOptions,
) -> Result<ScoreReport, MetricsError> {
    let acc = accuracy(predictions, gold)?;
    let labels: HashMap<&str, _> = gold.iter().map(|g| (g.id.as_str(), g.label)).collect();
    let per_sample: Vec<SampleScore> = predictions
        .par_iter()
        .map(|p| {
            let scores = explanation_labels
                .get(&p.id)
                .and_then(|r| explanation_scores(&p.output_text, r, provider, options));
            SampleScore {
                id: p.id.clone(),
                correct: parse_answer(&p.output_text) == labels.get(p.id.as_str()).copied(),
                rouge1: scores.map(|s| s[0]),
                rouge2: scores.map(|s| s[1]),
                rouge_l: scores.map(|s| s[2]),
                embed_match: scores.map(|s| s[3]),
            }
        })
        .collect();
    let explained: Vec<&SampleScore> = per_sample.iter().filter(|s| s.rouge1.is_some()).collect();
    let mean = |f: fn(&SampleScore) -> Option<RougeScore>| {
        if explained.is_empty() {
            0.0
        } else {
            explained.iter().map(|s| f(s).unwrap().f1).sum::<f64>() / explained.len() as f64
        }
    };
    Ok(ScoreReport {
        system: system.to_string(),
        embedder: provider.name().to_string(),
        n_samples: predictions.len(),
        n_explained: explained.len(),
        accuracy: acc,
        rouge1_f1: mean(|s| s.rouge1),
        rouge2_f1: mean(|s| s.rouge2),
        rouge_l_f1: mean(|s| s.rouge_l),
        embed_match_f1: mean(|s| s.embed_match),
        per_sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{label_to_answer_phrase, ClassificationLabel, DatasetSetting};

    fn seq(words: &[&str]) -> TokenSequence {
        words.iter().copied().collect()
    }

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("The cat sat.").tokens(), ["the", "cat", "sat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("B.D.Wong").tokens(), ["b", "d", "wong"]);
        assert_eq!(tokenize("  ,,, ").len(), 0);
    }

    #[test]
    fn rouge_hand_cases() {
        let c = seq(&["the", "cat", "sat"]);
        let r = seq(&["the", "cat", "ate"]);
        let r1 = rouge_n(&c, &r, 1).unwrap();
        assert!((r1.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r1.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((rouge_n(&c, &r, 2).unwrap().f1 - 0.5).abs() < 1e-12);
        assert!((rouge_l(&c, &r).f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rouge_n(&c, &c, 1).unwrap().f1, 1.0);
        assert_eq!(rouge_l(&c, &c).f1, 1.0);
    }

    #[test]
    fn rouge_degenerate() {
        let short = seq(&["a"]);
        assert_eq!(rouge_n(&short, &seq(&["a", "b"]), 2).unwrap(), RougeScore::default());
        assert_eq!(rouge_l(&TokenSequence::default(), &short), RougeScore::default());
        assert_eq!(rouge_n(&short, &short, 0), Err(MetricsError::ZeroN));
    }

    #[test]
    fn clipped_counts() {
        let c = seq(&["the", "the", "the"]);
        let r = seq(&["the", "cat"]);
        let s = rouge_n(&c, &r, 1).unwrap();
        assert!((s.precision - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reversed_sequence_lcs_is_one() {
        let words = ["a", "b", "c", "d", "e", "f"];
        for k in 1..=6 {
            let fwd = seq(&words[..k]);
            let rev: TokenSequence = words[..k].iter().rev().copied().collect();
            assert_eq!(lcs_len(fwd.tokens(), rev.tokens()), 1);
        }
    }

    #[test]
    fn embed_identity_and_orthogonal() {
        let p = HashEmbedding::new(16, 3);
        let s = tokenize("both texts share a nostalgic tone");
        assert_eq!(embed_match_f1(&s, &s, &p).unwrap().f1, 1.0);
        let ortho = TableEmbedding::new(2).with("x", vec![1.0, 0.0]).with("y", vec![0.0, 1.0]);
        assert_eq!(embed_match_f1(&seq(&["x"]), &seq(&["y"]), &ortho).unwrap().f1, 0.0);
        assert_eq!(
            embed_match_f1(&TokenSequence::default(), &s, &p),
            Err(MetricsError::EmptySequence)
        );
    }

    #[test]
    fn hash_embedding_is_deterministic() {
        let p = HashEmbedding::new(8, 1);
        assert_eq!(p.embed("tone"), p.embed("tone"));
        assert_ne!(p.embed("tone"), p.embed("mood"));
        assert!(p.embed("x").iter().all(|v| (0.0..1.0).contains(v)));
    }

    fn gold(n: usize) -> Vec<InstructionSample> {
        (0..n)
            .map(|i| InstructionSample {
                id: format!("g-{i}"),
                instruction: "q".into(),
                text1: "a".into(),
                text2: "b".into(),
                label: if i % 2 == 0 { ClassificationLabel::SameAuthor } else { ClassificationLabel::DifferentAuthor },
                explanation: None,
                setting: DatasetSetting::ClassificationOnly,
            })
            .collect()
    }

    #[test]
    fn accuracy_counts() {
        let g = gold(10);
        let preds: Vec<PredictionRecord> = g
            .iter()
            .enumerate()
            .map(|(i, s)| PredictionRecord {
                id: s.id.clone(),
                output_text: if i < 7 {
                    label_to_answer_phrase(s.label).into()
                } else {
                    label_to_answer_phrase(s.label.flipped()).into()
                },
            })
            .collect();
        assert_eq!(accuracy(&preds, &g).unwrap(), 0.7);

        let garbage: Vec<_> = g
            .iter()
            .map(|s| PredictionRecord { id: s.id.clone(), output_text: "dunno".into() })
            .collect();
        assert_eq!(accuracy(&garbage, &g).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_errors() {
        let g = gold(2);
        let unknown = vec![PredictionRecord { id: "zz".into(), output_text: "x".into() }];
        assert_eq!(accuracy(&unknown, &g), Err(MetricsError::UnknownId("zz".into())));
        let dup = vec![
            PredictionRecord { id: "g-0".into(), output_text: "x".into() },
            PredictionRecord { id: "g-0".into(), output_text: "y".into() },
        ];
        assert_eq!(accuracy(&dup, &g), Err(MetricsError::DuplicateId("g-0".into())));
        assert_eq!(accuracy(&[], &g), Err(MetricsError::NoPredictions));
    }

    fn scored(pattern: &[bool]) -> Vec<ScoredSample> {
        pattern
            .iter()
            .enumerate()
            .map(|(i, &c)| ScoredSample {
                id: format!("s{i}"),
                human_mean: (pattern.len() - i) as f64,
                correct: c,
            })
            .collect()
    }

    #[test]
    fn quartiles_hand_fixture() {
        let s = scored(&[true, true, false, true, false, false, true, false]);
        assert_eq!(quartile_accuracy(&s, 0.25).unwrap(), (1.0, 0.5));
    }

    #[test]
    fn quartile_ties_use_ids() {
        let s: Vec<ScoredSample> = ["d", "a", "c", "b", "e"]
            .iter()
            .map(|id| ScoredSample { id: id.to_string(), human_mean: 3.0, correct: *id == "a" })
            .collect();
        // ceil(0.25 * 5) = 2: top {a, b}, bottom {d, e}
        assert_eq!(quartile_accuracy(&s, 0.25).unwrap(), (0.5, 0.0));
        assert!(quartile_accuracy(&s, 0.6).is_err());
        assert!(quartile_accuracy(&s[..1], 0.25).is_err());
    }

    #[test]
    fn report_identity() {
        let g = gold(3);
        let expl: HashMap<String, String> = g
            .iter()
            .map(|s| (s.id.clone(), format!("Both texts share tone number {}. Written by the same author.", s.id)))
            .collect();
        let preds: Vec<_> = g
            .iter()
            .map(|s| PredictionRecord {
                id: s.id.clone(),
                output_text: format!("{} {}", label_to_answer_phrase(s.label), expl[&s.id]),
            })
            .collect();
        let r = aggregate_report("sys", &preds, &g, &expl, &HashEmbedding::default(), ReportOptions::default()).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!((r.rouge1_f1, r.rouge2_f1, r.rouge_l_f1, r.embed_match_f1), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.n_explained, 3);
        assert!(r.to_table().contains("ROUGE-L"));
    }

    #[test]
    fn classification_only_output_scores_zero_on_explanations() {
        let g = gold(1);
        let expl = HashMap::from([("g-0".to_string(), "Some reference body.".to_string())]);
        let preds = vec![PredictionRecord { id: "g-0".into(), output_text: "The correct answer is yes.".into() }];
        let r = aggregate_report("sys", &preds, &g, &expl, &HashEmbedding::default(), ReportOptions::default()).unwrap();
        assert_eq!(r.rouge1_f1, 0.0);
        assert_eq!(r.embed_match_f1, 0.0);
        assert_eq!(r.accuracy, 1.0);
    }
}
