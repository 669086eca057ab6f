//! Rubric-based human evaluation: recording, aggregation, and the terminal
//! annotation loop.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{read_records, DatasetError};
use crate::metrics::ScoredSample;

/// Samples drawn per dataset for annotation.
pub const DEFAULT_SESSION_SIZE: usize = 100;
/// Checklist size of explanations that walk the full feature list.
pub const FULL_COVERAGE_MAX: u32 = 11;
/// Checklist size of the shorter baseline feature list.
pub const BASELINE_COVERAGE_MAX: u32 = 7;

#[derive(Debug, Error)]
pub enum HumanEvalError {
    #[error("{criterion} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        criterion: Criterion,
        value: u32,
        min: u32,
        max: u32,
    },
    #[error("rating for sample {sample_id} by {evaluator_id} on {system_name} already recorded")]
    DuplicateRating {
        sample_id: String,
        evaluator_id: String,
        system_name: String,
    },
    #[error("invalid rubric: {0}")]
    InvalidRubric(String),
    #[error("session has no ratings")]
    EmptySession,
    #[error(transparent)]
    Storage(#[from] DatasetError),
    #[error("terminal i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Coverage,
    Relevance,
    Reasonableness,
    Persuasiveness,
}

impl Criterion {
    /// Column order of the summary table.
    pub const ALL: [Criterion; 4] = [
        Criterion::Coverage,
        Criterion::Relevance,
        Criterion::Reasonableness,
        Criterion::Persuasiveness,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Criterion::Coverage => "Coverage",
            Criterion::Relevance => "Relevance",
            Criterion::Reasonableness => "Reasonableness",
            Criterion::Persuasiveness => "Persuasiveness",
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RubricConfig {
    pub coverage_max: u32,
    #[serde(default = "likert_min")]
    pub likert_min: u32,
    #[serde(default = "likert_max")]
    pub likert_max: u32,
}

fn likert_min() -> u32 {
    1
}
fn likert_max() -> u32 {
    5
}

impl Default for RubricConfig {
    fn default() -> Self {
        Self::with_coverage(FULL_COVERAGE_MAX)
    }
}

impl RubricConfig {
    pub fn with_coverage(coverage_max: u32) -> Self {
        Self {
            coverage_max,
            likert_min: 1,
            likert_max: 5,
        }
    }

    pub fn validate(&self) -> Result<(), HumanEvalError> {
        if self.coverage_max == 0 {
            return Err(HumanEvalError::InvalidRubric("coverage_max must be positive".into()));
        }
        if self.likert_min >= self.likert_max {
            return Err(HumanEvalError::InvalidRubric(format!(
                "likert_min {} must be below likert_max {}",
                self.likert_min, self.likert_max
            )));
        }
        Ok(())
    }

    pub fn range(&self, c: Criterion) -> (u32, u32) {
        match c {
            Criterion::Coverage => (0, self.coverage_max),
            _ => (self.likert_min, self.likert_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rating {
    pub sample_id: String,
    pub evaluator_id: String,
    pub system_name: String,
    pub coverage: u32,
    pub relevance: u32,
    pub reasonableness: u32,
    pub persuasiveness: u32,
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

impl Rating {
    pub fn value(&self, c: Criterion) -> u32 {
        match c {
            Criterion::Coverage => self.coverage,
            Criterion::Relevance => self.relevance,
            Criterion::Reasonableness => self.reasonableness,
            Criterion::Persuasiveness => self.persuasiveness,
        }
    }

    fn key(&self) -> (String, String, String) {
        (self.sample_id.clone(), self.evaluator_id.clone(), self.system_name.clone())
    }

    pub fn check(&self, rubric: &RubricConfig) -> Result<(), HumanEvalError> {
        for c in Criterion::ALL {
            let (min, max) = rubric.range(c);
            let value = self.value(c);
            if !(min..=max).contains(&value) {
                return Err(HumanEvalError::OutOfRange {
                    criterion: c,
                    value,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }
}

/// Ratings collected so far, with a rubric per system.
#[derive(Debug, Clone, Default)]
pub struct RatingSession {
    default_rubric: RubricConfig,
    rubrics: BTreeMap<String, RubricConfig>,
    ratings: Vec<Rating>,
    keys: HashSet<(String, String, String)>,
}

impl RatingSession {
    pub fn new(default_rubric: RubricConfig) -> Result<Self, HumanEvalError> {
        default_rubric.validate()?;
        Ok(Self {
            default_rubric,
            ..Self::default()
        })
    }

    /// Overrides the rubric for one system, e.g. a 7-feature baseline.
    pub fn set_rubric(&mut self, system: impl Into<String>, rubric: RubricConfig) -> Result<(), HumanEvalError> {
        rubric.validate()?;
        self.rubrics.insert(system.into(), rubric);
        Ok(())
    }

    pub fn rubric_for(&self, system: &str) -> RubricConfig {
        self.rubrics.get(system).copied().unwrap_or(self.default_rubric)
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn contains(&self, sample_id: &str, evaluator_id: &str, system_name: &str) -> bool {
        self.keys
            .contains(&(sample_id.to_string(), evaluator_id.to_string(), system_name.to_string()))
    }

    pub fn record_rating(&mut self, rating: Rating) -> Result<(), HumanEvalError> {
        rating.check(&self.rubric_for(&rating.system_name))?;
        if !self.keys.insert(rating.key()) {
            return Err(HumanEvalError::DuplicateRating {
                sample_id: rating.sample_id,
                evaluator_id: rating.evaluator_id,
                system_name: rating.system_name,
            });
        }
        self.ratings.push(rating);
        Ok(())
    }

    /// A session holding only one system's ratings.
    pub fn for_system(&self, system: &str) -> RatingSession {
        let mut out = RatingSession {
            default_rubric: self.rubric_for(system),
            ..Self::default()
        };
        for r in self.ratings.iter().filter(|r| r.system_name == system) {
            out.keys.insert(r.key());
            out.ratings.push(r.clone());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionMeans {
    pub coverage: f64,
    pub relevance: f64,
    pub reasonableness: f64,
    pub persuasiveness: f64,
}

impl CriterionMeans {
    pub fn get(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Coverage => self.coverage,
            Criterion::Relevance => self.relevance,
            Criterion::Reasonableness => self.reasonableness,
            Criterion::Persuasiveness => self.persuasiveness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system_name: String,
    pub coverage_max: u32,
    pub means: CriterionMeans,
    pub n_ratings: usize,
    pub n_samples: usize,
    pub n_evaluators: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricSummary {
    pub systems: Vec<SystemSummary>,
    pub n_samples: usize,
    pub n_evaluators: usize,
}

/// Per-system arithmetic means of each criterion over all ratings.
pub fn summarize(session: &RatingSession) -> Result<RubricSummary, HumanEvalError> {
    if session.is_empty() {
        return Err(HumanEvalError::EmptySession);
    }
    let mut by_system: BTreeMap<&str, Vec<&Rating>> = BTreeMap::new();
    for r in &session.ratings {
        by_system.entry(r.system_name.as_str()).or_default().push(r);
    }
    let systems = by_system
        .into_iter()
        .map(|(system, ratings)| {
            let n = ratings.len() as f64;
            let mean = |c: Criterion| ratings.iter().map(|r| f64::from(r.value(c))).sum::<f64>() / n;
            SystemSummary {
                system_name: system.to_string(),
                coverage_max: session.rubric_for(system).coverage_max,
                means: CriterionMeans {
                    coverage: mean(Criterion::Coverage),
                    relevance: mean(Criterion::Relevance),
                    reasonableness: mean(Criterion::Reasonableness),
                    persuasiveness: mean(Criterion::Persuasiveness),
                },
                n_ratings: ratings.len(),
                n_samples: ratings.iter().map(|r| &r.sample_id).collect::<BTreeSet<_>>().len(),
                n_evaluators: ratings.iter().map(|r| &r.evaluator_id).collect::<BTreeSet<_>>().len(),
            }
        })
        .collect();
    Ok(RubricSummary {
        systems,
        n_samples: session.ratings.iter().map(|r| &r.sample_id).collect::<BTreeSet<_>>().len(),
        n_evaluators: session.ratings.iter().map(|r| &r.evaluator_id).collect::<BTreeSet<_>>().len(),
    })
}

impl RubricSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn to_table(&self) -> String {
        let width = self
            .systems
            .iter()
            .map(|s| s.system_name.len())
            .chain(["System".len()])
            .max()
            .unwrap_or(6);
        let mut out = format!("{:<width$}", "System");
        for c in Criterion::ALL {
            let _ = write!(out, "  {:>14}", c.title());
        }
        out.push('\n');
        for s in &self.systems {
            let _ = write!(out, "{:<width$}", s.system_name);
            for c in Criterion::ALL {
                let _ = write!(out, "  {:>14.2}", s.means.get(c));
            }
            out.push('\n');
        }
        out
    }
}

/// Coverage mapped linearly from `[0, coverage_max]` onto `[1, 5]`.
pub fn rescale_coverage(coverage: u32, coverage_max: u32) -> f64 {
    1.0 + 4.0 * f64::from(coverage) / f64::from(coverage_max)
}

/// One score per sample: each rating becomes the mean of its rescaled
/// coverage and three Likert values, then ratings of the same sample are
/// averaged. Sorted by sample id.
pub fn normalized_sample_scores(session: &RatingSession, coverage_max: u32) -> Vec<(String, f64)> {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in &session.ratings {
        let per_rating = (rescale_coverage(r.coverage, coverage_max)
            + f64::from(r.relevance)
            + f64::from(r.reasonableness)
            + f64::from(r.persuasiveness))
            / 4.0;
        let e = acc.entry(r.sample_id.as_str()).or_default();
        e.0 += per_rating;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(id, (sum, n))| (id.to_string(), sum / n as f64))
        .collect()
}

/// Pairs sample scores with per-sample correctness for the quartile analysis.
/// Samples missing from `correct` are skipped.
pub fn scored_samples(scores: &[(String, f64)], correct: &BTreeMap<String, bool>) -> Vec<ScoredSample> {
    scores
        .iter()
        .filter_map(|(id, mean)| {
            correct.get(id).map(|&c| ScoredSample {
                id: id.clone(),
                human_mean: *mean,
                correct: c,
            })
        })
        .collect()
}

pub fn append_rating(path: impl AsRef<Path>, rating: &Rating) -> Result<(), HumanEvalError> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(rating).expect("rating serializes");
    line.push('\n');
    file.write_all(line.as_bytes())?;
    Ok(())
}

pub fn load_ratings(path: impl AsRef<Path>) -> Result<Vec<Rating>, HumanEvalError> {
    Ok(read_records(path)?)
}

/// Replays a ratings file into a session, applying all validation rules.
pub fn load_session(path: impl AsRef<Path>, session: &mut RatingSession) -> Result<usize, HumanEvalError> {
    let ratings = load_ratings(path)?;
    let n = ratings.len();
    for r in ratings {
        session.record_rating(r)?;
    }
    Ok(n)
}

/// An explanation to be rated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub sample_id: String,
    pub system_name: String,
    pub text: String,
}

/// Draws up to `n` items with a seeded generator, returned in id order.
pub fn select_items(items: &[AnnotationItem], n: usize, seed: u64) -> Vec<AnnotationItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<AnnotationItem> = items.choose_multiple(&mut rng, n.min(items.len())).cloned().collect();
    chosen.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    chosen
}

fn ask<R: BufRead + ?Sized, W: Write + ?Sized>(
    input: &mut R,
    output: &mut W,
    criterion: Criterion,
    min: u32,
    max: u32,
) -> Result<Option<u32>, HumanEvalError> {
    loop {
        write!(output, "{} [{min}-{max}]: ", criterion.title())?;
        output.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        let trimmed = line.trim();
        if trimmed.eq_ignore_ascii_case("q") {
            return Ok(None);
        }
        match trimmed.parse::<u32>() {
            Ok(v) if (min..=max).contains(&v) => return Ok(Some(v)),
            _ => writeln!(output, "  enter a whole number from {min} to {max}, or q to stop")?,
        }
    }
}

/// Terminal annotation loop. Items this evaluator has already rated are
/// skipped, so an interrupted session can resume. Each completed rating is
/// recorded in `session` and handed to `sink` (typically [`append_rating`]).
/// Stops at end of input or on `q`; returns the number of new ratings.
pub fn annotate<R: BufRead + ?Sized, W: Write + ?Sized>(
    session: &mut RatingSession,
    items: &[AnnotationItem],
    evaluator_id: &str,
    input: &mut R,
    output: &mut W,
    clock: impl Fn() -> u64,
    mut sink: impl FnMut(&Rating) -> Result<(), HumanEvalError>,
) -> Result<usize, HumanEvalError> {
    let mut recorded = 0;
    let pending: Vec<&AnnotationItem> = items
        .iter()
        .filter(|it| !session.contains(&it.sample_id, evaluator_id, &it.system_name))
        .collect();
    for (i, item) in pending.iter().enumerate() {
        let rubric = session.rubric_for(&item.system_name);
        writeln!(
            output,
            "\n=== [{}/{}] sample {} ({}) ===\n{}\n",
            i + 1,
            pending.len(),
            item.sample_id,
            item.system_name,
            item.text
        )?;
        let mut values = [0u32; 4];
        for (slot, c) in values.iter_mut().zip(Criterion::ALL) {
            let (min, max) = rubric.range(c);
            match ask(input, output, c, min, max)? {
                Some(v) => *slot = v,
                None => return Ok(recorded),
            }
        }
        let rating = Rating {
            sample_id: item.sample_id.clone(),
            evaluator_id: evaluator_id.to_string(),
            system_name: item.system_name.clone(),
            coverage: values[0],
            relevance: values[1],
            reasonableness: values[2],
            persuasiveness: values[3],
            timestamp: clock(),
        };
        session.record_rating(rating.clone())?;
        sink(&rating)?;
        recorded += 1;
    }
    Ok(recorded)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rating(sample: &str, evaluator: &str, vals: [u32; 4]) -> Rating {
        Rating {
            sample_id: sample.into(),
            evaluator_id: evaluator.into(),
            system_name: "sys".into(),
            coverage: vals[0],
            relevance: vals[1],
            reasonableness: vals[2],
            persuasiveness: vals[3],
            timestamp: 0,
        }
    }

    #[test]
    fn range_and_duplicate_rules() {
        let mut s = RatingSession::new(RubricConfig::default()).unwrap();
        let err = s.record_rating(rating("x", "e1", [12, 3, 3, 3])).unwrap_err();
        assert!(matches!(err, HumanEvalError::OutOfRange { criterion: Criterion::Coverage, .. }));
        let err = s.record_rating(rating("x", "e1", [5, 0, 3, 3])).unwrap_err();
        assert!(matches!(err, HumanEvalError::OutOfRange { criterion: Criterion::Relevance, .. }));
        s.record_rating(rating("x", "e1", [5, 3, 3, 3])).unwrap();
        assert_eq!(s.len(), 1);
        assert!(matches!(
            s.record_rating(rating("x", "e1", [6, 4, 4, 4])),
            Err(HumanEvalError::DuplicateRating { .. })
        ));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn baseline_rubric_is_per_system() {
        let mut s = RatingSession::new(RubricConfig::default()).unwrap();
        s.set_rubric("base", RubricConfig::with_coverage(BASELINE_COVERAGE_MAX)).unwrap();
        let mut r = rating("x", "e1", [8, 3, 3, 3]);
        r.system_name = "base".into();
        assert!(s.record_rating(r).is_err());
        assert!(s.record_rating(rating("x", "e1", [8, 3, 3, 3])).is_ok());
    }

    #[test]
    fn three_rater_mean() {
        let mut s = RatingSession::new(RubricConfig::default()).unwrap();
        for (e, rel) in [("a", 4), ("b", 4), ("c", 5)] {
            s.record_rating(rating("x", e, [11, rel, 3, 3])).unwrap();
        }
        let sum = summarize(&s).unwrap();
        assert!((sum.systems[0].means.relevance - 13.0 / 3.0).abs() < 1e-12);
        assert_eq!(sum.n_evaluators, 3);
        assert_eq!(sum.n_samples, 1);
    }

    #[test]
    fn empty_session_has_no_summary() {
        let s = RatingSession::new(RubricConfig::default()).unwrap();
        assert!(matches!(summarize(&s), Err(HumanEvalError::EmptySession)));
    }

    #[test]
    fn normalization_anchors() {
        let mut s = RatingSession::new(RubricConfig::default()).unwrap();
        s.record_rating(rating("hi", "e", [11, 5, 5, 5])).unwrap();
        s.record_rating(rating("lo", "e", [0, 1, 1, 1])).unwrap();
        s.record_rating(rating("mid", "e", [11, 4, 4, 4])).unwrap();
        let scores: BTreeMap<_, _> = normalized_sample_scores(&s, 11).into_iter().collect();
        assert_eq!(scores["hi"], 5.0);
        assert_eq!(scores["lo"], 1.0);
        assert_eq!(scores["mid"], 4.25);
    }

    #[test]
    fn table_column_order() {
        let mut s = RatingSession::new(RubricConfig::default()).unwrap();
        s.record_rating(rating("x", "e", [9, 4, 4, 5])).unwrap();
        let table = summarize(&s).unwrap().to_table();
        let header = table.lines().next().unwrap();
        let pos: Vec<usize> = Criterion::ALL.iter().map(|c| header.find(c.title()).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn annotate_reprompts_and_stops() {
        let mut s = RatingSession::new(RubricConfig::default()).unwrap();
        let items = vec![
            AnnotationItem { sample_id: "1".into(), system_name: "sys".into(), text: "t1".into() },
            AnnotationItem { sample_id: "2".into(), system_name: "sys".into(), text: "t2".into() },
        ];
        let mut input = "12\n11\n5\nx\n4\n3\n7\nq\n".as_bytes();
        let mut out = Vec::new();
        let mut sunk = Vec::new();
        let n = annotate(&mut s, &items, "ann", &mut input, &mut out, || 42, |r| {
            sunk.push(r.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(n, 1);
        assert_eq!(sunk[0].coverage, 11);
        assert_eq!(sunk[0].persuasiveness, 3);
        assert_eq!(sunk[0].timestamp, 42);
        assert!(String::from_utf8(out).unwrap().contains("whole number"));

        // resume skips the already rated item
        let mut input = "1\n1\n1\n1\n".as_bytes();
        let n = annotate(&mut s, &items, "ann", &mut input, &mut Vec::new(), || 0, |_| Ok(())).unwrap();
        assert_eq!(n, 1);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn jsonl_append_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        append_rating(&path, &rating("a", "e", [1, 2, 3, 4])).unwrap();
        append_rating(&path, &rating("b", "e", [1, 2, 3, 4])).unwrap();
        let mut s = RatingSession::new(RubricConfig::default()).unwrap();
        assert_eq!(load_session(&path, &mut s).unwrap(), 2);
        append_rating(&path, &rating("a", "e", [1, 2, 3, 4])).unwrap();
        let mut s = RatingSession::new(RubricConfig::default()).unwrap();
        assert!(load_session(&path, &mut s).is_err());
    }

    #[test]
    fn selection_is_seeded() {
        let items: Vec<AnnotationItem> = (0..300)
            .map(|i| AnnotationItem { sample_id: format!("{i:03}"), system_name: "s".into(), text: String::new() })
            .collect();
        let a = select_items(&items, DEFAULT_SESSION_SIZE, 5);
        assert_eq!(a.len(), 100);
        assert_eq!(a, select_items(&items, DEFAULT_SESSION_SIZE, 5));
        assert_ne!(a, select_items(&items, DEFAULT_SESSION_SIZE, 6));
    }
}
