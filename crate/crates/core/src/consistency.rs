//! Consistency verification between generated explanations and known labels.
//!
//! A generated text passes when
//! (a) its answer phrase, if any, agrees with the label,
//! (b) it contains at least one label-consistent phrase, and
//! (c) it contains no label-inconsistent phrase.

use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AVPair, ClassificationLabel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("{0} phrase list must not be empty")]
    EmptyList(&'static str),
    #[error("phrase {0:?} appears in both lists")]
    Overlap(String),
    #[error("empty phrase")]
    EmptyPhrase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhrasePolicy {
    #[serde(default = "default_same")]
    pub same_phrases: Vec<String>,
    #[serde(default = "default_different")]
    pub different_phrases: Vec<String>,
    #[serde(default)]
    pub case_sensitive: bool,
    /// Restrict the conflicting-phrase check to the last sentence.
    #[serde(default)]
    pub conclusion_only: bool,
}

fn default_same() -> Vec<String> {
    vec!["written by the same author".to_string()]
}

fn default_different() -> Vec<String> {
    vec!["written by different authors".to_string()]
}

impl Default for PhrasePolicy {
    fn default() -> Self {
        Self {
            same_phrases: default_same(),
            different_phrases: default_different(),
            case_sensitive: false,
            conclusion_only: false,
        }
    }
}

impl PhrasePolicy {
    pub fn new(same: Vec<String>, different: Vec<String>, case_sensitive: bool) -> Result<Self, PolicyError> {
        let p = Self {
            same_phrases: same,
            different_phrases: different,
            case_sensitive,
            conclusion_only: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.same_phrases.is_empty() {
            return Err(PolicyError::EmptyList("same-author"));
        }
        if self.different_phrases.is_empty() {
            return Err(PolicyError::EmptyList("different-author"));
        }
        if self
            .same_phrases
            .iter()
            .chain(&self.different_phrases)
            .any(|p| p.is_empty())
        {
            return Err(PolicyError::EmptyPhrase);
        }
        let fold = |s: &String| if self.case_sensitive { s.clone() } else { s.to_lowercase() };
        for p in &self.same_phrases {
            if self.different_phrases.iter().any(|q| fold(q) == fold(p)) {
                return Err(PolicyError::Overlap(p.clone()));
            }
        }
        Ok(())
    }

    fn phrases_for(&self, label: ClassificationLabel) -> (&[String], &[String]) {
        match label {
            ClassificationLabel::SameAuthor => (&self.same_phrases, &self.different_phrases),
            ClassificationLabel::DifferentAuthor => (&self.different_phrases, &self.same_phrases),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerificationReason {
    Ok,
    AnswerMismatch,
    MissingConsistentPhrase,
    ConflictingPhrasePresent,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseMatch {
    pub phrase: String,
    /// Offset in characters from the start of the text.
    pub char_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub passed: bool,
    pub reason: VerificationReason,
    pub matched_phrases: Vec<PhraseMatch>,
}

fn answer_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bthe\s+correct\s+answer\s+is\s*[:\-]?\s*[\x22'*]*(yes|no)\b").unwrap())
}

/// Label asserted by the first "The correct answer is yes/no" in `text`.
pub fn parse_answer(text: &str) -> Option<ClassificationLabel> {
    let caps = answer_regex().captures(text)?;
    if caps[1].eq_ignore_ascii_case("yes") {
        Some(ClassificationLabel::SameAuthor)
    } else {
        Some(ClassificationLabel::DifferentAuthor)
    }
}

/// Byte range of the leading answer sentence, when the text opens with one.
pub(crate) fn leading_answer_span(text: &str) -> Option<std::ops::Range<usize>> {
    let m = answer_regex().find(text)?;
    if !text[..m.start()].trim().is_empty() {
        return None;
    }
    let rest = &text[m.end()..];
    let tail = rest
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_punctuation() || c.is_whitespace()))
        .map(|(i, _)| i)
        .unwrap_or(rest.len());
    Some(0..m.end() + tail)
}

/// Removes a leading answer sentence ("The correct answer is yes.") if present.
pub fn strip_answer_sentence(text: &str) -> &str {
    match leading_answer_span(text) {
        Some(span) => &text[span.end..],
        None => text,
    }
}

fn find_all(haystack: &str, needle: &str) -> Vec<usize> {
    haystack.match_indices(needle).map(|(i, _)| i).collect()
}

fn char_offset(s: &str, byte: usize) -> usize {
    s[..byte].chars().count()
}

fn last_sentence(text: &str) -> &str {
    let trimmed = text.trim_end().trim_end_matches(['.', '!', '?']);
    match trimmed.rfind(['.', '!', '?', '\n']) {
        Some(i) => &text[i + 1..],
        None => text,
    }
}

pub fn verify_alignment(
    generated_text: &str,
    label: ClassificationLabel,
    policy: &PhrasePolicy,
) -> VerificationResult {
    let folded;
    let haystack = if policy.case_sensitive {
        generated_text
    } else {
        folded = generated_text.to_lowercase();
        folded.as_str()
    };
    let fold = |p: &str| if policy.case_sensitive { p.to_string() } else { p.to_lowercase() };
    let (consistent, conflicting) = policy.phrases_for(label);

    let mut matched = Vec::new();
    let mut consistent_found = false;
    for phrase in consistent {
        for at in find_all(haystack, &fold(phrase)) {
            consistent_found = true;
            matched.push(PhraseMatch {
                phrase: phrase.clone(),
                char_offset: char_offset(haystack, at),
            });
        }
    }
    let conflict_region = if policy.conclusion_only {
        let tail = last_sentence(haystack);
        (haystack.len() - tail.len(), tail)
    } else {
        (0, haystack)
    };
    let mut conflict_found = false;
    for phrase in conflicting {
        for at in find_all(conflict_region.1, &fold(phrase)) {
            conflict_found = true;
            matched.push(PhraseMatch {
                phrase: phrase.clone(),
                char_offset: char_offset(haystack, conflict_region.0 + at),
            });
        }
    }
    matched.sort_by_key(|m| m.char_offset);

    let answer = parse_answer(generated_text);
    let reason = if answer.is_some_and(|a| a != label) {
        VerificationReason::AnswerMismatch
    } else if !consistent_found {
        if answer.is_none() {
            VerificationReason::Unparseable
        } else {
            VerificationReason::MissingConsistentPhrase
        }
    } else if conflict_found {
        VerificationReason::ConflictingPhrasePresent
    } else {
        VerificationReason::Ok
    };
    VerificationResult {
        passed: reason == VerificationReason::Ok,
        reason,
        matched_phrases: matched,
    }
}

/// One generated explanation awaiting verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedSample {
    pub pair: AVPair,
    pub label: ClassificationLabel,
    pub generated_text: String,
}

/// A rejected sample with the verifier's verdict, for audit export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedSample {
    pub id: String,
    pub label: ClassificationLabel,
    pub generated_text: String,
    pub verification: VerificationResult,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<GeneratedSample>,
    pub dropped: Vec<DroppedSample>,
    pub drop_rate: f64,
}

/// Partitions samples by [`verify_alignment`], preserving input order.
pub fn filter_verified(samples: Vec<GeneratedSample>, policy: &PhrasePolicy) -> FilterOutcome {
    let total = samples.len();
    let verdicts: Vec<VerificationResult> = samples
        .par_iter()
        .map(|s| verify_alignment(&s.generated_text, s.label, policy))
        .collect();
    let mut out = FilterOutcome::default();
    for (sample, verdict) in samples.into_iter().zip(verdicts) {
        if verdict.passed {
            out.kept.push(sample);
        } else {
            out.dropped.push(DroppedSample {
                id: sample.pair.id,
                label: sample.label,
                generated_text: sample.generated_text,
                verification: verdict,
            });
        }
    }
    out.drop_rate = if total == 0 {
        0.0
    } else {
        out.dropped.len() as f64 / total as f64
    };
    out
}
