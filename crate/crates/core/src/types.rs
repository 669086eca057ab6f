//! Domain types shared by every pipeline stage.
//!
//! All of these are plain value objects. Texts are kept verbatim; any
//! normalization happens inside metric tokenization only.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("sample {0} uses the classification-and-explanation setting but carries no explanation")]
    MissingExplanation(String),
    #[error("unknown label {0:?}, expected \"yes\" or \"no\"")]
    UnknownLabel(String),
}

/// Corpus a text was drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceDataset {
    Imdb,
    Twitter,
    Yelp,
    Synthetic,
    Other(String),
}

impl SourceDataset {
    pub fn name(&self) -> &str {
        match self {
            SourceDataset::Imdb => "imdb",
            SourceDataset::Twitter => "twitter",
            SourceDataset::Yelp => "yelp",
            SourceDataset::Synthetic => "synthetic",
            SourceDataset::Other(name) => name,
        }
    }
}

impl fmt::Display for SourceDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single document with its author.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorText {
    pub author_id: String,
    pub text: String,
    pub source_dataset: SourceDataset,
}

impl AuthorText {
    pub fn new(
        author_id: impl Into<String>,
        text: impl Into<String>,
        source_dataset: SourceDataset,
    ) -> Result<Self, TypeError> {
        let author_id = author_id.into();
        let text = text.into();
        if author_id.is_empty() {
            return Err(TypeError::Empty("author_id"));
        }
        if text.trim().is_empty() {
            return Err(TypeError::Empty("text"));
        }
        Ok(Self {
            author_id,
            text,
            source_dataset,
        })
    }
}

/// Binary verification label.
///
/// Serializes as `"yes"` / `"no"`, the same tokens used in answer phrasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassificationLabel {
    #[serde(rename = "yes")]
    SameAuthor,
    #[serde(rename = "no")]
    DifferentAuthor,
}

impl ClassificationLabel {
    pub const ALL: [ClassificationLabel; 2] = [Self::SameAuthor, Self::DifferentAuthor];

    pub fn as_yes_no(self) -> &'static str {
        match self {
            Self::SameAuthor => "yes",
            Self::DifferentAuthor => "no",
        }
    }

    pub fn from_yes_no(s: &str) -> Result<Self, TypeError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Ok(Self::SameAuthor),
            "no" => Ok(Self::DifferentAuthor),
            _ => Err(TypeError::UnknownLabel(s.to_string())),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Self::SameAuthor => Self::DifferentAuthor,
            Self::DifferentAuthor => Self::SameAuthor,
        }
    }
}

impl fmt::Display for ClassificationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_yes_no())
    }
}

/// The sentence a model is trained to emit for a label.
pub fn label_to_answer_phrase(label: ClassificationLabel) -> &'static str {
    match label {
        ClassificationLabel::SameAuthor => "The correct answer is yes.",
        ClassificationLabel::DifferentAuthor => "The correct answer is no.",
    }
}

/// Two texts to verify, with the gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AVPair {
    pub id: String,
    pub text1: String,
    pub text2: String,
    pub label: ClassificationLabel,
}

impl AVPair {
    pub fn new(
        id: impl Into<String>,
        text1: impl Into<String>,
        text2: impl Into<String>,
        label: ClassificationLabel,
    ) -> Result<Self, TypeError> {
        let pair = Self {
            id: id.into(),
            text1: text1.into(),
            text2: text2.into(),
            label,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        if self.id.is_empty() {
            return Err(TypeError::Empty("id"));
        }
        if self.text1.trim().is_empty() {
            return Err(TypeError::Empty("text1"));
        }
        if self.text2.trim().is_empty() {
            return Err(TypeError::Empty("text2"));
        }
        Ok(())
    }
}

/// Stable sample identifier, `"{dataset}-{index}"`.
pub fn sample_id(dataset: &str, index: usize) -> String {
    format!("{dataset}-{index}")
}

/// The eleven stylistic dimensions an explanation is expected to cover,
/// in checklist order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LinguisticFeature {
    WritingStyle,
    ExpressionsIdioms,
    ToneMood,
    SentenceStructureSyntax,
    PunctuationStyle,
    SpecialCharactersCapitalization,
    CompoundSeparateSpelling,
    AcronymsAbbreviations,
    CharactersStyle,
    DiatopicVariationsForeignLanguages,
    OtherRelevantAspects,
}

impl LinguisticFeature {
    pub const ALL: [LinguisticFeature; 11] = [
        Self::WritingStyle,
        Self::ExpressionsIdioms,
        Self::ToneMood,
        Self::SentenceStructureSyntax,
        Self::PunctuationStyle,
        Self::SpecialCharactersCapitalization,
        Self::CompoundSeparateSpelling,
        Self::AcronymsAbbreviations,
        Self::CharactersStyle,
        Self::DiatopicVariationsForeignLanguages,
        Self::OtherRelevantAspects,
    ];

    /// Wording used in the numbered checklist of the explanation prompt.
    pub fn checklist_name(self) -> &'static str {
        match self {
            Self::WritingStyle => "writing style",
            Self::ExpressionsIdioms => "expressions and Idioms",
            Self::ToneMood => "tone and mood",
            Self::SentenceStructureSyntax => "sentence structure and syntax",
            Self::PunctuationStyle => "punctuation style",
            Self::SpecialCharactersCapitalization => "special characters style, capitalization style",
            Self::CompoundSeparateSpelling => "compound and separate spelling",
            Self::AcronymsAbbreviations => "acronyms and abbreviations",
            Self::CharactersStyle => "characters style",
            Self::DiatopicVariationsForeignLanguages => "Diatopic variations and foreign languages",
            Self::OtherRelevantAspects => "any other relevant aspect",
        }
    }

    /// Heading used when an explanation discusses the feature.
    pub fn heading(self) -> &'static str {
        match self {
            Self::WritingStyle => "Writing Style",
            Self::ExpressionsIdioms => "Expressions and Idioms",
            Self::ToneMood => "Tone and Mood",
            Self::SentenceStructureSyntax => "Sentence Structure and Syntax",
            Self::PunctuationStyle => "Punctuation Style",
            Self::SpecialCharactersCapitalization => "Special Characters Style, Capitalization Style",
            Self::CompoundSeparateSpelling => "Compound and Separate Spelling",
            Self::AcronymsAbbreviations => "Acronyms and Abbreviations",
            Self::CharactersStyle => "Characters Style",
            Self::DiatopicVariationsForeignLanguages => "Diatopic Variations and Foreign Languages",
            Self::OtherRelevantAspects => "Other Relevant Aspects",
        }
    }

    /// 1-based position in the checklist.
    pub fn number(self) -> usize {
        Self::ALL.iter().position(|f| *f == self).unwrap() + 1
    }
}

/// Which of the two dataset flavours a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetSetting {
    #[serde(rename = "cls")]
    ClassificationOnly,
    #[serde(rename = "cls-expl")]
    ClassificationAndExplanation,
}

impl DatasetSetting {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ClassificationOnly => "cls",
            Self::ClassificationAndExplanation => "cls-expl",
        }
    }
}

impl std::str::FromStr for DatasetSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cls" => Ok(Self::ClassificationOnly),
            "cls-expl" => Ok(Self::ClassificationAndExplanation),
            other => Err(format!("unknown setting {other:?}, expected cls or cls-expl")),
        }
    }
}

/// One line of an emitted instruction-tuning dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionSample {
    pub id: String,
    pub instruction: String,
    pub text1: String,
    pub text2: String,
    pub label: ClassificationLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    pub setting: DatasetSetting,
}

impl InstructionSample {
    pub fn validate(&self) -> Result<(), TypeError> {
        if self.id.is_empty() {
            return Err(TypeError::Empty("id"));
        }
        if self.setting == DatasetSetting::ClassificationAndExplanation
            && self.explanation.as_deref().is_none_or(|e| e.trim().is_empty())
        {
            return Err(TypeError::MissingExplanation(self.id.clone()));
        }
        Ok(())
    }

    /// Supervised target: the answer sentence, followed by the explanation
    /// when the sample carries one. An explanation that already opens with
    /// the answer sentence is used as is.
    pub fn target(&self) -> String {
        let answer = label_to_answer_phrase(self.label);
        match &self.explanation {
            Some(expl) if expl.trim_start().starts_with(answer) => expl.trim_start().to_string(),
            Some(expl) if !expl.is_empty() => format!("{answer} {expl}"),
            _ => answer.to_string(),
        }
    }
}

/// A generated output for one evaluated sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub id: String,
    pub output_text: String,
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn label() -> impl Strategy<Value = ClassificationLabel> {
        prop_oneof![
            Just(ClassificationLabel::SameAuthor),
            Just(ClassificationLabel::DifferentAuthor)
        ]
    }

    fn setting() -> impl Strategy<Value = DatasetSetting> {
        prop_oneof![
            Just(DatasetSetting::ClassificationOnly),
            Just(DatasetSetting::ClassificationAndExplanation)
        ]
    }

    proptest! {
        #[test]
        fn instruction_sample_roundtrip(
            id in "[a-z]{1,8}-[0-9]{1,4}",
            instruction in "\\PC*",
            text1 in "\\PC+",
            text2 in "\\PC+",
            label in label(),
            explanation in proptest::option::of("\\PC*"),
            setting in setting(),
        ) {
            let s = InstructionSample { id, instruction, text1, text2, label, explanation, setting };
            let line = serde_json::to_string(&s).unwrap();
            let back: InstructionSample = serde_json::from_str(&line).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn author_text_roundtrip(author in "[a-z0-9]{1,6}", text in "\\PC*[a-z]\\PC*", other in "[a-z]{1,5}") {
            for src in [SourceDataset::Imdb, SourceDataset::Yelp, SourceDataset::Other(other.clone())] {
                let t = AuthorText::new(author.clone(), text.clone(), src).unwrap();
                let back: AuthorText = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
                prop_assert_eq!(back, t);
            }
        }
    }
}
