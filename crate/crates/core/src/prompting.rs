//! Prompt construction for explanation collection, instruction tuning and
//! few-shot evaluation.
//!
//! Template bodies live as text assets under `templates/`. The built-in set
//! is compiled in from those files; [`TemplateSet::load_dir`] reads an
//! edited copy from disk. Rendering is a single left-to-right pass, so
//! placeholder-looking text inside a substituted value is never expanded.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{label_to_answer_phrase, AVPair, ClassificationLabel, DatasetSetting};

pub const EXPLANATION_TEMPLATE: &str = "explanation_prompt.txt";
pub const INSTRUCTION_CLS_TEMPLATE: &str = "instruction_cls.txt";
pub const INSTRUCTION_CLS_EXPL_TEMPLATE: &str = "instruction_cls_expl.txt";
pub const FEWSHOT_TEMPLATE: &str = "fewshot_eval.txt";

/// Number of demonstrations used for explanation collection unless configured.
pub const DEFAULT_DEMO_COUNT: usize = 2;

const TRUNCATION_MARKER: &str = "...[Truncated due to length restriction]";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {template} requires placeholder {{{placeholder}}} which was not bound")]
    Unbound {
        template: String,
        placeholder: String,
    },
    #[error("demonstration {0} has an empty explanation")]
    EmptyDemonstration(usize),
    #[error("{k}-shot prompt needs {needed} demonstrations per class, found {yes} yes / {no} no")]
    NotEnoughDemos {
        k: usize,
        needed: usize,
        yes: usize,
        no: usize,
    },
    #[error("{0}-shot prompt cannot be class balanced, k must be even")]
    OddShots(usize),
    #[error("failed to read template {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A text body with `{NAME}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub required_placeholders: BTreeSet<String>,
}

impl PromptTemplate {
    /// Builds a template; the required set is every `{UPPER_CASE}` marker in
    /// the body. One trailing newline (the file terminator) is dropped.
    pub fn new(name: impl Into<String>, body: &str) -> Self {
        let body = body.strip_suffix('\n').unwrap_or(body).to_string();
        let required_placeholders = scan_markers(&body)
            .into_iter()
            .map(|(_, _, name)| name.to_string())
            .collect();
        Self {
            name: name.into(),
            body,
            required_placeholders,
        }
    }

    pub fn render(&self, bindings: &BTreeMap<&str, &str>) -> Result<String, PromptError> {
        if let Some(missing) = self
            .required_placeholders
            .iter()
            .find(|p| !bindings.contains_key(p.as_str()))
        {
            return Err(PromptError::Unbound {
                template: self.name.clone(),
                placeholder: missing.clone(),
            });
        }
        let mut out = String::with_capacity(self.body.len() + 256);
        let mut cursor = 0;
        for (start, end, name) in scan_markers(&self.body) {
            out.push_str(&self.body[cursor..start]);
            out.push_str(bindings[name]);
            cursor = end;
        }
        out.push_str(&self.body[cursor..]);
        Ok(out)
    }
}

/// `(start, end, name)` of every `{NAME}` marker, NAME in `[A-Z0-9_]+`.
fn scan_markers(body: &str) -> Vec<(usize, usize, &str)> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_uppercase() || bytes[j].is_ascii_digit() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                out.push((i, j + 1, &body[i + 1..j]));
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// The four prompt families.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub explanation: PromptTemplate,
    pub instruction_cls: PromptTemplate,
    pub instruction_cls_expl: PromptTemplate,
    pub fewshot_eval: PromptTemplate,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            explanation: PromptTemplate::new(
                EXPLANATION_TEMPLATE,
                include_str!("../templates/explanation_prompt.txt"),
            ),
            instruction_cls: PromptTemplate::new(
                INSTRUCTION_CLS_TEMPLATE,
                include_str!("../templates/instruction_cls.txt"),
            ),
            instruction_cls_expl: PromptTemplate::new(
                INSTRUCTION_CLS_EXPL_TEMPLATE,
                include_str!("../templates/instruction_cls_expl.txt"),
            ),
            fewshot_eval: PromptTemplate::new(
                FEWSHOT_TEMPLATE,
                include_str!("../templates/fewshot_eval.txt"),
            ),
        }
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let load = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path)
                .map(|body| PromptTemplate::new(name, &body))
                .map_err(|source| PromptError::Io {
                    path: path.display().to_string(),
                    source,
                })
        };
        Ok(Self {
            explanation: load(EXPLANATION_TEMPLATE)?,
            instruction_cls: load(INSTRUCTION_CLS_TEMPLATE)?,
            instruction_cls_expl: load(INSTRUCTION_CLS_EXPL_TEMPLATE)?,
            fewshot_eval: load(FEWSHOT_TEMPLATE)?,
        })
    }
}

/// A worked example shown to the explanation generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub pair: AVPair,
    pub label: ClassificationLabel,
    pub explanation: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    /// Truncate each embedded text to this many characters. Off by default.
    pub max_text_chars: Option<usize>,
}

/// The sentence(s) opening an explanation prompt, asserting the known label.
pub fn label_clause(label: ClassificationLabel) -> &'static str {
    match label {
        ClassificationLabel::SameAuthor => {
            "Text1 and Text2 are written by the same author. Please analyze their writing styles and explain why they are written by the same author."
        }
        ClassificationLabel::DifferentAuthor => {
            "Text1 and Text2 are written by different authors. Please analyze their writing styles and explain why they are written by different authors."
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prompter {
    templates: TemplateSet,
    options: PromptOptions,
}

impl Default for Prompter {
    fn default() -> Self {
        Self::new(TemplateSet::builtin(), PromptOptions::default())
    }
}

impl Prompter {
    pub fn new(templates: TemplateSet, options: PromptOptions) -> Self {
        Self { templates, options }
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    fn clip<'a>(&self, text: &'a str) -> std::borrow::Cow<'a, str> {
        match self.options.max_text_chars {
            Some(budget) if text.chars().count() > budget => {
                let cut: String = text.chars().take(budget).collect();
                format!("{cut}{TRUNCATION_MARKER}").into()
            }
            _ => text.into(),
        }
    }

    pub fn explanation_prompt(
        &self,
        pair: &AVPair,
        label: ClassificationLabel,
        demos: &[Demonstration],
    ) -> Result<String, PromptError> {
        if let Some(i) = demos.iter().position(|d| d.explanation.trim().is_empty()) {
            return Err(PromptError::EmptyDemonstration(i));
        }
        let mut block = String::new();
        if !demos.is_empty() {
            block.push_str("\n\nPlease follow the format of the analysis method in the demostrations.\n");
            block.push_str(&format!("You will be given {} demostrations.\n", demos.len()));
            block.push_str("### Demostration Start:\n");
            let rendered: Vec<String> = demos
                .iter()
                .map(|d| {
                    format!(
                        "Text 1: {}\nText 2: {}\n{}",
                        self.clip(&d.pair.text1),
                        self.clip(&d.pair.text2),
                        d.explanation
                    )
                })
                .collect();
            block.push_str(&rendered.join("\n\n"));
        }
        let text1 = self.clip(&pair.text1);
        let text2 = self.clip(&pair.text2);
        let bindings = BTreeMap::from([
            ("LABEL_CLAUSE", label_clause(label)),
            ("TEXT1", text1.as_ref()),
            ("TEXT2", text2.as_ref()),
            ("DEMONSTRATIONS", block.as_str()),
        ]);
        self.templates.explanation.render(&bindings)
    }

    pub fn instruction(&self, pair: &AVPair, setting: DatasetSetting) -> Result<String, PromptError> {
        let template = match setting {
            DatasetSetting::ClassificationOnly => &self.templates.instruction_cls,
            DatasetSetting::ClassificationAndExplanation => &self.templates.instruction_cls_expl,
        };
        let text1 = self.clip(&pair.text1);
        let text2 = self.clip(&pair.text2);
        template.render(&BTreeMap::from([
            ("TEXT1", text1.as_ref()),
            ("TEXT2", text2.as_ref()),
        ]))
    }

    /// `k` demonstrations, alternating yes/no starting with yes, each
    /// followed by its answer phrase; the query's answer is left blank.
    pub fn fewshot_eval_prompt(
        &self,
        pair: &AVPair,
        demos: &[(AVPair, ClassificationLabel)],
        k: usize,
    ) -> Result<String, PromptError> {
        if !k.is_multiple_of(2) {
            return Err(PromptError::OddShots(k));
        }
        let per_class = k / 2;
        let yes: Vec<&AVPair> = demos
            .iter()
            .filter(|(_, l)| *l == ClassificationLabel::SameAuthor)
            .map(|(p, _)| p)
            .collect();
        let no: Vec<&AVPair> = demos
            .iter()
            .filter(|(_, l)| *l == ClassificationLabel::DifferentAuthor)
            .map(|(p, _)| p)
            .collect();
        if yes.len() < per_class || no.len() < per_class {
            return Err(PromptError::NotEnoughDemos {
                k,
                needed: per_class,
                yes: yes.len(),
                no: no.len(),
            });
        }
        let mut block = String::new();
        for i in 0..per_class {
            for (demo, label) in [
                (yes[i], ClassificationLabel::SameAuthor),
                (no[i], ClassificationLabel::DifferentAuthor),
            ] {
                block.push_str(&self.instruction(demo, DatasetSetting::ClassificationOnly)?);
                block.push('\n');
                block.push_str(label_to_answer_phrase(label));
                block.push_str("\n\n");
            }
        }
        let text1 = self.clip(&pair.text1);
        let text2 = self.clip(&pair.text2);
        self.templates.fewshot_eval.render(&BTreeMap::from([
            ("DEMONSTRATIONS", block.as_str()),
            ("TEXT1", text1.as_ref()),
            ("TEXT2", text2.as_ref()),
        ]))
    }
}

fn builtin() -> &'static Prompter {
    static PROMPTER: OnceLock<Prompter> = OnceLock::new();
    PROMPTER.get_or_init(Prompter::default)
}

/// Known-label explanation prompt with the built-in template.
pub fn build_explanation_prompt(
    pair: &AVPair,
    label: ClassificationLabel,
    demos: &[Demonstration],
) -> Result<String, PromptError> {
    builtin().explanation_prompt(pair, label, demos)
}

/// Instruction-tuning input with the built-in templates.
pub fn build_instruction(pair: &AVPair, setting: DatasetSetting) -> String {
    builtin()
        .instruction(pair, setting)
        .expect("built-in instruction templates bind every placeholder")
}

pub fn build_fewshot_eval_prompt(
    pair: &AVPair,
    demos: &[(AVPair, ClassificationLabel)],
    k: usize,
) -> Result<String, PromptError> {
    builtin().fewshot_eval_prompt(pair, demos, k)
}
