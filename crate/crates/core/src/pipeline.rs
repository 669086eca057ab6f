//! Dataset construction end to end: sample pairs, generate explanations for
//! the known labels, drop inconsistent ones, then draw balanced splits from
//! what survives.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::{filter_verified, DroppedSample, GeneratedSample, PhrasePolicy};
use crate::dataset::{build_split, compute_stats, sample_pairs, Corpus, DatasetError, DatasetSplit};
use crate::genclient::{generate_batch_with, Backend, GenError, GenerationRequest, RetryPolicy};
use crate::prompting::{Demonstration, PromptError, Prompter};
use crate::types::DatasetSetting;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Generation(#[from] GenError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub setting: DatasetSetting,
    pub pool_n: usize,
    pub train_n: usize,
    pub test_n: usize,
    pub seed: u64,
    pub dedup: bool,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub max_in_flight: usize,
}

/// One line of the structured run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum StageEvent {
    Sample { pairs: usize },
    Generate { requested: usize, generated: usize, failed: usize },
    Verify { verified: usize, dropped: usize, drop_rate: f64 },
    Split { train: usize, test: usize },
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub split: DatasetSplit,
    pub dropped: Vec<DroppedSample>,
    /// Generation failures as `(pair id, error message)`.
    pub failed: Vec<(String, String)>,
    pub drop_rate: f64,
    pub log: Vec<StageEvent>,
}

pub struct Generator<'a> {
    pub backend: &'a dyn Backend,
    pub retry: RetryPolicy,
    pub prompter: &'a Prompter,
    pub demonstrations: &'a [Demonstration],
    pub policy: &'a PhrasePolicy,
}

/// Runs the pipeline. The classification-only setting never calls the
/// backend, so `generator` may be `None` there.
pub fn run_pipeline(
    corpus: &Corpus,
    params: &PipelineParams,
    generator: Option<&Generator<'_>>,
) -> Result<PipelineOutput, PipelineError> {
    let pairs = sample_pairs(corpus, params.pool_n, params.seed, params.dedup)?;
    let mut log = vec![StageEvent::Sample { pairs: pairs.len() }];
    let mut explanations = HashMap::new();
    let mut dropped = Vec::new();
    let mut failed = Vec::new();
    let mut drop_rate = 0.0;

    if params.setting == DatasetSetting::ClassificationAndExplanation {
        let g = generator.ok_or_else(|| {
            GenError::InvalidConfig("the explanation setting needs a generation backend".into())
        })?;
        let requests = pairs
            .iter()
            .map(|p| {
                let mut req = GenerationRequest::new(g.prompter.explanation_prompt(p, p.label, g.demonstrations)?)
                    .with_meta("id", p.id.clone());
                req.temperature = params.temperature;
                req.max_new_tokens = params.max_new_tokens;
                Ok(req)
            })
            .collect::<Result<Vec<_>, PromptError>>()?;
        let results = generate_batch_with(g.backend, &requests, g.retry, params.max_in_flight);
        let mut generated = Vec::with_capacity(pairs.len());
        for (pair, result) in pairs.iter().zip(results) {
            match result {
                Ok(r) => generated.push(GeneratedSample {
                    pair: pair.clone(),
                    label: pair.label,
                    generated_text: r.text,
                }),
                Err(e) => failed.push((pair.id.clone(), e.to_string())),
            }
        }
        log.push(StageEvent::Generate {
            requested: requests.len(),
            generated: generated.len(),
            failed: failed.len(),
        });
        let outcome = filter_verified(generated, g.policy);
        log.push(StageEvent::Verify {
            verified: outcome.kept.len(),
            dropped: outcome.dropped.len(),
            drop_rate: outcome.drop_rate,
        });
        drop_rate = outcome.drop_rate;
        dropped = outcome.dropped;
        explanations = outcome
            .kept
            .into_iter()
            .map(|s| (s.pair.id, s.generated_text))
            .collect();
    }

    let mut split = build_split(
        &pairs,
        &explanations,
        params.setting,
        params.train_n,
        params.test_n,
        params.seed,
    )?;
    split.stats = compute_stats(corpus, &split);
    log.push(StageEvent::Split {
        train: split.train.len(),
        test: split.test.len(),
    });
    Ok(PipelineOutput {
        split,
        dropped,
        failed,
        drop_rate,
        log,
    })
}
