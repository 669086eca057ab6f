//! Builds a small instruction dataset from a synthetic corpus with the mock
//! explanation generator, then prints the run log and a sample record.
//!
//! cargo run --example build_dataset

use avkit::consistency::PhrasePolicy;
use avkit::dataset::synthetic_corpus;
use avkit::genclient::BackendConfig;
use avkit::pipeline::{run_pipeline, Generator, PipelineParams};
use avkit::prompting::Prompter;
use avkit::types::DatasetSetting;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synthetic_corpus("toy", 30, 10, 1)?;
    let params = PipelineParams {
        setting: DatasetSetting::ClassificationAndExplanation,
        pool_n: 120,
        train_n: 60,
        test_n: 10,
        seed: 1,
        dedup: true,
        temperature: 0.1,
        max_new_tokens: 512,
        max_in_flight: 4,
    };
    let backend_config = BackendConfig::mock(1, 0.2);
    let backend = backend_config.build()?;
    let prompter = Prompter::default();
    let policy = PhrasePolicy::default();
    let generator = Generator {
        backend: backend.as_ref(),
        retry: backend_config.retry_policy(),
        prompter: &prompter,
        demonstrations: &[],
        policy: &policy,
    };
    let out = run_pipeline(&corpus, &params, Some(&generator))?;

    for event in &out.log {
        println!("{}", serde_json::to_string(event)?);
    }
    println!("dropped {} of {} generated ({:.1}%)", out.dropped.len(), params.pool_n, out.drop_rate * 100.0);
    println!("{}", serde_json::to_string_pretty(&out.split.stats)?);
    let first = &out.split.train[0];
    println!("--- {} ({}) ---\n{}\n--- target ---\n{}", first.id, first.label.as_yes_no(), first.instruction, first.target());
    Ok(())
}
