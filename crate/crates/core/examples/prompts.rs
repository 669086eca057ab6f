//! Renders the explanation, instruction and few-shot prompts for one pair.
//!
//! cargo run --example prompts

use avkit::prompting::{build_explanation_prompt, build_fewshot_eval_prompt, build_instruction};
use avkit::types::{AVPair, ClassificationLabel, DatasetSetting};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = AVPair::new(
        "demo-0",
        "Well, I never thought I'd say this, but the sequel beats the original!",
        "Honestly? The ending dragged. Still, I'd watch it again, no question!",
        ClassificationLabel::SameAuthor,
    )?;
    let demos = vec![
        (AVPair::new("d1", "Short and sweet.", "Brief, and kind.", ClassificationLabel::SameAuthor)?, ClassificationLabel::SameAuthor),
        (AVPair::new("d2", "Verily, the hour grows late.", "lol ok see u", ClassificationLabel::DifferentAuthor)?, ClassificationLabel::DifferentAuthor),
    ];
    println!("=== explanation prompt ===\n{}", build_explanation_prompt(&pair, pair.label, &[])?);
    println!("=== instruction (classification + explanation) ===\n{}", build_instruction(&pair, DatasetSetting::ClassificationAndExplanation));
    println!("=== two-shot evaluation prompt ===\n{}", build_fewshot_eval_prompt(&pair, &demos, 2)?);
    Ok(())
}
