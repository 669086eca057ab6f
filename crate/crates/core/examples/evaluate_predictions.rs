//! Scores model outputs against gold labels and reference explanations.
//!
//! cargo run --example evaluate_predictions

use std::collections::HashMap;

use avkit::metrics::{aggregate_report, HashEmbedding, ReportOptions};
use avkit::types::{label_to_answer_phrase, ClassificationLabel, DatasetSetting, InstructionSample, PredictionRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let references = [
        (ClassificationLabel::SameAuthor, "Both texts favour short declarative sentences and a dry, ironic tone."),
        (ClassificationLabel::DifferentAuthor, "Text 1 is formal and dense while Text 2 is chatty and uses slang."),
        (ClassificationLabel::SameAuthor, "Both open with a rhetorical question and close with an exclamation."),
    ];
    let outputs = [
        "The correct answer is yes. Both texts use short sentences and a dry tone.",
        "The correct answer is yes. The texts look alike.",
        "The correct answer is yes. Each text opens with a rhetorical question.",
    ];
    let gold: Vec<InstructionSample> = references
        .iter()
        .enumerate()
        .map(|(i, (label, expl))| InstructionSample {
            id: format!("ex-{i}"),
            instruction: String::new(),
            text1: String::new(),
            text2: String::new(),
            label: *label,
            explanation: Some(format!("{} {expl}", label_to_answer_phrase(*label))),
            setting: DatasetSetting::ClassificationAndExplanation,
        })
        .collect();
    let predictions: Vec<PredictionRecord> = gold
        .iter()
        .zip(outputs)
        .map(|(g, o)| PredictionRecord { id: g.id.clone(), output_text: o.to_string() })
        .collect();
    let labels: HashMap<String, String> =
        gold.iter().map(|g| (g.id.clone(), g.explanation.clone().unwrap_or_default())).collect();

    let report = aggregate_report("demo-system", &predictions, &gold, &labels, &HashEmbedding::default(), ReportOptions::default())?;
    print!("{}", report.to_table());
    for s in &report.per_sample {
        println!("{}: correct={} rouge-l f1={:.3}", s.id, s.correct, s.rouge_l.map(|r| r.f1).unwrap_or(0.0));
    }
    Ok(())
}
