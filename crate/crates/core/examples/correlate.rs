//! Accuracy on the best- and worst-rated quarter of samples.
//!
//! cargo run --example correlate

use avkit::metrics::{quartile_accuracy, rank_by_score, ScoredSample};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rated = [(4.6, true), (4.4, true), (4.1, false), (3.9, true), (3.2, false), (2.8, false), (2.5, true), (1.9, false)];
    let samples: Vec<ScoredSample> = rated
        .iter()
        .enumerate()
        .map(|(i, &(score, correct))| ScoredSample { id: format!("s{i}"), human_mean: score, correct })
        .collect();
    for s in rank_by_score(&samples) {
        println!("{}  {:.1}  {}", s.id, s.human_mean, if s.correct { "correct" } else { "wrong" });
    }
    let (top, bottom) = quartile_accuracy(&samples, 0.25)?;
    println!("top 25% accuracy: {top:.3}\nbottom 25% accuracy: {bottom:.3}");
    Ok(())
}
