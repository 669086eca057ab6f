//! Records rubric ratings for two systems and prints the summary table and
//! normalized per-sample scores.
//!
//! cargo run --example human_eval

use avkit::humaneval::{normalized_sample_scores, summarize, Rating, RatingSession, RubricConfig};

fn rating(sample: &str, evaluator: &str, system: &str, scores: [u32; 4]) -> Rating {
    Rating {
        sample_id: sample.into(),
        evaluator_id: evaluator.into(),
        system_name: system.into(),
        coverage: scores[0],
        relevance: scores[1],
        reasonableness: scores[2],
        persuasiveness: scores[3],
        timestamp: 0,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut session = RatingSession::new(RubricConfig::with_coverage(11))?;
    session.set_rubric("baseline", RubricConfig::with_coverage(7))?;
    for (sample, evaluator, system, scores) in [
        ("s1", "ann", "tuned", [9, 5, 4, 4]),
        ("s1", "ben", "tuned", [8, 4, 4, 5]),
        ("s2", "ann", "tuned", [5, 3, 3, 2]),
        ("s1", "ann", "baseline", [3, 3, 2, 2]),
        ("s2", "ben", "baseline", [6, 4, 3, 3]),
    ] {
        session.record_rating(rating(sample, evaluator, system, scores))?;
    }
    if let Err(e) = session.record_rating(rating("s1", "ann", "tuned", [1, 1, 1, 1])) {
        println!("rejected: {e}");
    }
    print!("{}", summarize(&session)?.to_table());
    for (id, score) in normalized_sample_scores(&session.for_system("tuned"), 11) {
        println!("tuned {id}: {score:.3}");
    }
    Ok(())
}
