//! Checks generated explanations against the label they were asked to
//! justify.
//!
//! cargo run --example verify_explanations

use avkit::consistency::{parse_answer, verify_alignment, PhrasePolicy};
use avkit::types::ClassificationLabel;

fn main() {
    let policy = PhrasePolicy::default();
    let cases = [
        (
            ClassificationLabel::SameAuthor,
            "The correct answer is yes. Both texts share long, comma-heavy sentences and suggest that both texts were written by the same author.",
        ),
        (
            ClassificationLabel::SameAuthor,
            "The correct answer is no. The similarities suggest that both texts were written by the same author.",
        ),
        (
            ClassificationLabel::DifferentAuthor,
            "The correct answer is no. The vocabulary differs, which suggests the texts were written by different authors.",
        ),
        (ClassificationLabel::DifferentAuthor, "I cannot tell."),
    ];
    for (label, text) in cases {
        let v = verify_alignment(text, label, &policy);
        println!(
            "label={:<3} parsed={:<5} passed={:<5} reason={:?}",
            label.as_yes_no(),
            parse_answer(text).map(|l| l.as_yes_no()).unwrap_or("-"),
            v.passed,
            v.reason
        );
    }
}
