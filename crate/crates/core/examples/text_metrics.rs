//! ROUGE-1/2/L and greedy embedding match on a pair of sentences.
//!
//! cargo run --example text_metrics -- "the cat sat on the mat" "the cat lay on a mat"

use avkit::metrics::{embed_match_f1, rouge_l, rouge_n, tokenize, HashEmbedding};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let candidate = args.next().unwrap_or_else(|| "the cat sat".into());
    let reference = args.next().unwrap_or_else(|| "the cat ate".into());
    let (c, r) = (tokenize(&candidate), tokenize(&reference));

    let rows = [
        ("ROUGE-1", rouge_n(&c, &r, 1)?),
        ("ROUGE-2", rouge_n(&c, &r, 2)?),
        ("ROUGE-L", rouge_l(&c, &r)),
        ("Embed", embed_match_f1(&c, &r, &HashEmbedding::default())?),
    ];
    println!("{:<8} {:>9} {:>9} {:>9}", "metric", "precision", "recall", "f1");
    for (name, s) in rows {
        println!("{name:<8} {:>9.4} {:>9.4} {:>9.4}", s.precision, s.recall, s.f1);
    }
    Ok(())
}
