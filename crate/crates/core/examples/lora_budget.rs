//! Trainable parameter count for LoRA on the attention projections of a
//! 7B-parameter decoder, across a few ranks.
//!
//! cargo run --example lora_budget

use avkit::lora::{param_budget, LoraBudget};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for r in [4, 8, 16, 64] {
        let budget = LoraBudget { d: 4096, r, layers: 32, matrices_per_layer: 2, base_params: 7_000_000_000 };
        let (n, ratio) = param_budget(&budget)?;
        println!("r={r:<3} trainable={n:>10}  share={:.4}%", ratio * 100.0);
    }
    Ok(())
}
