//! Trains a rank-2 adapter on a frozen 8x8 layer and shows that the base
//! weights never move.
//!
//! cargo run --example lora_demo

use avkit::lora::{train_demo_layer, DemoTask};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let task = DemoTask::default();
    let (trace, layer) = train_demo_layer(&task, 500, 0.1)?;
    for (step, loss) in trace.losses.iter().enumerate().step_by(100) {
        println!("step {step:>3}  loss {loss:.4}");
    }
    println!("accuracy {:.3} -> {:.3}", trace.initial_accuracy, trace.final_accuracy);
    println!("W0 checksum before {}", trace.w0_checksum_before);
    println!("W0 checksum after  {}", trace.w0_checksum_after);
    println!("adapter holds {} trainable values, ||BA||max = {:.4}", layer.adapter.trainable_params(), layer.adapter.delta().max_abs());
    Ok(())
}
