// Builds a two-entry policy library, saves it, reads it back and uses it for
// a GPI decision.
//
// `cargo run --release --example checkpoint`

use sftcop::gridworld::{reset, GridLayout, GridState};
use sftcop::harness::sample_tasks;
use sftcop::sf::{gpi_action, load_checkpoint, save_checkpoint, train_task, LambdaControl, LearnerConfig, StreamKey};

pub fn run_example() -> sftcop::Result<()> {
    let layout = GridLayout::default_four_room();
    let learner = LearnerConfig {
        steps_per_task: 1_000,
        ..LearnerConfig::default()
    };
    let tasks = sample_tasks(&layout, 3, -5e-6, learner.gamma, 0)?;
    let mut library = Vec::new();
    for (k, task) in tasks[..2].iter().enumerate() {
        let key = StreamKey { seed: 0, task: k };
        library.push(train_task(&layout, task, &library, &learner, &LambdaControl::Fixed(1.0), key, &mut |_| {})?);
    }
    let path = std::env::temp_dir().join("sftcop-library.json");
    save_checkpoint(&library, &path)?;
    let loaded = load_checkpoint::<GridState>(&path)?;
    assert_eq!(loaded, library);
    println!("{} entries, {} bytes", loaded.len(), std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));

    let next = &tasks[2];
    let s0 = reset(&layout, next);
    for lambda in [0.0, 1.0, 100.0] {
        let a = gpi_action(&s0, &loaded, next.reward_weights(), next.cost_weights(), lambda)?;
        println!("lambda {lambda:5}: first action {a}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
