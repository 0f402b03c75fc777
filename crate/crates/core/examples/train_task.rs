// One Four-Room task trained from scratch with the multiplier re-estimated
// during training. Pass a step count to train longer.
//
// `cargo run --release --example train_task -- 20000`

use sftcop::dual::DualConfig;
use sftcop::gridworld::{sample_task, GridLayout};
use sftcop::metrics::MetricsRecord;
use sftcop::rng::stream;
use sftcop::sf::{train_task, LambdaControl, LearnerConfig, StreamKey};

fn steps() -> usize {
    std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4_000)
}

pub fn run_example() -> sftcop::Result<()> {
    let layout = GridLayout::default_four_room();
    let learner = LearnerConfig {
        steps_per_task: steps(),
        ..LearnerConfig::default()
    };
    let task = sample_task(&mut stream(&[3]), &layout, -5e-6, learner.gamma, "task-0")?;
    let mut records: Vec<MetricsRecord> = Vec::new();
    let entry = train_task(
        &layout,
        &task,
        &[],
        &learner,
        &LambdaControl::Estimated(DualConfig::default()),
        StreamKey { seed: 0, task: 0 },
        &mut |r| records.push(r),
    )?;
    println!("episode  step  failures  reward  lambda");
    for r in records.iter().step_by((records.len() / 10).max(1)) {
        println!("{:7} {:5} {:9} {:7.3} {:7.3}", r.episode, r.step, r.failures, r.total_reward, r.lambda);
    }
    println!("learned reward weights {:?}", entry.reward_weights);
    println!("true reward weights    {:?}", task.reward_weights());
    println!("states visited: {}", entry.sf.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
