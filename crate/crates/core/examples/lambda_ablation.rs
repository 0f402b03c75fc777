// Fixed multipliers against estimation at two periods, on the same tasks.
//
// `cargo run --release --example lambda_ablation`

use sftcop::harness::{lambda_ablation, Method, RunConfig};

pub fn run_example() -> sftcop::Result<()> {
    let mut cfg = RunConfig {
        steps_per_task: 2_000,
        ..RunConfig::four_room(Method::SftCop, 3, vec![0, 1], std::env::temp_dir().join("sftcop-ablation"))
    };
    cfg.ablation.estimation_periods = vec![200, 1000];
    let cmp = lambda_ablation(&cfg, false)?;
    for v in cmp.variants() {
        println!(
            "{v:14} failures/episode {:.3}  reward/episode {:.3}",
            cmp.mean(v, |r| r.mean_episode_failures).unwrap_or(f64::NAN),
            cmp.mean(v, |r| r.mean_episode_reward).unwrap_or(f64::NAN)
        );
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
