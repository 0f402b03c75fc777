// SFT-CoP under several thresholds on the same tasks.
//
// `cargo run --release --example threshold_sweep`

use sftcop::harness::{threshold_sweep, Method, RunConfig};

pub fn run_example() -> sftcop::Result<()> {
    let mut cfg = RunConfig {
        steps_per_task: 2_000,
        ..RunConfig::four_room(Method::SftCop, 3, vec![0, 1], std::env::temp_dir().join("sftcop-sweep"))
    };
    cfg.sweep.thresholds = vec![-1.0, -0.05, -5e-6];
    let cmp = threshold_sweep(&cfg, false)?;
    for v in cmp.variants() {
        println!(
            "{v:12} failures {:7.1}  unsafe reward {:.3}",
            cmp.mean(v, |r| r.accumulated_failures as f64).unwrap_or(f64::NAN),
            cmp.mean(v, |r| r.accumulated_unsafe_reward).unwrap_or(f64::NAN)
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
