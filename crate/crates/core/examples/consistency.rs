// How the multiplier estimate improves with the number of Monte-Carlo
// rollouts used to value each source policy.
//
// `cargo run --release --example consistency`

use sftcop::dual::{consistency_experiment, write_consistency_csv, ConsistencySetup, DualConfig};
use sftcop::oracle::consistency_instance;

pub fn run_example() -> sftcop::Result<()> {
    let lib = consistency_instance(0)?;
    let task = lib.cmdp.task();
    let setup = ConsistencySetup {
        env: &lib.cmdp,
        sources: &lib.entries,
        reward_weights: task.reward_weights(),
        cost_weights: task.cost_weights(),
        gamma: task.discount(),
        threshold: task.threshold(),
        state: lib.cmdp.start(),
        exact: lib.exact.clone(),
        horizon: 200,
        dual: DualConfig {
            iterations: 100_000,
            step_constant: 1.0,
            ..DualConfig::default()
        },
    };
    let report = consistency_experiment(&setup, &[10, 100, 1000], &[0, 1, 2, 3, 4])?;
    println!("exact values {:?}", lib.exact.as_slice());
    println!("lambda* = {:.6}", report.lambda_star);
    for s in &report.summary {
        println!("K = {:5}: median error {:.4}", s.k, s.median);
    }
    let mut csv = Vec::new();
    write_consistency_csv(&report.rows[..3], &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
