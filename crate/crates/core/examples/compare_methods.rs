// SFT-CoP against the two baselines on the same task sequence: SFQL folds
// the utility into the reward, PDQL learns each task alone.
//
// `cargo run --release --example compare_methods`

use sftcop::harness::{compare_methods, Method, RunConfig};

pub fn run_example() -> sftcop::Result<()> {
    let cfg = RunConfig {
        steps_per_task: 3_000,
        ..RunConfig::four_room(Method::SftCop, 4, vec![0, 1], std::env::temp_dir().join("sftcop-compare"))
    };
    let cmp = compare_methods(&cfg, &[Method::SftCop, Method::Sfql, Method::Pdql], false)?;
    println!("{:8} {:>9} {:>9} {:>9}", "method", "failures", "reward", "unsafe");
    for v in cmp.variants() {
        println!(
            "{v:8} {:9.1} {:9.3} {:9.3}",
            cmp.mean(v, |r| r.accumulated_failures as f64).unwrap_or(f64::NAN),
            cmp.mean(v, |r| r.accumulated_reward).unwrap_or(f64::NAN),
            cmp.mean(v, |r| r.accumulated_unsafe_reward).unwrap_or(f64::NAN),
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
