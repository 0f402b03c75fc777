// Property suites on random instances: strong duality, GPI improvement, the
// value-gap lemma and the transfer bound.
//
// `cargo run --release --example oracle_checks`

use sftcop::oracle::{run_oracle_checks, CheckCounts};

pub fn run_example() -> sftcop::Result<()> {
    let report = run_oracle_checks(0, CheckCounts::default())?;
    for c in &report.checks {
        println!(
            "{:16} {:3} instances, {} violations, smallest slack {:.3e}",
            c.name, c.instances, c.violations, c.worst_margin
        );
    }
    assert!(report.passed());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
