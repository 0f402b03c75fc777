// Estimating the optimal multiplier from source-policy values: projected
// subgradient steps against the exact minimizer of the piecewise-linear
// dual.
//
// `cargo run --example dual_estimation`

use sftcop::dual::{
    analytic_dual_min, dual_function, estimate_dual, DualConfig, PolicyValues, SubgradientRule,
};

pub fn run_example() -> sftcop::Result<()> {
    // (V_r, V_c) of three sources at the start state of a new task
    let values = PolicyValues::from_pairs(&[(3.0, -2.0), (2.0, -0.5), (0.5, 0.5)])?;
    let tau = -1.0;
    let exact = analytic_dual_min(&values, tau);
    println!("exact minimizer: {exact:?}");

    for iterations in [10, 100, 1_000, 100_000] {
        let cfg = DualConfig {
            iterations,
            step_constant: 1.0,
            ..DualConfig::default()
        };
        let lambda = estimate_dual(&values, tau, &cfg)?;
        println!("T = {iterations:6}: lambda {lambda:.6}, d = {:.6}", dual_function(&values, tau, lambda));
    }

    let printed = DualConfig {
        iterations: 1_000,
        step_constant: 1.0,
        rule: SubgradientRule::PrintedRewardMargin,
        ..DualConfig::default()
    };
    match estimate_dual(&values, tau, &printed) {
        Ok(l) => println!("reward-margin rule: lambda {l:.6}"),
        Err(e) => println!("reward-margin rule: {e}"),
    }

    let hopeless = PolicyValues::from_pairs(&[(1.0, -3.0), (0.0, -2.0)])?;
    println!("no feasible source: {:?}", analytic_dual_min(&hopeless, tau));
    // the iterate drifts upwards without settling; a cap turns that into an
    // error
    println!("estimate after 1000 steps: {:.1}", estimate_dual(&hopeless, tau, &DualConfig::default())?);
    let capped = DualConfig {
        divergence_cap: 1e3,
        ..DualConfig::default()
    };
    println!("with a cap: {}", estimate_dual(&hopeless, tau, &capped).unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
