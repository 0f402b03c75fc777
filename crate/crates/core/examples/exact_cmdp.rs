// Exact solutions of small CMDPs: the occupation-measure program, the dual
// function at its minimizer, the instance file format and the transfer
// bound.
//
// `cargo run --example exact_cmdp`

use sftcop::algebra::TaskSpec;
use sftcop::oracle::{
    dual_value, gpi_bound, random_feasible_cmdp, solve_cmdp_exact, BoundParams, BoundTask, CmdpSolution,
    RandomCmdpSpec, TabularCmdp,
};
use sftcop::rng::stream;

pub fn run_example() -> sftcop::Result<()> {
    // one state, two actions: reward or utility, never both
    let task = TaskSpec::new("two-arms", vec![1.0, 0.0], vec![0.0, 1.0], 1.0, 0.5)?;
    let m = TabularCmdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0, 0.0, 1.0], task, 0)?;
    if let CmdpSolution::Solved(sol) = solve_cmdp_exact(&m)? {
        println!("policy {:?}", sol.policy.distribution(0));
        println!("V_r {:.6}  V_c {:.6}  lambda* {:.6}  d(lambda*) {:.6}", sol.v_r, sol.v_c, sol.lambda, sol.dual_value);
    }
    println!("tau = 3: {:?}", solve_cmdp_exact(&m.with_threshold(3.0)?)?);

    let spec = RandomCmdpSpec {
        n_states: 10,
        n_actions: 3,
        ..RandomCmdpSpec::default()
    };
    let r = random_feasible_cmdp(&spec, 0.7, &mut stream(&[1]))?;
    let sol = solve_cmdp_exact(&r)?.solved().expect("threshold inside the achievable range");
    println!(
        "random instance: LP {:.9}, dual {:.9}, d(lambda* + 0.1) {:.9}",
        sol.objective,
        sol.dual_value,
        dual_value(&r, sol.lambda + 0.1)?
    );
    let text = r.to_json()?;
    assert_eq!(TabularCmdp::from_json(&text)?, r);
    println!("instance file: {} bytes", text.len());

    let (w_r, w_c) = (r.task().reward_weights(), r.task().cost_weights());
    let shifted: Vec<f64> = w_r.iter().map(|w| w + 0.1).collect();
    let target = BoundTask {
        reward_weights: &shifted,
        cost_weights: w_c,
        lambda_star: sol.lambda,
    };
    let source = BoundTask {
        reward_weights: w_r,
        cost_weights: w_c,
        lambda_star: sol.lambda,
    };
    let params = BoundParams {
        epsilon: 0.0,
        tau: r.task().threshold(),
        gamma: r.gamma(),
        phi_max: r.phi_max(),
    };
    println!("transfer bound: {:.4}", gpi_bound(target, sol.lambda, &[source], params)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
