// Successor features on a small deterministic grid: the dynamic-programming
// fixed point, values as dot products, and the Lagrangian combination of a
// reward and a utility value.
//
// `cargo run --example successor_features`

use sftcop::algebra::{combined_q, evaluate_q, lagrangian_reward, CombinedQParams, TaskSpec};
use sftcop::oracle::{dp_successor_features, exact_policy_evaluation, TabularCmdp, TabularPolicy};

pub fn run_example() -> sftcop::Result<()> {
    // reward for reaching the far corner, utility -1 for stepping into the
    // left column
    let task = TaskSpec::new("corner", vec![1.0, 0.0], vec![0.0, -1.0], -0.5, 0.9)?;
    let grid = TabularCmdp::deterministic_grid(5, task.clone())?;
    let policy = TabularPolicy::uniform(grid.n_states(), grid.n_actions());
    let psi = dp_successor_features(&policy, &grid, 1e-12)?;

    let v_r = exact_policy_evaluation(&policy, &grid, task.reward_weights())?;
    let s0 = grid.start();
    let mean_q = |w: &[f64]| -> sftcop::Result<f64> {
        let mut v = 0.0;
        for a in 0..grid.n_actions() {
            v += evaluate_q(psi.get(&s0, a), w)? / grid.n_actions() as f64;
        }
        Ok(v)
    };
    let from_psi = mean_q(task.reward_weights())?;
    println!("psi(s0, right) = {:?}", psi.get(&s0, 3));
    println!("V_r(s0): linear solve {:.10}, from psi {:.10}", v_r[s0], from_psi);

    let q_c = mean_q(task.cost_weights())?;
    let params = CombinedQParams::new(2.0, task.threshold())?;
    println!("Q_r + 2 (Q_c - tau) at s0 = {:.6}", combined_q(from_psi, q_c, params));
    println!(
        "per-step Lagrangian reward for r=1, c=-1: {:.4}",
        lagrangian_reward(1.0, -1.0, 2.0, task.threshold(), task.discount())
    );
    assert!((v_r[s0] - from_psi).abs() < 1e-8);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
