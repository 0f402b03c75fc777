use rand::Rng;
use serde::Serialize;

use crate::algebra::TaskSpec;
use crate::dual::{estimate_dual, DualConfig, PolicyValue, PolicyValues};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};

use super::bound::{gpi_bound, BoundParams, BoundTask};
use super::cmdp::{random_cmdp, RandomCmdpSpec, TabularCmdp};
use super::exact::{
    exact_policy_evaluation, lagrangian_solution, policy_action_values, solve_cmdp_exact, solve_mdp, utility_range,
    CmdpSolution, TabularPolicy,
};

/// Outcome of one property over a batch of random instances. `worst_margin`
/// is the smallest `bound - lhs` seen; negative beyond `tolerance` is a
/// violation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub instances: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    /// Instances where the check was trivially satisfied (for the transfer
    /// bound: the estimated multiplier hit the divergence cap).
    pub degenerate: usize,
}

impl CheckSummary {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            instances: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            tolerance,
            degenerate: 0,
        }
    }

    fn record(&mut self, margin: f64) {
        self.instances += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if margin < -self.tolerance {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.instances > 0 && self.violations == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleCheckReport {
    pub seed: u64,
    pub checks: Vec<CheckSummary>,
}

impl OracleCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckSummary::passed)
    }
}

/// Instance counts per property.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckCounts {
    pub strong_duality: usize,
    pub gpi_improvement: usize,
    pub value_gap: usize,
    pub transfer_bound: usize,
}

impl Default for CheckCounts {
    fn default() -> Self {
        Self {
            strong_duality: 30,
            gpi_improvement: 20,
            value_gap: 20,
            transfer_bound: 50,
        }
    }
}

const CHECK_DUALITY: u64 = 1;
const CHECK_GPI: u64 = 2;
const CHECK_GAP: u64 = 3;
const CHECK_BOUND: u64 = 4;

/// Up to 20 states, 2 to 4 actions, 2 to 4 features.
fn random_spec<R: Rng + ?Sized>(rng: &mut R) -> RandomCmdpSpec {
    RandomCmdpSpec {
        n_states: rng.random_range(3..=20),
        n_actions: rng.random_range(2..=4),
        dim: rng.random_range(2..=4),
        gamma: rng.random_range(0.5..0.95),
        concentration: 1.0,
    }
}

/// Weights drawn like [`random_cmdp`]'s, so one-step utilities stay in [-1, 1].
fn random_weights<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let w_r = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let w_c = (0..dim).map(|_| rng.random_range(-1.0..=1.0) / dim as f64).collect();
    (w_r, w_c)
}

fn reweighted(m: &TabularCmdp, w_r: Vec<f64>, w_c: Vec<f64>, tau: f64) -> Result<TabularCmdp> {
    m.with_task(TaskSpec::new("check", w_r, w_c, tau, m.gamma())?)
}

fn combine(w_r: &[f64], w_c: &[f64], lambda: f64) -> Vec<f64> {
    w_r.iter().zip(w_c).map(|(r, c)| r + lambda * c).collect()
}

/// Deterministic GPI policy over exact action values `qs[i][s * A + a]`; ties
/// go to the lowest action.
fn gpi_policy(qs: &[Vec<f64>], n_states: usize, n_actions: usize) -> Result<TabularPolicy> {
    let actions: Vec<usize> = (0..n_states)
        .map(|s| {
            let score = |a: usize| qs.iter().map(|q| q[s * n_actions + a]).fold(f64::NEG_INFINITY, f64::max);
            (1..n_actions).fold(0, |best, a| if score(a) > score(best) { a } else { best })
        })
        .collect();
    TabularPolicy::deterministic(&actions, n_actions)
}

/// `|LP optimum - d(lambda*)|` on feasible instances; the threshold sits at a
/// uniform fraction of the achievable utility range.
pub fn check_strong_duality(seed: u64, count: usize, tolerance: f64) -> Result<CheckSummary> {
    let mut out = CheckSummary::new("strong_duality", tolerance);
    for i in 0..count as u64 {
        let mut rng = stream(&[seed, domain::INSTANCE, CHECK_DUALITY, i]);
        let m = random_cmdp(&random_spec(&mut rng), &mut rng)?;
        let (lo, hi) = utility_range(&m)?;
        let m = m.with_threshold(lo + rng.random_range(0.0..0.95) * (hi - lo))?;
        let sol = match solve_cmdp_exact(&m)? {
            CmdpSolution::Solved(s) => s,
            CmdpSolution::Infeasible { max_utility } => {
                return Err(Error::Lp(format!("instance {i} infeasible (max utility {max_utility})")))
            }
        };
        out.record(-(sol.objective - sol.dual_value).abs());
    }
    Ok(out)
}

/// GPI with exact source values: the GPI policy's action values on a target
/// Lagrangian reward dominate every source's, at every state-action pair.
pub fn check_gpi_improvement(seed: u64, count: usize, tolerance: f64) -> Result<CheckSummary> {
    let mut out = CheckSummary::new("gpi_improvement", tolerance);
    for i in 0..count as u64 {
        let mut rng = stream(&[seed, domain::INSTANCE, CHECK_GPI, i]);
        let m = random_cmdp(&random_spec(&mut rng), &mut rng)?;
        let (n, k, d) = (m.n_states(), m.n_actions(), m.dim());
        let n_sources = rng.random_range(2..=4);
        let mut sources = Vec::with_capacity(n_sources);
        for _ in 0..n_sources {
            let (w_r, _) = random_weights(d, &mut rng);
            sources.push(solve_mdp(&m, &w_r)?.policy(k));
        }
        let (w_r, w_c) = random_weights(d, &mut rng);
        let target = combine(&w_r, &w_c, rng.random_range(0.0..5.0));
        let qs = sources
            .iter()
            .map(|p| policy_action_values(p, &m, &target))
            .collect::<Result<Vec<_>>>()?;
        let q_gpi = policy_action_values(&gpi_policy(&qs, n, k)?, &m, &target)?;
        let margin = (0..n * k)
            .map(|x| q_gpi[x] - qs.iter().map(|q| q[x]).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min);
        out.record(margin);
    }
    Ok(out)
}

/// `Q_i^{pi_i*} - Q_i^{pi_j*} <= 2 delta_ij / (1 - gamma)` with `delta_ij` the
/// largest one-step reward gap over all transitions.
pub fn check_value_gap(seed: u64, count: usize, tolerance: f64) -> Result<CheckSummary> {
    let mut out = CheckSummary::new("value_gap", tolerance);
    for i in 0..count as u64 {
        let mut rng = stream(&[seed, domain::INSTANCE, CHECK_GAP, i]);
        let m = random_cmdp(&random_spec(&mut rng), &mut rng)?;
        let (n, k, d) = (m.n_states(), m.n_actions(), m.dim());
        let (w_i, _) = random_weights(d, &mut rng);
        let (w_j, _) = random_weights(d, &mut rng);
        let diff: Vec<f64> = w_i.iter().zip(&w_j).map(|(a, b)| a - b).collect();
        let mut delta: f64 = 0.0;
        for s in 0..n {
            for a in 0..k {
                for s2 in 0..n {
                    let g: f64 = m.phi(s, a, s2).iter().zip(&diff).map(|(p, w)| p * w).sum();
                    delta = delta.max(g.abs());
                }
            }
        }
        let q_ii = solve_mdp(&m, &w_i)?.q;
        let q_ij = policy_action_values(&solve_mdp(&m, &w_j)?.policy(k), &m, &w_i)?;
        let bound = 2.0 * delta / (1.0 - m.gamma());
        let margin = (0..n * k).map(|x| bound - (q_ii[x] - q_ij[x])).fold(f64::INFINITY, f64::min);
        out.record(margin);
    }
    Ok(out)
}

/// End-to-end transfer bound with exact source values (`epsilon = 0`).
///
/// Tasks share dynamics, features and threshold. Sources and target each get
/// their optimal multiplier from the exact solver; source policies are
/// Lagrangian-optimal at their own multiplier. The target multiplier
/// estimate comes from [`estimate_dual`] on the sources' start-state values,
/// and the left side
/// `Q_{j,l_j*}^{pi_j*}(s,a) - Q_{j,l~_j}^{pi}(s,a)` is compared with
/// [`gpi_bound`] at every state-action pair.
pub fn check_transfer_bound(seed: u64, count: usize, dual: &DualConfig, tolerance: f64) -> Result<CheckSummary> {
    let mut out = CheckSummary::new("transfer_bound", tolerance);
    for i in 0..count as u64 {
        let mut rng = stream(&[seed, domain::INSTANCE, CHECK_BOUND, i]);
        let base = random_cmdp(&random_spec(&mut rng), &mut rng)?;
        let (n, k, d) = (base.n_states(), base.n_actions(), base.dim());
        let n_sources = rng.random_range(1..=3);
        let mut weights: Vec<(Vec<f64>, Vec<f64>)> = (0..n_sources).map(|_| random_weights(d, &mut rng)).collect();
        // the target is a perturbation of the first source so the bound is
        // not vacuous
        let (w0_r, w0_c) = weights[0].clone();
        let limit = 1.0 / d as f64;
        let w_rj: Vec<f64> = w0_r.iter().map(|w| (w + rng.random_range(-0.3..=0.3)).clamp(-1.0, 1.0)).collect();
        let w_cj: Vec<f64> =
            w0_c.iter().map(|w| (w + rng.random_range(-0.3..=0.3) * limit).clamp(-limit, limit)).collect();
        weights.push((w_rj, w_cj));

        // a threshold every task can meet with slack
        let mut tau = f64::INFINITY;
        for (w_r, w_c) in &weights {
            let (lo, hi) = utility_range(&reweighted(&base, w_r.clone(), w_c.clone(), 0.0)?)?;
            tau = tau.min(lo + rng.random_range(0.1..0.8) * (hi - lo));
        }
        let tasks: Vec<TabularCmdp> = weights
            .iter()
            .map(|(w_r, w_c)| reweighted(&base, w_r.clone(), w_c.clone(), tau))
            .collect::<Result<_>>()?;
        let lambdas: Vec<f64> = tasks
            .iter()
            .map(|m| match solve_cmdp_exact(m)? {
                CmdpSolution::Solved(s) => Ok(s.lambda),
                CmdpSolution::Infeasible { .. } => Err(Error::Lp("threshold chosen infeasible".into())),
            })
            .collect::<Result<_>>()?;
        let (target, source_tasks) = tasks.split_last().expect("at least two tasks");
        let lambda_j = lambdas[n_sources];
        let (w_rj, w_cj) = (target.task().reward_weights(), target.task().cost_weights());

        let policies: Vec<TabularPolicy> = source_tasks
            .iter()
            .zip(&lambdas)
            .map(|(m, &l)| Ok(lagrangian_solution(m, l)?.policy(k)))
            .collect::<Result<_>>()?;
        let values = policies
            .iter()
            .map(|p| {
                let v_r = exact_policy_evaluation(p, target, w_rj)?[target.start()];
                let v_c = exact_policy_evaluation(p, target, w_cj)?[target.start()];
                Ok(PolicyValue::new(v_r, v_c))
            })
            .collect::<Result<Vec<_>>>()?;
        let lambda_tilde = match estimate_dual(&PolicyValues::new(values)?, tau, dual) {
            Ok(l) => l,
            Err(Error::ProbablyInfeasible { cap, .. }) => {
                out.degenerate += 1;
                cap
            }
            Err(e) => return Err(e),
        };

        let tilde_weights = combine(w_rj, w_cj, lambda_tilde);
        let qs = policies
            .iter()
            .map(|p| policy_action_values(p, target, &tilde_weights))
            .collect::<Result<Vec<_>>>()?;
        let q_pi = policy_action_values(&gpi_policy(&qs, n, k)?, target, &tilde_weights)?;
        let q_star = lagrangian_solution(target, lambda_j)?.q;

        let bound_sources: Vec<BoundTask<'_>> = source_tasks
            .iter()
            .zip(&lambdas)
            .map(|(m, &l)| BoundTask {
                reward_weights: m.task().reward_weights(),
                cost_weights: m.task().cost_weights(),
                lambda_star: l,
            })
            .collect();
        let bound = gpi_bound(
            BoundTask {
                reward_weights: w_rj,
                cost_weights: w_cj,
                lambda_star: lambda_j,
            },
            lambda_tilde,
            &bound_sources,
            BoundParams {
                epsilon: 0.0,
                tau,
                gamma: target.gamma(),
                phi_max: target.phi_max(),
            },
        )?;
        let margin = (0..n * k)
            .map(|x| {
                let lhs = (q_star[x] - lambda_j * tau) - (q_pi[x] - lambda_tilde * tau);
                bound - lhs
            })
            .fold(f64::INFINITY, f64::min);
        out.record(margin);
    }
    Ok(out)
}

/// All four properties with the given instance counts.
pub fn run_oracle_checks(seed: u64, counts: CheckCounts) -> Result<OracleCheckReport> {
    let dual = DualConfig {
        iterations: 10_000,
        step_constant: 1.0,
        ..DualConfig::default()
    };
    Ok(OracleCheckReport {
        seed,
        checks: vec![
            check_strong_duality(seed, counts.strong_duality, 1e-6)?,
            check_gpi_improvement(seed, counts.gpi_improvement, 1e-9)?,
            check_value_gap(seed, counts.value_gap, 1e-9)?,
            check_transfer_bound(seed, counts.transfer_bound, &dual, 1e-9)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_batches_pass() {
        let counts = CheckCounts {
            strong_duality: 3,
            gpi_improvement: 3,
            value_gap: 3,
            transfer_bound: 5,
        };
        let report = run_oracle_checks(11, counts).unwrap();
        for c in &report.checks {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn gpi_policy_breaks_ties_low() {
        let qs = vec![vec![1.0, 1.0, 0.0, 2.0], vec![0.0, 0.5, 3.0, 3.0]];
        let p = gpi_policy(&qs, 2, 2).unwrap();
        assert_eq!(p.mode(0), 0);
        assert_eq!(p.mode(1), 0);
    }
}
