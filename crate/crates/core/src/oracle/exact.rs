use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::algebra::dot;
use crate::error::{Error, Result};
use crate::sf::SfTable;

use super::cmdp::{random_cmdp, RandomCmdpSpec, TabularCmdp};

/// A stationary, possibly stochastic, tabular policy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidAction { action: a, n_actions });
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self {
            n_states: actions.len(),
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Row-major `probs[s * A + a]`; each row must sum to one within 1e-9.
    pub fn from_probs(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                expected: n_states * n_actions,
                actual: probs.len(),
            });
        }
        for (s, row) in probs.chunks(n_actions.max(1)).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::param("policy", format!("row {s} is not a distribution")));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn distribution(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Most likely action, lowest index on ties.
    pub fn mode(&self, s: usize) -> usize {
        let d = self.distribution(s);
        (0..d.len()).fold(0, |b, a| if d[a] > d[b] { a } else { b })
    }

    fn check(&self, m: &TabularCmdp) -> Result<()> {
        if self.n_states != m.n_states() || self.n_actions != m.n_actions() {
            return Err(Error::DimensionMismatch {
                expected: m.n_states() * m.n_actions(),
                actual: self.n_states * self.n_actions,
            });
        }
        Ok(())
    }
}

/// LU factors of `I - gamma P_pi`.
fn evaluation_system(policy: &TabularPolicy, m: &TabularCmdp) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    policy.check(m)?;
    let n = m.n_states();
    let g = m.gamma();
    let mut a = DMatrix::<f64>::identity(n, n);
    for s in 0..n {
        for (act, &p) in policy.distribution(s).iter().enumerate() {
            if p > 0.0 {
                for (s2, &q) in m.kernel_row(s, act).iter().enumerate() {
                    a[(s, s2)] -= g * p * q;
                }
            }
        }
    }
    Ok(a.lu())
}

fn solve_with(
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    policy: &TabularPolicy,
    signal: &[f64],
) -> Result<Vec<f64>> {
    let k = policy.n_actions;
    let b = DVector::from_iterator(
        policy.n_states,
        (0..policy.n_states).map(|s| dot(policy.distribution(s), &signal[s * k..(s + 1) * k])),
    );
    lu.solve(&b)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::MalformedMdp("singular evaluation system".into()))
}

/// `V^pi` at every state for the reward `E[phi] . w`, from the linear system
/// `(I - gamma P_pi) V = r_pi`.
pub fn exact_policy_evaluation(policy: &TabularPolicy, m: &TabularCmdp, weights: &[f64]) -> Result<Vec<f64>> {
    let signal = m.expected_signal(weights)?;
    solve_with(&evaluation_system(policy, m)?, policy, &signal)
}

/// One-step lookahead `Q(s, a) = r(s, a) + gamma sum_s' P(s'|s,a) V(s')`,
/// indexed `s * A + a`.
pub fn action_values(m: &TabularCmdp, weights: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != m.n_states() {
        return Err(Error::DimensionMismatch {
            expected: m.n_states(),
            actual: values.len(),
        });
    }
    let signal = m.expected_signal(weights)?;
    Ok(lookahead(m, &signal, values))
}

fn lookahead(m: &TabularCmdp, signal: &[f64], values: &[f64]) -> Vec<f64> {
    let k = m.n_actions();
    (0..m.n_states() * k)
        .map(|i| signal[i] + m.gamma() * dot(m.kernel_row(i / k, i % k), values))
        .collect()
}

pub fn policy_action_values(policy: &TabularPolicy, m: &TabularCmdp, weights: &[f64]) -> Result<Vec<f64>> {
    let v = exact_policy_evaluation(policy, m, weights)?;
    action_values(m, weights, &v)
}

/// Successor features of `policy`: the fixed point of
/// `psi(s,a) = E[phi(s,a,s')] + gamma E[psi(s', a')]`, `a' ~ pi(s')`.
///
/// Solved directly, one linear system per feature, then polished by
/// fixed-point sweeps until the max-norm residual is at most `tol`.
pub fn dp_successor_features(policy: &TabularPolicy, m: &TabularCmdp, tol: f64) -> Result<SfTable<usize>> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let (n, k, d) = (m.n_states(), m.n_actions(), m.dim());
    let lu = evaluation_system(policy, m)?;
    let mut psi = vec![0.0; n * k * d];
    for j in 0..d {
        let mut w = vec![0.0; d];
        w[j] = 1.0;
        let signal = m.expected_signal(&w)?;
        let v = solve_with(&lu, policy, &signal)?;
        for (i, q) in lookahead(m, &signal, &v).into_iter().enumerate() {
            psi[i * d + j] = q;
        }
    }
    let expected: Vec<Vec<f64>> = (0..n * k).map(|i| m.expected_phi(i / k, i % k)).collect();
    const MAX_SWEEPS: usize = 100_000;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        // psi under pi at each next state
        let mut next = vec![0.0; n * d];
        for s in 0..n {
            for (a, &p) in policy.distribution(s).iter().enumerate() {
                if p > 0.0 {
                    for j in 0..d {
                        next[s * d + j] += p * psi[(s * k + a) * d + j];
                    }
                }
            }
        }
        let mut updated = vec![0.0; n * k * d];
        residual = 0.0;
        for i in 0..n * k {
            let row = m.kernel_row(i / k, i % k);
            for j in 0..d {
                let mut v = expected[i][j];
                for (s2, &p) in row.iter().enumerate() {
                    v += m.gamma() * p * next[s2 * d + j];
                }
                residual = residual.max((v - psi[i * d + j]).abs());
                updated[i * d + j] = v;
            }
        }
        if residual <= tol {
            let mut table = SfTable::new(k, d);
            for i in 0..n * k {
                table.set(&(i / k), i % k, &psi[i * d..(i + 1) * d])?;
            }
            return Ok(table);
        }
        psi = updated;
    }
    Err(Error::NoConvergence {
        iterations: MAX_SWEEPS,
        residual,
    })
}

/// Optimal deterministic policy for one linear reward.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpSolution {
    pub actions: Vec<usize>,
    pub values: Vec<f64>,
    /// `q[s * A + a]`
    pub q: Vec<f64>,
}

impl MdpSolution {
    pub fn policy(&self, n_actions: usize) -> TabularPolicy {
        TabularPolicy::deterministic(&self.actions, n_actions).expect("actions come from the solver")
    }
}

/// Policy iteration. An action replaces the incumbent only when it is better by
/// more than a relative 1e-12, so the loop cannot cycle on rounding.
pub fn solve_mdp(m: &TabularCmdp, weights: &[f64]) -> Result<MdpSolution> {
    let signal = m.expected_signal(weights)?;
    let (n, k) = (m.n_states(), m.n_actions());
    let argmax = |row: &[f64], incumbent: usize| {
        let mut best = incumbent;
        for a in 0..k {
            if row[a] > row[best] + 1e-12 * (1.0 + row[best].abs()) {
                best = a;
            }
        }
        best
    };
    let mut actions: Vec<usize> = (0..n).map(|s| argmax(&signal[s * k..(s + 1) * k], 0)).collect();
    const MAX_ROUNDS: usize = 10_000;
    for _ in 0..MAX_ROUNDS {
        let policy = TabularPolicy::deterministic(&actions, k)?;
        let values = solve_with(&evaluation_system(&policy, m)?, &policy, &signal)?;
        let q = lookahead(m, &signal, &values);
        let improved: Vec<usize> = (0..n).map(|s| argmax(&q[s * k..(s + 1) * k], actions[s])).collect();
        if improved == actions {
            return Ok(MdpSolution { actions, values, q });
        }
        actions = improved;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ROUNDS,
        residual: f64::NAN,
    })
}

fn lagrangian_weights(m: &TabularCmdp, lambda: f64) -> Vec<f64> {
    let t = m.task();
    t.reward_weights()
        .iter()
        .zip(t.cost_weights())
        .map(|(r, c)| r + lambda * c)
        .collect()
}

/// Optimal policy for the reward `r + lambda c`.
pub fn lagrangian_solution(m: &TabularCmdp, lambda: f64) -> Result<MdpSolution> {
    solve_mdp(m, &lagrangian_weights(m, lambda))
}

/// `d(lambda) = max_pi V_r(s0) + lambda (V_c(s0) - tau)`.
pub fn dual_value(m: &TabularCmdp, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", format!("{lambda} must be >= 0")));
    }
    let sol = lagrangian_solution(m, lambda)?;
    Ok(sol.values[m.start()] - lambda * m.task().threshold())
}

/// Smallest and largest `V_c(s0)` over all policies.
pub fn utility_range(m: &TabularCmdp) -> Result<(f64, f64)> {
    let c = m.task().cost_weights();
    let neg: Vec<f64> = c.iter().map(|x| -x).collect();
    let lo = -solve_mdp(m, &neg)?.values[m.start()];
    let hi = solve_mdp(m, c)?.values[m.start()];
    Ok((lo, hi))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactSolution {
    pub policy: TabularPolicy,
    pub v_r: f64,
    pub v_c: f64,
    pub lambda: f64,
    /// `occupation[s * A + a]`, summing to `1 / (1 - gamma)`.
    pub occupation: Vec<f64>,
    /// LP optimum; equals `v_r` up to solver tolerance.
    pub objective: f64,
    pub dual_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum CmdpSolution {
    Solved(ExactSolution),
    Infeasible { max_utility: f64 },
}

impl CmdpSolution {
    pub fn solved(self) -> Option<ExactSolution> {
        match self {
            CmdpSolution::Solved(s) => Some(s),
            CmdpSolution::Infeasible { .. } => None,
        }
    }
}

/// Optimal constrained policy from the occupation-measure LP
///
/// `max sum rho r  s.t.  sum_a rho(s',a) - gamma sum P(s'|s,a) rho(s,a) = 1[s'=s0],
/// sum rho c >= tau, rho >= 0`,
///
/// with the optimal multiplier found by golden-section search on the convex
/// dual function.
pub fn solve_cmdp_exact(m: &TabularCmdp) -> Result<CmdpSolution> {
    let tau = m.task().threshold();
    let c_weights = m.task().cost_weights();
    let max_c = solve_mdp(m, c_weights)?;
    let max_utility = max_c.values[m.start()];
    if max_utility < tau - 1e-9 * (1.0 + tau.abs()) {
        return Ok(CmdpSolution::Infeasible { max_utility });
    }
    let (n, k) = (m.n_states(), m.n_actions());
    let r = m.expected_signal(m.task().reward_weights())?;
    let c = m.expected_signal(c_weights)?;
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = r.iter().map(|&ri| lp.add_var(ri, (0.0, f64::INFINITY))).collect();
    for s2 in 0..n {
        let mut coef = vec![0.0; n * k];
        for a in 0..k {
            coef[s2 * k + a] += 1.0;
        }
        for (i, x) in coef.iter_mut().enumerate() {
            *x -= m.gamma() * m.kernel_row(i / k, i % k)[s2];
        }
        let expr: Vec<_> = vars.iter().zip(&coef).filter(|(_, x)| **x != 0.0).map(|(v, x)| (*v, *x)).collect();
        lp.add_constraint(expr, ComparisonOp::Eq, f64::from(u8::from(s2 == m.start())));
    }
    lp.add_constraint(
        vars.iter().zip(&c).map(|(v, x)| (*v, *x)).collect::<Vec<_>>(),
        ComparisonOp::Ge,
        tau,
    );
    let sol = match lp.solve() {
        Ok(s) => s,
        Err(minilp::Error::Infeasible) => return Ok(CmdpSolution::Infeasible { max_utility }),
        Err(e) => return Err(Error::Lp(e.to_string())),
    };
    let occupation: Vec<f64> = vars.iter().map(|v| sol[*v].max(0.0)).collect();

    let lambda = optimal_multiplier(m, &max_c)?;
    let fallback = lagrangian_solution(m, lambda)?;
    let mut probs = vec![0.0; n * k];
    for s in 0..n {
        let row = &occupation[s * k..(s + 1) * k];
        let mass: f64 = row.iter().sum();
        if mass > 1e-12 {
            for a in 0..k {
                probs[s * k + a] = row[a] / mass;
            }
        } else {
            probs[s * k + fallback.actions[s]] = 1.0;
        }
    }
    Ok(CmdpSolution::Solved(ExactSolution {
        policy: TabularPolicy::from_probs(n, k, probs)?,
        v_r: dot(&occupation, &r),
        v_c: dot(&occupation, &c),
        lambda,
        objective: sol.objective(),
        dual_value: dual_value(m, lambda)?,
        occupation,
    }))
}

/// Minimiser of the dual function over `lambda >= 0`. `max_c` is the
/// utility-maximising policy, whose slack bounds the search interval:
/// `lambda* <= (d(0) - V_r(pi_c)) / (V_c(pi_c) - tau)`.
fn optimal_multiplier(m: &TabularCmdp, max_c: &MdpSolution) -> Result<f64> {
    let tau = m.task().threshold();
    let d0 = dual_value(m, 0.0)?;
    let unconstrained = solve_mdp(m, m.task().reward_weights())?;
    let v_c0 = exact_policy_evaluation(&unconstrained.policy(m.n_actions()), m, m.task().cost_weights())?;
    if v_c0[m.start()] >= tau {
        return Ok(0.0);
    }
    let pi_c = max_c.policy(m.n_actions());
    let v_r_c = exact_policy_evaluation(&pi_c, m, m.task().reward_weights())?[m.start()];
    let slack = max_c.values[m.start()] - tau;
    let hi = if slack > 1e-9 {
        ((d0 - v_r_c) / slack).max(0.0) * (1.0 + 1e-6) + 1e-9
    } else {
        1e6
    };
    let f = |l: f64| dual_value(m, l);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..400 {
        if b - a <= 1e-12 * (1.0 + hi) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let lambda = 0.5 * (a + b);
    Ok(if d0 <= f(lambda)? { 0.0 } else { lambda })
}

/// Random instance whose threshold sits at `fraction` of the way from the
/// least to the most achievable utility, so Slater's condition holds for any
/// `fraction < 1`.
pub fn random_feasible_cmdp<R: Rng + ?Sized>(spec: &RandomCmdpSpec, fraction: f64, rng: &mut R) -> Result<TabularCmdp> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::param("fraction", format!("{fraction} not in [0, 1)")));
    }
    let m = random_cmdp(spec, rng)?;
    let (lo, hi) = utility_range(&m)?;
    m.with_threshold(lo + fraction * (hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{evaluate_q, TaskSpec};
    use crate::env::Environment;
    use crate::rng::stream;

    fn two_arms(tau: f64) -> TabularCmdp {
        // one state; a0 gives (r=1, c=0), a1 gives (r=0, c=1)
        let task = TaskSpec::new("arms", vec![1.0, 0.0], vec![0.0, 1.0], tau, 0.5).unwrap();
        TabularCmdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0, 0.0, 1.0], task, 0).unwrap()
    }

    fn absorbing(gamma: f64) -> TabularCmdp {
        let task = TaskSpec::new("abs", vec![1.0, 0.0], vec![0.0, 0.0], 0.0, gamma).unwrap();
        TabularCmdp::new(1, 1, vec![1.0], vec![1.0, 0.0], task, 0).unwrap()
    }

    #[test]
    fn single_state_mixture() {
        let sol = solve_cmdp_exact(&two_arms(1.0)).unwrap().solved().unwrap();
        assert!((sol.policy.distribution(0)[1] - 0.5).abs() < 1e-9);
        assert!((sol.v_r - 1.0).abs() < 1e-9);
        assert!((sol.v_c - 1.0).abs() < 1e-9);
        assert!((sol.lambda - 1.0).abs() < 1e-9);
        assert!((sol.dual_value - 1.0).abs() < 1e-9);
        assert!((sol.occupation.iter().sum::<f64>() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn inactive_and_infeasible_thresholds() {
        // every policy has V_c >= 0
        let sol = solve_cmdp_exact(&two_arms(-0.5)).unwrap().solved().unwrap();
        assert_eq!(sol.lambda, 0.0);
        assert!((sol.v_r - 2.0).abs() < 1e-9);
        match solve_cmdp_exact(&two_arms(2.5)).unwrap() {
            CmdpSolution::Infeasible { max_utility } => assert!((max_utility - 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn geometric_series() {
        let m = absorbing(0.9);
        let v = exact_policy_evaluation(&TabularPolicy::uniform(1, 1), &m, &[1.0, 0.0]).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-12);
        let v = exact_policy_evaluation(&TabularPolicy::uniform(1, 1), &m, &[0.0, 0.0]).unwrap();
        assert_eq!(v, vec![0.0]);
        let psi = dp_successor_features(&TabularPolicy::uniform(1, 1), &absorbing(0.5), 1e-12).unwrap();
        assert!((psi.get(&0, 0)[0] - 2.0).abs() < 1e-12);
        assert_eq!(psi.get(&0, 0)[1], 0.0);
    }

    #[test]
    fn dp_features_at_zero_discount_are_expected_features() {
        let spec = RandomCmdpSpec {
            gamma: 0.0,
            ..Default::default()
        };
        let m = random_cmdp(&spec, &mut stream(&[11])).unwrap();
        let psi = dp_successor_features(&TabularPolicy::uniform(6, 3), &m, 1e-12).unwrap();
        for s in 0..6 {
            for a in 0..3 {
                for (x, y) in psi.get(&s, a).iter().zip(m.expected_phi(s, a)) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dp_features_reproduce_policy_values() {
        let spec = RandomCmdpSpec {
            n_states: 5,
            n_actions: 3,
            ..Default::default()
        };
        let m = random_cmdp(&spec, &mut stream(&[12])).unwrap();
        let pi = TabularPolicy::deterministic(&[0, 2, 1, 1, 0], 3).unwrap();
        let psi = dp_successor_features(&pi, &m, 1e-10).unwrap();
        // independent check: value iteration for the same policy
        let signal = m.expected_signal(m.task().reward_weights()).unwrap();
        let mut v = vec![0.0; 5];
        for _ in 0..2000 {
            v = (0..5)
                .map(|s| {
                    let a = pi.mode(s);
                    signal[s * 3 + a] + m.gamma() * dot(m.kernel_row(s, a), &v)
                })
                .collect();
        }
        for (s, vs) in v.iter().enumerate().take(5) {
            let q = evaluate_q(psi.get(&s, pi.mode(s)), m.task().reward_weights()).unwrap();
            assert!((q - vs).abs() <= 1e-8, "{q} vs {vs}");
        }
    }

    #[test]
    fn evaluation_matches_monte_carlo() {
        let m = random_cmdp(&RandomCmdpSpec::default(), &mut stream(&[13])).unwrap();
        let pi = TabularPolicy::deterministic(&[1, 0, 2, 2, 1, 0], 3).unwrap();
        let w = m.task().reward_weights().to_vec();
        let exact = exact_policy_evaluation(&pi, &m, &w).unwrap()[0];
        let mut rng = stream(&[13, 1]);
        let (n, horizon) = (100_000, 200);
        let returns: Vec<f64> = (0..n)
            .map(|_| {
                let (mut s, mut g, mut disc) = (0, 0.0, 1.0);
                for _ in 0..horizon {
                    let out = m.sample(&s, pi.mode(s), &mut rng).unwrap();
                    g += disc * dot(out.phi.as_slice(), &w);
                    disc *= m.gamma();
                    s = out.next;
                }
                g
            })
            .collect();
        let mean = returns.iter().sum::<f64>() / n as f64;
        let var = returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let stderr = (var / n as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * stderr + 1e-6, "{mean} vs {exact} (se {stderr})");
    }

    #[test]
    fn policy_iteration_is_greedy_at_the_fixed_point() {
        let m = random_cmdp(&RandomCmdpSpec::default(), &mut stream(&[14])).unwrap();
        let sol = solve_mdp(&m, m.task().reward_weights()).unwrap();
        for s in 0..6 {
            let row = &sol.q[s * 3..(s + 1) * 3];
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(row[sol.actions[s]] >= best - 1e-10);
            assert!((sol.values[s] - row[sol.actions[s]]).abs() < 1e-10);
        }
    }

    #[test]
    fn lp_matches_dual_on_random_instances() {
        let spec = RandomCmdpSpec {
            n_states: 8,
            n_actions: 3,
            ..Default::default()
        };
        for i in 0..5 {
            let m = random_feasible_cmdp(&spec, 0.6, &mut stream(&[15, i])).unwrap();
            let sol = solve_cmdp_exact(&m).unwrap().solved().unwrap();
            assert!((sol.objective - sol.dual_value).abs() <= 1e-6, "{sol:?}");
            assert!(sol.v_c >= m.task().threshold() - 1e-7);
        }
    }
}
