//! Comparison learners: successor-feature Q-learning with the utility folded
//! into the reward, and single-task primal-dual Q-learning.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{dot, FeatureVector, TaskSpec};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::metrics::{EpisodeTally, MetricsRecord};
use crate::sf::{sf_td_update, train_task, LambdaControl, LearnerConfig, PolicyEntry, SfTable, StreamKey, TdSample};

/// SF transfer that treats the utility as extra reward: GPI and learning use
/// `psi . (w_r + w_c)`. The threshold is blanked before training, so the
/// result cannot depend on it.
pub fn sfql_train_task<E: Environment>(
    env: &E,
    task: &TaskSpec,
    library: &[PolicyEntry<E::State>],
    learner: &LearnerConfig,
    key: StreamKey,
    sink: &mut dyn FnMut(MetricsRecord),
) -> Result<PolicyEntry<E::State>> {
    let blind = task.with_threshold(0.0)?;
    train_task(env, &blind, library, learner, &LambdaControl::Folded, key, sink)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdqlConfig {
    pub learner: LearnerConfig,
    /// Multiplier step after episode `k` (1-based) is `step_constant / k`.
    pub step_constant: f64,
}

impl Default for PdqlConfig {
    fn default() -> Self {
        Self {
            learner: LearnerConfig::default(),
            step_constant: 0.5,
        }
    }
}

/// Reward and utility action values, stored as a two-column table.
#[derive(Clone, Debug, PartialEq)]
pub struct PdqlOutcome<S: Eq + std::hash::Hash> {
    /// `q.get(s, a) == [Q_r(s, a), Q_c(s, a)]`
    pub q: SfTable<S>,
    pub lambda: f64,
    /// Multiplier after every episode.
    pub lambda_trace: Vec<f64>,
}

fn lagrangian_greedy<S: Clone + Eq + std::hash::Hash>(q: &SfTable<S>, s: &S, lambda: f64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for a in 0..q.n_actions() {
        let row = q.get(s, a);
        let v = row[0] + lambda * row[1];
        if v > best.1 {
            best = (a, v);
        }
    }
    best.0
}

/// Tabular primal-dual Q-learning on one task from fresh tables.
///
/// Acts epsilon-greedily on `Q_r + lambda Q_c`; both tables take one-step TD
/// updates bootstrapped on the greedy action at `s'`. After each episode
/// `lambda <- max(0, lambda - eta_k (Q_c(s0, greedy) - tau))`.
pub fn pdql_train_task<E: Environment>(
    env: &E,
    task: &TaskSpec,
    cfg: &PdqlConfig,
    key: StreamKey,
    sink: &mut dyn FnMut(MetricsRecord),
) -> Result<PdqlOutcome<E::State>> {
    let l = &cfg.learner;
    l.validate()?;
    if !(cfg.step_constant > 0.0) {
        return Err(Error::param("step_constant", "must be positive"));
    }
    task.check_dim(env.feature_dim())?;
    let n_actions = env.n_actions();
    let mut q = SfTable::new(n_actions, 2);
    let mut lambda: f64 = 0.0;
    let mut trace = Vec::new();
    let s0 = env.initial_state();
    let (mut step, mut episode) = (0, 0);
    while step < l.steps_per_task {
        let mut rng = key.episode(episode);
        let mut s = s0.clone();
        let mut tally = EpisodeTally::default();
        let a0 = lagrangian_greedy(&q, &s0, lambda);
        let v_c_hat = q.get(&s0, a0)[1];
        for _ in 0..l.episode_horizon {
            if step >= l.steps_per_task {
                break;
            }
            let a = if rng.random::<f64>() < l.epsilon {
                rng.random_range(0..n_actions)
            } else {
                lagrangian_greedy(&q, &s, lambda)
            };
            let out = env.sample(&s, a, &mut rng)?;
            let phi = out.phi.as_slice();
            let (r, c) = (dot(phi, task.reward_weights()), dot(phi, task.cost_weights()));
            tally.observe(r, &out.events, task.reward_weights(), phi);
            let signal = FeatureVector::new(vec![r, c])?;
            let a_next = lagrangian_greedy(&q, &out.next, lambda);
            sf_td_update(
                &mut q,
                TdSample {
                    s: &s,
                    a,
                    phi: &signal,
                    s_next: &out.next,
                    done: out.done,
                },
                a_next,
                l.alpha_sf,
                l.gamma,
            )?;
            step += 1;
            if out.done {
                break;
            }
            s = out.next;
        }
        sink(tally.finish(key.task, episode, step, v_c_hat, lambda));
        episode += 1;
        let greedy = lagrangian_greedy(&q, &s0, lambda);
        let margin = q.get(&s0, greedy)[1] - task.threshold();
        lambda = (lambda - cfg.step_constant / episode as f64 * margin).max(0.0);
        trace.push(lambda);
    }
    Ok(PdqlOutcome {
        q,
        lambda,
        lambda_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{sample_task, GridLayout};
    use crate::oracle::{solve_cmdp_exact, TabularCmdp};
    use crate::rng::stream;

    fn short() -> LearnerConfig {
        LearnerConfig {
            steps_per_task: 2_000,
            ..LearnerConfig::default()
        }
    }

    #[test]
    fn folded_reward_example() {
        let w = [1.0, -0.1];
        let phi = [1.0, 1.0];
        assert!((dot(&phi, &[w[0], 0.0]) + dot(&phi, &[0.0, w[1]]) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn sfql_ignores_threshold() {
        let env = GridLayout::default_four_room();
        let task = sample_task(&mut stream(&[1]), &env, -5e-6, 0.95, "t").unwrap();
        let key = StreamKey { seed: 3, task: 0 };
        let mut m1 = Vec::new();
        let e1 = sfql_train_task(&env, &task, &[], &short(), key, &mut |r| m1.push(r)).unwrap();
        let mut m2 = Vec::new();
        let other = task.with_threshold(-40.0).unwrap();
        let e2 = sfql_train_task(&env, &other, &[], &short(), key, &mut |r| m2.push(r)).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(m1, m2);
        assert!(m1.iter().all(|r| r.lambda == 1.0));
    }

    #[test]
    fn sfql_and_zero_lambda_agree_without_cost() {
        let env = GridLayout::default_four_room();
        let t = sample_task(&mut stream(&[2]), &env, 0.0, 0.95, "t").unwrap();
        let no_cost = TaskSpec::new("t", t.reward_weights().to_vec(), vec![0.0; t.dim()], 0.0, 0.95).unwrap();
        let key = StreamKey { seed: 4, task: 0 };
        let a = sfql_train_task(&env, &no_cost, &[], &short(), key, &mut |_| {}).unwrap();
        let b = train_task(&env, &no_cost, &[], &short(), &LambdaControl::Fixed(0.0), key, &mut |_| {}).unwrap();
        assert_eq!(a.sf, b.sf);
    }

    #[test]
    fn pdql_permissive_threshold_keeps_lambda_at_zero() {
        let env = GridLayout::default_four_room();
        let task = sample_task(&mut stream(&[5]), &env, -1e9, 0.95, "t").unwrap();
        let cfg = PdqlConfig {
            learner: short(),
            ..Default::default()
        };
        let out = pdql_train_task(&env, &task, &cfg, StreamKey { seed: 0, task: 0 }, &mut |_| {}).unwrap();
        assert!(out.lambda_trace.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn pdql_is_reproducible_and_resets_per_task() {
        let env = GridLayout::default_four_room();
        let task = sample_task(&mut stream(&[6]), &env, -5e-6, 0.95, "t").unwrap();
        let cfg = PdqlConfig {
            learner: short(),
            ..Default::default()
        };
        let key = StreamKey { seed: 1, task: 2 };
        let a = pdql_train_task(&env, &task, &cfg, key, &mut |_| {}).unwrap();
        let b = pdql_train_task(&env, &task, &cfg, key, &mut |_| {}).unwrap();
        assert_eq!(a, b);
        assert!(a.lambda_trace.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn pdql_multiplier_oscillates_around_the_exact_optimum() {
        let task = TaskSpec::new("arms", vec![1.0, 0.0], vec![0.0, 1.0], 1.0, 0.5).unwrap();
        let m = TabularCmdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0, 0.0, 1.0], task.clone(), 0).unwrap();
        let exact = solve_cmdp_exact(&m).unwrap().solved().unwrap();
        let cfg = PdqlConfig {
            learner: LearnerConfig {
                alpha_sf: 0.1,
                gamma: 0.5,
                epsilon: 0.1,
                episode_horizon: 20,
                steps_per_task: 200_000,
                ..LearnerConfig::default()
            },
            step_constant: 1.0,
        };
        let out = pdql_train_task(&m, &task, &cfg, StreamKey { seed: 0, task: 0 }, &mut |_| {}).unwrap();
        let tail = &out.lambda_trace[out.lambda_trace.len() / 2..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let crossings = tail.windows(2).filter(|w| (w[0] - exact.lambda) * (w[1] - exact.lambda) < 0.0).count();
        assert!((mean - exact.lambda).abs() < 0.1, "mean {mean}");
        assert!(crossings >= 10, "{crossings} crossings");
    }
}
