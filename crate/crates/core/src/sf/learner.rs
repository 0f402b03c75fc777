use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{dot, FeatureVector, TaskSpec};
use crate::dual::{estimate_dual, estimate_values, DualConfig, PolicyValues};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::metrics::{EpisodeTally, MetricsRecord};
use crate::rng::{domain, stream};

use super::table::{PolicyEntry, PolicyView, SfTable};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub alpha_sf: f64,
    pub alpha_w: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub episode_horizon: usize,
    pub steps_per_task: usize,
    /// Interactions between two dual re-estimations.
    pub dual_update_period: usize,
    pub init_from_previous: bool,
    /// Rows of the table being trained are created on first visit with
    /// entries drawn from Uniform[-init_noise, init_noise].
    pub init_noise: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha_sf: 0.5,
            alpha_w: 0.5,
            gamma: 0.95,
            epsilon: 0.12,
            episode_horizon: 200,
            steps_per_task: 20_000,
            dual_update_period: 200,
            init_from_previous: true,
            init_noise: 1e-6,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha_sf", self.alpha_sf), ("alpha_w", self.alpha_w)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::param(name, format!("{v} not in (0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::param("gamma", format!("{} not in [0, 1)", self.gamma)));
        }
        if !(self.init_noise >= 0.0 && self.init_noise.is_finite()) {
            return Err(Error::param("init_noise", format!("{} must be finite and >= 0", self.init_noise)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::param("epsilon", format!("{} not in [0, 1]", self.epsilon)));
        }
        for (name, v) in [
            ("episode_horizon", self.episode_horizon),
            ("steps_per_task", self.steps_per_task),
            ("dual_update_period", self.dual_update_period),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be positive"));
            }
        }
        Ok(())
    }
}

/// How the multiplier in the GPI criterion is chosen during training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaControl {
    /// Re-estimated from the library every `dual_update_period` steps.
    Estimated(DualConfig),
    Fixed(f64),
    /// Cost folded into the reward: GPI on `psi . (w_r + w_c)`, no threshold.
    Folded,
}

/// The pieces of one interaction that the SF update needs.
#[derive(Clone, Copy, Debug)]
pub struct TdSample<'a, S> {
    pub s: &'a S,
    pub a: usize,
    pub phi: &'a FeatureVector,
    pub s_next: &'a S,
    pub done: bool,
}

/// `psi(s,a) += alpha (phi + gamma psi(s',a') (1 - done) - psi(s,a))`.
pub fn sf_td_update<S: Clone + Eq + std::hash::Hash>(
    psi: &mut SfTable<S>,
    t: TdSample<'_, S>,
    a_next: usize,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    let d = psi.dim();
    if t.phi.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: t.phi.dim(),
        });
    }
    let n = psi.n_actions();
    for a in [t.a, a_next] {
        if a >= n {
            return Err(Error::InvalidAction {
                action: a,
                n_actions: n,
            });
        }
    }
    // bootstrap row copied first: s' may equal s
    let mut target: Vec<f64> = t.phi.as_slice().to_vec();
    if !t.done {
        for (x, &b) in target.iter_mut().zip(psi.get(t.s_next, a_next)) {
            *x += gamma * b;
        }
    }
    let row = psi.get_mut(t.s, t.a);
    for (p, x) in row.iter_mut().zip(target) {
        *p += alpha * (x - *p);
    }
    Ok(())
}

/// Least-mean-squares step `w += alpha (observed - phi . w) phi`.
pub fn weight_update(w: &mut [f64], phi: &FeatureVector, observed: f64, alpha: f64) -> Result<()> {
    if w.len() != phi.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: phi.dim(),
        });
    }
    let err = observed - dot(phi.as_slice(), w);
    if err != 0.0 {
        for (wi, &f) in w.iter_mut().zip(phi.as_slice()) {
            *wi += alpha * err * f;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Score<'a> {
    Lagrangian {
        reward: &'a [f64],
        cost: &'a [f64],
        lambda: f64,
    },
    Linear(&'a [f64]),
}

impl Score<'_> {
    #[inline]
    fn eval(&self, psi: &[f64]) -> f64 {
        match *self {
            Score::Lagrangian {
                reward,
                cost,
                lambda,
            } => dot(psi, reward) + lambda * dot(psi, cost),
            Score::Linear(w) => dot(psi, w),
        }
    }
}

/// Best `(action, table index)`, scanning actions in order and tables in order
/// within each action, so ties go to the lowest action and then the lowest
/// table.
pub(crate) fn gpi_choose<'a, S, I>(tables: I, s: &S, n_actions: usize, score: Score<'_>) -> Option<(usize, usize)>
where
    S: Clone + Eq + std::hash::Hash + 'a,
    I: Iterator<Item = &'a SfTable<S>> + Clone,
{
    let mut best: Option<(usize, usize, f64)> = None;
    // row lookups hoisted out of the action loop
    let rows: Vec<Option<&[f64]>> = tables.clone().map(|t| t.state_row(s)).collect();
    let dim = tables.clone().next()?.dim();
    let zeros = vec![0.0; dim];
    let zero_score = score.eval(&zeros);
    for a in 0..n_actions {
        for (i, row) in rows.iter().enumerate() {
            let v = match row {
                Some(r) => score.eval(&r[a * dim..(a + 1) * dim]),
                None => zero_score,
            };
            if best.is_none_or(|(_, _, b)| v > b) {
                best = Some((a, i, v));
            }
        }
    }
    best.map(|(a, i, _)| (a, i))
}

/// Lagrangian GPI: `argmax_a max_i psi_i(s,a) . w_r + lambda psi_i(s,a) . w_c`.
pub fn gpi_action<S: Clone + Eq + std::hash::Hash>(
    s: &S,
    library: &[PolicyEntry<S>],
    reward_weights: &[f64],
    cost_weights: &[f64],
    lambda: f64,
) -> Result<usize> {
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", format!("{lambda} must be >= 0")));
    }
    let first = library.first().ok_or(Error::EmptyLibrary)?;
    let d = first.sf.dim();
    for w in [reward_weights, cost_weights] {
        if w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: w.len(),
            });
        }
    }
    let score = Score::Lagrangian {
        reward: reward_weights,
        cost: cost_weights,
        lambda,
    };
    let (a, _) = gpi_choose(library.iter().map(|e| &e.sf), s, first.sf.n_actions(), score)
        .ok_or(Error::EmptyLibrary)?;
    Ok(a)
}

/// Seed and task position used to derive the per-episode random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub task: usize,
}

impl StreamKey {
    pub fn episode(&self, episode: usize) -> rand_chacha::ChaCha8Rng {
        stream(&[self.seed, domain::EPISODE, self.task as u64, episode as u64])
    }

    fn dual(&self, round: usize) -> rand_chacha::ChaCha8Rng {
        stream(&[self.seed, domain::DUAL, self.task as u64, round as u64])
    }

    fn init(&self) -> rand_chacha::ChaCha8Rng {
        stream(&[self.seed, domain::INIT, self.task as u64])
    }
}

/// Trains a successor-feature policy for one task while transferring from
/// `library`.
///
/// Actions are epsilon-greedy around Lagrangian GPI over the library plus the
/// policy being trained, evaluated with the task weights learned so far. The
/// new table and weights start as copies of the last library entry when
/// `init_from_previous` is set. An estimated multiplier is recomputed every
/// `dual_update_period` steps from the values at the start state. One
/// [`MetricsRecord`] per episode goes to `sink`.
pub fn train_task<E: Environment>(
    env: &E,
    task: &TaskSpec,
    library: &[PolicyEntry<E::State>],
    learner: &LearnerConfig,
    control: &LambdaControl,
    key: StreamKey,
    sink: &mut dyn FnMut(MetricsRecord),
) -> Result<PolicyEntry<E::State>> {
    learner.validate()?;
    let d = env.feature_dim();
    let n_actions = env.n_actions();
    task.check_dim(d)?;
    for e in library {
        if e.sf.dim() != d || e.sf.n_actions() != n_actions {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: e.sf.dim(),
            });
        }
    }
    let mut lambda = match *control {
        LambdaControl::Estimated(cfg) => {
            cfg.validate()?;
            0.0
        }
        LambdaControl::Fixed(l) => {
            if !(l >= 0.0) {
                return Err(Error::param("lambda", format!("{l} must be >= 0")));
            }
            l
        }
        LambdaControl::Folded => 1.0,
    };
    let mut psi = match (learner.init_from_previous, library.last()) {
        (true, Some(prev)) => prev.sf.clone(),
        _ => SfTable::new(n_actions, d),
    };
    let (mut w_r, mut w_c) = match (learner.init_from_previous, library.last()) {
        (true, Some(prev)) => (prev.reward_weights.clone(), prev.cost_weights.clone()),
        _ => (vec![0.0; d], vec![0.0; d]),
    };
    let mut folded = vec![0.0; d];
    let (gamma, tau) = (learner.gamma, task.threshold());
    let mut init_rng = key.init();
    let noise = learner.init_noise;
    let mut touch = |psi: &mut SfTable<E::State>, s: &E::State| {
        psi.ensure_row(s, || if noise > 0.0 { init_rng.random_range(-noise..=noise) } else { 0.0 })
    };

    let s0 = env.initial_state();
    let mut step = 0;
    let mut episode = 0;
    let mut dual_round = 0;
    while step < learner.steps_per_task {
        let mut rng = key.episode(episode);
        let mut s = s0.clone();
        let mut tally = EpisodeTally::default();
        let mut v_c_hat = None;
        for _ in 0..learner.episode_horizon {
            if step >= learner.steps_per_task {
                break;
            }
            if let LambdaControl::Estimated(cfg) = control {
                if step % learner.dual_update_period == 0 {
                    let mut drng = key.dual(dual_round);
                    dual_round += 1;
                    let values = library
                        .iter()
                        .map(PolicyEntry::view)
                        .chain(std::iter::once(PolicyView {
                            sf: &psi,
                            reward_weights: &w_r,
                            cost_weights: &w_c,
                            training_dual: lambda,
                        }))
                        .map(|view| estimate_values(view, &w_r, &w_c, gamma, &s0, cfg.mode, env, &mut drng))
                        .collect::<Result<Vec<_>>>()?;
                    lambda = match estimate_dual(&PolicyValues::new(values)?, tau, cfg) {
                        Ok(l) => l,
                        Err(Error::ProbablyInfeasible { cap, .. }) => cap,
                        Err(e) => return Err(e),
                    };
                }
            }
            touch(&mut psi, &s);
            let score = if matches!(control, LambdaControl::Folded) {
                for k in 0..d {
                    folded[k] = w_r[k] + w_c[k];
                }
                Score::Linear(&folded)
            } else {
                Score::Lagrangian {
                    reward: &w_r,
                    cost: &w_c,
                    lambda,
                }
            };
            let (greedy, entry) = gpi_choose(library.iter().map(|e| &e.sf).chain(std::iter::once(&psi)), &s, n_actions, score).expect("library plus current table is non-empty");
            if v_c_hat.is_none() {
                let chosen = library.get(entry).map_or(&psi, |e| &e.sf);
                v_c_hat = Some(chosen.q_unchecked(&s, greedy, &w_c));
            }
            let explore = rng.random::<f64>() < learner.epsilon;
            let a = if explore {
                rng.random_range(0..n_actions)
            } else {
                greedy
            };
            let out = env.sample(&s, a, &mut rng)?;
            let phi = out.phi.as_slice();
            let r = dot(phi, task.reward_weights());
            let c = dot(phi, task.cost_weights());
            tally.observe(r, &out.events, task.reward_weights(), phi);
            weight_update(&mut w_r, &out.phi, r, learner.alpha_w)?;
            weight_update(&mut w_c, &out.phi, c, learner.alpha_w)?;

            let a_next = if out.done {
                0
            } else {
                touch(&mut psi, &out.next);
                let score = if matches!(control, LambdaControl::Folded) {
                    for k in 0..d {
                        folded[k] = w_r[k] + w_c[k];
                    }
                    Score::Linear(&folded)
                } else {
                    Score::Lagrangian {
                        reward: &w_r,
                        cost: &w_c,
                        lambda,
                    }
                };
                gpi_choose(library.iter().map(|e| &e.sf).chain(std::iter::once(&psi)), &out.next, n_actions, score).map_or(0, |(a, _)| a)
            };
            sf_td_update(
                &mut psi,
                TdSample {
                    s: &s,
                    a,
                    phi: &out.phi,
                    s_next: &out.next,
                    done: out.done,
                },
                a_next,
                learner.alpha_sf,
                gamma,
            )?;
            step += 1;
            if out.done {
                break;
            }
            s = out.next;
        }
        sink(tally.finish(task_index(key), episode, step, v_c_hat.unwrap_or(0.0), lambda));
        episode += 1;
    }
    PolicyEntry::new(psi, lambda, w_r, w_c, task.task_id.clone())
}

fn task_index(key: StreamKey) -> usize {
    key.task
}
