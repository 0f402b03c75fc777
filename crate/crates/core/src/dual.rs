//! Estimating the optimal dual variable of a target task from the values of a
//! finite set of source policies.
//!
//! Over a finite source set the dual function
//! `d(lambda) = max_i [V_r,i + lambda (V_c,i - tau)]` is the upper envelope of
//! lines, hence convex and piecewise linear. [`estimate_dual`] minimizes it by
//! projected subgradient descent with `eta_t = c / t`; [`analytic_dual_min`]
//! walks the envelope breakpoints and returns the exact minimizer.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::dot;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::sf::{PolicyEntry, PolicyView};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyValue {
    pub reward: f64,
    pub constraint: f64,
}

impl PolicyValue {
    pub fn new(reward: f64, constraint: f64) -> Self {
        Self { reward, constraint }
    }

    fn lagrangian(&self, lambda: f64, tau: f64) -> f64 {
        self.reward + lambda * (self.constraint - tau)
    }
}

/// Values of each source policy at one state of the target task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyValues(Vec<PolicyValue>);

impl PolicyValues {
    pub fn new(values: Vec<PolicyValue>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyValues);
        }
        if values
            .iter()
            .any(|v| !v.reward.is_finite() || !v.constraint.is_finite())
        {
            return Err(Error::NonFinite("policy values"));
        }
        Ok(Self(values))
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(r, c)| PolicyValue::new(r, c)).collect())
    }

    pub fn as_slice(&self) -> &[PolicyValue] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EstimationMode {
    /// `psi(s, a*) . w` for the entry's own greedy action `a*`.
    SfDotProduct,
    /// Average discounted returns of `rollouts` greedy rollouts, each cut
    /// after `horizon` steps.
    MonteCarlo { rollouts: usize, horizon: usize },
}

/// Which margin drives the dual step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgradientRule {
    /// `V_c,i - tau`, the derivative of `d` at the selected line.
    #[default]
    ConstraintMargin,
    /// `V_r,i - tau`, the variant printed in the published update rule. Kept
    /// for comparison only.
    PrintedRewardMargin,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualConfig {
    pub iterations: usize,
    pub step_constant: f64,
    pub mode: EstimationMode,
    pub rule: SubgradientRule,
    /// Iterates above this are reported as [`Error::ProbablyInfeasible`].
    pub divergence_cap: f64,
}

impl Default for DualConfig {
    /// Four-Room defaults: `c = 1000`, 1000 iterations, values read off the
    /// successor features.
    fn default() -> Self {
        Self {
            iterations: 1000,
            step_constant: 1000.0,
            mode: EstimationMode::SfDotProduct,
            rule: SubgradientRule::ConstraintMargin,
            divergence_cap: 1e6,
        }
    }
}

impl DualConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::param("dual.iterations", "must be >= 1"));
        }
        if !(self.step_constant > 0.0 && self.step_constant.is_finite()) {
            return Err(Error::param("dual.step_constant", "must be positive"));
        }
        if !(self.divergence_cap > 0.0) {
            return Err(Error::param("dual.divergence_cap", "must be positive"));
        }
        if let EstimationMode::MonteCarlo { rollouts, horizon } = self.mode {
            if rollouts == 0 {
                return Err(Error::param("dual.mode.rollouts", "must be >= 1"));
            }
            if horizon == 0 {
                return Err(Error::param("dual.mode.horizon", "must be >= 1"));
            }
        }
        Ok(())
    }
}

/// `eta_t = c / t`: vanishing, not summable, square summable.
pub fn step_schedule(t: usize, c: f64) -> f64 {
    debug_assert!(t >= 1);
    c / t as f64
}

/// `d(lambda) = max_i [V_r,i + lambda (V_c,i - tau)]`.
pub fn dual_function(values: &PolicyValues, tau: f64, lambda: f64) -> f64 {
    values
        .0
        .iter()
        .map(|v| v.lagrangian(lambda, tau))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn select(values: &[PolicyValue], lambda: f64, tau: f64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.iter().enumerate() {
        let l = v.lagrangian(lambda, tau);
        if l > best.1 {
            best = (i, l);
        }
    }
    best.0
}

/// One alternating update: pick the best source at `lambda`, then take a
/// projected step along its margin. Returns `(i_selected, lambda')`.
pub fn dual_update_step(
    lambda: f64,
    values: &PolicyValues,
    tau: f64,
    eta: f64,
    rule: SubgradientRule,
) -> Result<(usize, f64)> {
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", format!("{lambda} must be >= 0")));
    }
    if !(eta > 0.0) {
        return Err(Error::param("eta", format!("{eta} must be > 0")));
    }
    let i = select(&values.0, lambda, tau);
    let v = values.0[i];
    let margin = match rule {
        SubgradientRule::ConstraintMargin => v.constraint - tau,
        SubgradientRule::PrintedRewardMargin => v.reward - tau,
    };
    Ok((i, (lambda - eta * margin).max(0.0)))
}

/// Runs `cfg.iterations` dual updates from `lambda = 0` and returns the last
/// iterate. Fails with [`Error::ProbablyInfeasible`] once the iterate exceeds
/// the divergence cap.
pub fn estimate_dual(values: &PolicyValues, tau: f64, cfg: &DualConfig) -> Result<f64> {
    cfg.validate()?;
    let mut lambda = 0.0;
    for t in 1..=cfg.iterations {
        let eta = step_schedule(t, cfg.step_constant);
        lambda = dual_update_step(lambda, values, tau, eta, cfg.rule)?.1;
        if lambda > cfg.divergence_cap {
            return Err(Error::ProbablyInfeasible {
                cap: cfg.divergence_cap,
                iteration: t,
            });
        }
    }
    Ok(lambda)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DualMinimum {
    Bounded { lambda: f64, value: f64 },
    /// Every margin is negative: the dual decreases without bound and no
    /// mixture of the sources meets the threshold.
    Unbounded,
}

impl DualMinimum {
    pub fn lambda(&self) -> Option<f64> {
        match *self {
            DualMinimum::Bounded { lambda, .. } => Some(lambda),
            DualMinimum::Unbounded => None,
        }
    }
}

/// Exact minimizer of the piecewise-linear dual over `lambda >= 0`.
///
/// Walks the upper envelope from `lambda = 0` towards larger multipliers. On
/// a flat minimum the leftmost minimizer is returned.
pub fn analytic_dual_min(values: &PolicyValues, tau: f64) -> DualMinimum {
    let lines: Vec<(f64, f64)> = values
        .0
        .iter()
        .map(|v| (v.reward, v.constraint - tau))
        .collect();
    // top line at 0; on ties the steepest one continues the envelope
    let mut cur = 0;
    for (j, &(a, b)) in lines.iter().enumerate() {
        let (ca, cb) = lines[cur];
        if a > ca || (a == ca && b > cb) {
            cur = j;
        }
    }
    let mut lambda = 0.0_f64;
    loop {
        let (a_cur, b_cur) = lines[cur];
        if b_cur >= 0.0 {
            return DualMinimum::Bounded {
                lambda,
                value: dual_function(values, tau, lambda),
            };
        }
        let mut next: Option<(usize, f64)> = None;
        for (j, &(a, b)) in lines.iter().enumerate() {
            if b <= b_cur {
                continue;
            }
            let cross = ((a_cur - a) / (b - b_cur)).max(lambda);
            next = match next {
                None => Some((j, cross)),
                Some((k, best)) => {
                    if cross < best || (cross == best && b > lines[k].1) {
                        Some((j, cross))
                    } else {
                        Some((k, best))
                    }
                }
            };
        }
        match next {
            None => return DualMinimum::Unbounded,
            Some((j, cross)) => {
                lambda = cross;
                cur = j;
            }
        }
    }
}

/// Value of one source policy on the target weights at state `s`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_values<E: Environment, R: Rng + ?Sized>(
    entry: PolicyView<'_, E::State>,
    reward_weights: &[f64],
    cost_weights: &[f64],
    gamma: f64,
    s: &E::State,
    mode: EstimationMode,
    env: &E,
    rng: &mut R,
) -> Result<PolicyValue> {
    let d = entry.sf.dim();
    for w in [reward_weights, cost_weights] {
        if w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: w.len(),
            });
        }
    }
    match mode {
        EstimationMode::SfDotProduct => {
            let psi = entry.sf.get(s, entry.greedy_action(s));
            Ok(PolicyValue::new(dot(psi, reward_weights), dot(psi, cost_weights)))
        }
        EstimationMode::MonteCarlo { rollouts, horizon } => {
            if rollouts == 0 {
                return Err(Error::param("rollouts", "Monte-Carlo estimation needs K >= 1"));
            }
            let (mut sum_r, mut sum_c) = (0.0, 0.0);
            for _ in 0..rollouts {
                let (r, c) = rollout(entry, reward_weights, cost_weights, gamma, s, horizon, env, rng)?;
                sum_r += r;
                sum_c += c;
            }
            let k = rollouts as f64;
            Ok(PolicyValue::new(sum_r / k, sum_c / k))
        }
    }
}

/// Discounted `(r, c)` returns of one greedy rollout.
#[allow(clippy::too_many_arguments)]
pub fn rollout<E: Environment, R: Rng + ?Sized>(
    entry: PolicyView<'_, E::State>,
    reward_weights: &[f64],
    cost_weights: &[f64],
    gamma: f64,
    s: &E::State,
    horizon: usize,
    env: &E,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let mut state = s.clone();
    let (mut ret_r, mut ret_c, mut discount) = (0.0, 0.0, 1.0);
    for _ in 0..horizon {
        let a = entry.greedy_action(&state);
        let out = env.sample(&state, a, rng)?;
        ret_r += discount * dot(out.phi.as_slice(), reward_weights);
        ret_c += discount * dot(out.phi.as_slice(), cost_weights);
        discount *= gamma;
        if out.done || discount == 0.0 {
            break;
        }
        state = out.next;
    }
    Ok((ret_r, ret_c))
}

/// Inputs of a consistency experiment: source policies, a target task, and
/// the exact values against which the plug-in estimate is measured.
pub struct ConsistencySetup<'a, E: Environment> {
    pub env: &'a E,
    pub sources: &'a [PolicyEntry<E::State>],
    pub reward_weights: &'a [f64],
    pub cost_weights: &'a [f64],
    pub gamma: f64,
    pub threshold: f64,
    pub state: E::State,
    pub exact: PolicyValues,
    pub horizon: usize,
    pub dual: DualConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub lambda_hat: f64,
    pub lambda_star: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySummary {
    pub k: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub lambda_star: f64,
    pub rows: Vec<ConsistencyRow>,
    pub summary: Vec<ConsistencySummary>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// For each sample size `K` and seed: estimate every source's values with `K`
/// Monte-Carlo rollouts, run [`estimate_dual`] on the estimates and record the
/// distance to the exact-value minimizer.
pub fn consistency_experiment<E: Environment>(
    setup: &ConsistencySetup<'_, E>,
    k_list: &[usize],
    seeds: &[u64],
) -> Result<ConsistencyReport> {
    if setup.sources.len() != setup.exact.len() {
        return Err(Error::DimensionMismatch {
            expected: setup.sources.len(),
            actual: setup.exact.len(),
        });
    }
    if seeds.is_empty() {
        return Err(Error::param("seeds", "at least one seed is required"));
    }
    let lambda_star = analytic_dual_min(&setup.exact, setup.threshold)
        .lambda()
        .ok_or(Error::ProbablyInfeasible {
            cap: f64::INFINITY,
            iteration: 0,
        })?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &k in k_list {
        let mode = EstimationMode::MonteCarlo {
            rollouts: k,
            horizon: setup.horizon,
        };
        let mut errors = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let estimates = setup
                .sources
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let mut rng = stream(&[seed, domain::ROLLOUT, k as u64, i as u64]);
                    estimate_values(
                        e.view(),
                        setup.reward_weights,
                        setup.cost_weights,
                        setup.gamma,
                        &setup.state,
                        mode,
                        setup.env,
                        &mut rng,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let lambda_hat = estimate_dual(&PolicyValues::new(estimates)?, setup.threshold, &setup.dual)?;
            let abs_error = (lambda_hat - lambda_star).abs();
            errors.push(abs_error);
            rows.push(ConsistencyRow {
                k,
                seed,
                lambda_hat,
                lambda_star,
                abs_error,
            });
        }
        let (min, max) = errors
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        summary.push(ConsistencySummary {
            k,
            median: median(&mut errors),
            min,
            max,
        });
    }
    Ok(ConsistencyReport {
        lambda_star,
        rows,
        summary,
    })
}

/// Writes `K,seed,lambda_hat,lambda_star,abs_error`.
pub fn write_consistency_csv<W: Write>(rows: &[ConsistencyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<consistency csv>", e))?;
    Ok(())
}

pub fn save_consistency_csv(rows: &[ConsistencyRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_consistency_csv(rows, file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// The two-line instance: A = (1, margin -0.5), B = (0, margin +0.2), tau = 0.
    fn two_lines() -> PolicyValues {
        PolicyValues::from_pairs(&[(1.0, -0.5), (0.0, 0.2)]).unwrap()
    }

    /// Brute-force minimum over a uniform grid on [0, hi].
    fn grid_min(values: &PolicyValues, tau: f64, hi: f64, n: usize) -> (f64, f64) {
        (0..=n)
            .map(|k| hi * k as f64 / n as f64)
            .map(|l| (l, dual_function(values, tau, l)))
            .fold((0.0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b })
    }

    #[test]
    fn step_schedule_examples() {
        assert_eq!(step_schedule(1, 1000.0), 1000.0);
        assert_eq!(step_schedule(10, 1000.0), 100.0);
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut checkpoints = vec![];
        for t in 1..=1_000_000usize {
            let e = step_schedule(t, 1.0);
            s1 += e;
            s2 += e * e;
            if t.is_power_of_two() {
                checkpoints.push((s1, s2));
            }
        }
        // harmonic partial sums keep growing by ~ln 2 per doubling ...
        let last = checkpoints.len() - 1;
        assert!(checkpoints[last].0 - checkpoints[last - 1].0 > 0.69);
        // ... while squared steps approach pi^2 / 6
        assert!((s2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-5);
    }

    #[test]
    fn feasible_set_keeps_lambda_at_zero() {
        let v = PolicyValues::from_pairs(&[(1.0, 0.5), (2.0, 0.0)]).unwrap();
        let (_, l) = dual_update_step(0.0, &v, 0.0, 1.0, SubgradientRule::ConstraintMargin).unwrap();
        assert_eq!(l, 0.0);
        let cfg = DualConfig {
            iterations: 500,
            step_constant: 3.0,
            ..DualConfig::default()
        };
        assert_eq!(estimate_dual(&v, 0.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn update_step_examples() {
        let v = two_lines();
        assert_eq!(
            dual_update_step(0.0, &v, 0.0, 1.0, SubgradientRule::ConstraintMargin).unwrap(),
            (0, 0.5)
        );
        let (i, l) = dual_update_step(5.0, &v, 0.0, 1.0, SubgradientRule::ConstraintMargin).unwrap();
        assert_eq!(i, 1);
        assert!((l - 4.8).abs() < 1e-15);
        // printed rule steps along V_r - tau instead
        let (i, l) = dual_update_step(5.0, &v, 0.0, 1.0, SubgradientRule::PrintedRewardMargin).unwrap();
        assert_eq!((i, l), (1, 5.0));
    }

    #[test]
    fn update_step_errors() {
        let v = two_lines();
        assert!(dual_update_step(-1.0, &v, 0.0, 1.0, SubgradientRule::ConstraintMargin).is_err());
        assert!(dual_update_step(0.0, &v, 0.0, 0.0, SubgradientRule::ConstraintMargin).is_err());
        assert!(matches!(PolicyValues::new(vec![]), Err(Error::EmptyValues)));
    }

    #[test]
    fn two_line_instance_converges_to_ten_sevenths() {
        let v = two_lines();
        // oracle: fine grid search
        let (grid_l, grid_d) = grid_min(&v, 0.0, 3.0, 3_000_000);
        assert!((grid_l - 10.0 / 7.0).abs() < 2e-6);
        assert!((grid_d - 2.0 / 7.0).abs() < 2e-6);

        let cfg = DualConfig {
            iterations: 100_000,
            step_constant: 1.0,
            ..DualConfig::default()
        };
        let l = estimate_dual(&v, 0.0, &cfg).unwrap();
        assert!((l - 10.0 / 7.0).abs() <= 1e-3, "{l}");

        match analytic_dual_min(&v, 0.0) {
            DualMinimum::Bounded { lambda, value } => {
                assert!((lambda - 10.0 / 7.0).abs() < 1e-12);
                assert!((value - 2.0 / 7.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn analytic_min_edge_cases() {
        let v = PolicyValues::from_pairs(&[(1.0, 0.5), (3.0, 0.1), (-2.0, 4.0)]).unwrap();
        assert_eq!(
            analytic_dual_min(&v, 0.0),
            DualMinimum::Bounded { lambda: 0.0, value: 3.0 }
        );
        let single = PolicyValues::from_pairs(&[(1.0, -0.3)]).unwrap();
        assert_eq!(analytic_dual_min(&single, 0.0), DualMinimum::Unbounded);
    }

    #[test]
    fn divergence_guard_flags_infeasible_source_set() {
        let single = PolicyValues::from_pairs(&[(1.0, -0.3)]).unwrap();
        let cfg = DualConfig {
            iterations: 100_000,
            step_constant: 10.0,
            divergence_cap: 20.0,
            ..DualConfig::default()
        };
        assert!(matches!(
            estimate_dual(&single, 0.0, &cfg),
            Err(Error::ProbablyInfeasible { .. })
        ));
        // without the cap the iterate just keeps growing
        let loose = DualConfig {
            divergence_cap: 1e12,
            ..cfg
        };
        let l = estimate_dual(&single, 0.0, &loose).unwrap();
        assert!(l > 30.0, "{l}");
    }

    #[test]
    fn config_validation() {
        let cfg = DualConfig {
            iterations: 0,
            ..DualConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = DualConfig {
            mode: EstimationMode::MonteCarlo { rollouts: 0, horizon: 10 },
            ..DualConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<(f64, f64)>, f64)> {
        (proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..9), -5.0..5.0f64)
    }

    proptest! {
        #[test]
        fn projection_keeps_lambda_nonnegative(
            (pairs, tau) in instance(), lambda in 0.0..10.0f64, eta in 1e-3..100.0f64,
        ) {
            let v = PolicyValues::from_pairs(&pairs).unwrap();
            for rule in [SubgradientRule::ConstraintMargin, SubgradientRule::PrintedRewardMargin] {
                let (i, l) = dual_update_step(lambda, &v, tau, eta, rule).unwrap();
                prop_assert!(l >= 0.0);
                prop_assert!(i < pairs.len());
            }
        }

        #[test]
        fn analytic_min_matches_pairwise_candidates((pairs, tau) in instance()) {
            // independent route: evaluate d at 0 and at every pairwise crossing
            let v = PolicyValues::from_pairs(&pairs).unwrap();
            let feasible = pairs.iter().any(|&(_, c)| c - tau >= 0.0);
            match analytic_dual_min(&v, tau) {
                DualMinimum::Unbounded => prop_assert!(!feasible),
                DualMinimum::Bounded { lambda, value } => {
                    prop_assert!(feasible);
                    prop_assert!(lambda >= 0.0);
                    let mut cands = vec![0.0];
                    for (i, &(a1, c1)) in pairs.iter().enumerate() {
                        for &(a2, c2) in &pairs[i + 1..] {
                            let (b1, b2) = (c1 - tau, c2 - tau);
                            if b1 != b2 {
                                let x = (a2 - a1) / (b1 - b2);
                                if x > 0.0 { cands.push(x); }
                            }
                        }
                    }
                    let best = cands.iter().map(|&l| dual_function(&v, tau, l)).fold(f64::INFINITY, f64::min);
                    prop_assert!((value - best).abs() <= 1e-9 * (1.0 + best.abs()), "{value} vs {best}");
                }
            }
        }

        #[test]
        fn estimate_is_permutation_invariant((pairs, tau) in instance(), shift in 0usize..8) {
            let v = PolicyValues::from_pairs(&pairs).unwrap();
            let mut rotated = pairs.clone();
            rotated.rotate_left(shift % pairs.len());
            let w = PolicyValues::from_pairs(&rotated).unwrap();
            let cfg = DualConfig { iterations: 2000, step_constant: 1.0, divergence_cap: 1e12, ..DualConfig::default() };
            let a = estimate_dual(&v, tau, &cfg).unwrap();
            let b = estimate_dual(&w, tau, &cfg).unwrap();
            // ties among lines are measure-zero for continuous draws
            prop_assert_eq!(a, b);
        }
    }
}
