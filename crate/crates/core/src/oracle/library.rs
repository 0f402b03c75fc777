use crate::dual::{PolicyValue, PolicyValues};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::sf::PolicyEntry;

use super::cmdp::{random_cmdp, RandomCmdpSpec, TabularCmdp};
use super::exact::{dp_successor_features, exact_policy_evaluation, lagrangian_solution, TabularPolicy};

/// Source policies with exact successor features, together with their exact
/// start-state values on the instance's own task.
#[derive(Clone, Debug)]
pub struct SourceLibrary {
    pub cmdp: TabularCmdp,
    pub entries: Vec<PolicyEntry<usize>>,
    pub exact: PolicyValues,
}

/// The deterministic policy an entry follows when acting greedily.
pub fn greedy_policy(entry: &PolicyEntry<usize>, n_states: usize) -> Result<TabularPolicy> {
    let view = entry.view();
    let actions: Vec<usize> = (0..n_states).map(|s| view.greedy_action(&s)).collect();
    TabularPolicy::deterministic(&actions, entry.sf.n_actions())
}

/// One entry per multiplier: the Lagrangian-optimal policy of `m`'s task at
/// that multiplier, with successor features from dynamic programming.
/// Values are those of the entries' greedy policies, so they agree with
/// rollouts even where the solver broke a tie differently.
pub fn source_library(m: &TabularCmdp, multipliers: &[f64]) -> Result<SourceLibrary> {
    if multipliers.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let task = m.task();
    let mut entries = Vec::with_capacity(multipliers.len());
    let mut values = Vec::with_capacity(multipliers.len());
    for (i, &lambda) in multipliers.iter().enumerate() {
        let policy = lagrangian_solution(m, lambda)?.policy(m.n_actions());
        let sf = dp_successor_features(&policy, m, 1e-12)?;
        let entry = PolicyEntry::new(
            sf,
            lambda,
            task.reward_weights().to_vec(),
            task.cost_weights().to_vec(),
            format!("source-{i}"),
        )?;
        let greedy = greedy_policy(&entry, m.n_states())?;
        let v_r = exact_policy_evaluation(&greedy, m, task.reward_weights())?[m.start()];
        let v_c = exact_policy_evaluation(&greedy, m, task.cost_weights())?[m.start()];
        values.push(PolicyValue::new(v_r, v_c));
        entries.push(entry);
    }
    Ok(SourceLibrary {
        cmdp: m.clone(),
        entries,
        exact: PolicyValues::new(values)?,
    })
}

/// Multipliers of the three consistency sources.
pub const CONSISTENCY_MULTIPLIERS: [f64; 3] = [0.0, 1.0, 10.0];

/// A random 6-state instance with three sources whose dual minimum is
/// positive: the threshold sits halfway between the utilities of the
/// unconstrained source and the most cautious one. Instances where the two
/// utilities nearly coincide are skipped.
pub fn consistency_instance(seed: u64) -> Result<SourceLibrary> {
    let spec = RandomCmdpSpec::default();
    for attempt in 0..1000u64 {
        let mut rng = stream(&[seed, domain::INSTANCE, attempt]);
        let m = random_cmdp(&spec, &mut rng)?;
        let lib = source_library(&m, &CONSISTENCY_MULTIPLIERS)?;
        let v = lib.exact.as_slice();
        let (lo, hi) = (v[0].constraint, v[2].constraint);
        if hi - lo > 0.5 && v[0].reward - v[2].reward > 0.5 {
            let m = m.with_threshold(0.5 * (lo + hi))?;
            return Ok(SourceLibrary { cmdp: m, ..lib });
        }
    }
    Err(Error::param("seed", "no suitable consistency instance found"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::analytic_dual_min;

    #[test]
    fn consistency_instance_has_interior_dual_minimum() {
        let lib = consistency_instance(0).unwrap();
        let l = analytic_dual_min(&lib.exact, lib.cmdp.task().threshold()).lambda().unwrap();
        assert!(l > 0.0, "{l}");
        assert_eq!(lib.entries.len(), 3);
    }

    #[test]
    fn library_values_match_dot_products() {
        let lib = consistency_instance(1).unwrap();
        let s0 = lib.cmdp.start();
        for (e, v) in lib.entries.iter().zip(lib.exact.as_slice()) {
            let psi = e.sf.get(&s0, e.view().greedy_action(&s0));
            let r: f64 = psi.iter().zip(&e.reward_weights).map(|(p, w)| p * w).sum();
            assert!((r - v.reward).abs() < 1e-9);
        }
    }
}
