use std::collections::HashMap;
use std::hash::Hash;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::algebra::{dot, evaluate_q};
use crate::error::{Error, Result};

/// Tabular successor features `psi(s, a)`. Rows that were never written read
/// as zero, so the table is total over the state space.
#[derive(Clone, Debug, PartialEq)]
pub struct SfTable<S: Eq + Hash> {
    n_actions: usize,
    dim: usize,
    rows: HashMap<S, Vec<f64>>,
    zeros: Vec<f64>,
}

impl<S: Clone + Eq + Hash> SfTable<S> {
    pub fn new(n_actions: usize, dim: usize) -> Self {
        Self {
            n_actions,
            dim,
            rows: HashMap::new(),
            zeros: vec![0.0; dim],
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of states with a stored row.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    #[inline]
    pub fn get(&self, s: &S, a: usize) -> &[f64] {
        match self.rows.get(s) {
            Some(row) => &row[a * self.dim..(a + 1) * self.dim],
            None => &self.zeros,
        }
    }

    /// All actions of one state, concatenated, or `None` if never written.
    pub(crate) fn state_row(&self, s: &S) -> Option<&[f64]> {
        self.rows.get(s).map(Vec::as_slice)
    }

    pub fn get_mut(&mut self, s: &S, a: usize) -> &mut [f64] {
        let width = self.n_actions * self.dim;
        let row = self.rows.entry(s.clone()).or_insert_with(|| vec![0.0; width]);
        &mut row[a * self.dim..(a + 1) * self.dim]
    }

    /// Stores a row for `s`, filled by `fill`, unless one exists.
    pub fn ensure_row(&mut self, s: &S, mut fill: impl FnMut() -> f64) {
        if !self.rows.contains_key(s) {
            let row = (0..self.n_actions * self.dim).map(|_| fill()).collect();
            self.rows.insert(s.clone(), row);
        }
    }

    pub fn set(&mut self, s: &S, a: usize, values: &[f64]) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: values.len(),
            });
        }
        self.get_mut(s, a).copy_from_slice(values);
        Ok(())
    }

    /// `psi(s, a) . w`
    pub fn q(&self, s: &S, a: usize, w: &[f64]) -> Result<f64> {
        evaluate_q(self.get(s, a), w)
    }

    #[inline]
    pub(crate) fn q_unchecked(&self, s: &S, a: usize, w: &[f64]) -> f64 {
        dot(self.get(s, a), w)
    }

    pub fn states(&self) -> impl Iterator<Item = &S> {
        self.rows.keys()
    }
}

/// One trained source policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyEntry<S: Eq + Hash> {
    pub sf: SfTable<S>,
    training_dual: f64,
    pub reward_weights: Vec<f64>,
    pub cost_weights: Vec<f64>,
    pub source_task_id: String,
}

impl<S: Clone + Eq + Hash> PolicyEntry<S> {
    pub fn new(
        sf: SfTable<S>,
        training_dual: f64,
        reward_weights: Vec<f64>,
        cost_weights: Vec<f64>,
        source_task_id: impl Into<String>,
    ) -> Result<Self> {
        if !(training_dual >= 0.0) {
            return Err(Error::param("training_dual", format!("{training_dual} must be >= 0")));
        }
        for w in [&reward_weights, &cost_weights] {
            if w.len() != sf.dim() {
                return Err(Error::DimensionMismatch {
                    expected: sf.dim(),
                    actual: w.len(),
                });
            }
        }
        Ok(Self {
            sf,
            training_dual,
            reward_weights,
            cost_weights,
            source_task_id: source_task_id.into(),
        })
    }

    pub fn training_dual(&self) -> f64 {
        self.training_dual
    }

    pub fn view(&self) -> PolicyView<'_, S> {
        PolicyView {
            sf: &self.sf,
            reward_weights: &self.reward_weights,
            cost_weights: &self.cost_weights,
            training_dual: self.training_dual,
        }
    }
}

/// Borrowed form of a policy entry; lets a policy still in training take part
/// in dual estimation.
#[derive(Debug)]
pub struct PolicyView<'a, S: Eq + Hash> {
    pub sf: &'a SfTable<S>,
    pub reward_weights: &'a [f64],
    pub cost_weights: &'a [f64],
    pub training_dual: f64,
}

impl<S: Eq + Hash> Clone for PolicyView<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<S: Eq + Hash> Copy for PolicyView<'_, S> {}

impl<S: Clone + Eq + Hash> PolicyView<'_, S> {
    /// Greedy action under the entry's own criterion
    /// `psi . (w_r + lambda_i w_c)`, lowest index on ties.
    pub fn greedy_action(&self, s: &S) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..self.sf.n_actions() {
            let psi = self.sf.get(s, a);
            let v = dot(psi, self.reward_weights) + self.training_dual * dot(psi, self.cost_weights);
            if v > best.1 {
                best = (a, v);
            }
        }
        best.0
    }
}

const CHECKPOINT_FORMAT: &str = "sftcop-policy-library";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc<S> {
    format: String,
    version: u32,
    entries: Vec<EntryDoc<S>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc<S> {
    source_task_id: String,
    training_dual: f64,
    n_actions: usize,
    dim: usize,
    reward_weights: Vec<f64>,
    cost_weights: Vec<f64>,
    rows: Vec<(S, Vec<f64>)>,
}

/// Serializes a policy library as versioned JSON. Rows are sorted by state and
/// floats are written in shortest round-trip form, so reading the document
/// back reproduces the tables exactly.
pub fn checkpoint_to_string<S>(entries: &[PolicyEntry<S>]) -> Result<String>
where
    S: Clone + Eq + Hash + Ord + Serialize,
{
    let entries = entries
        .iter()
        .map(|e| {
            let mut rows: Vec<(S, Vec<f64>)> =
                e.sf.rows.iter().map(|(s, v)| (s.clone(), v.clone())).collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            EntryDoc {
                source_task_id: e.source_task_id.clone(),
                training_dual: e.training_dual,
                n_actions: e.sf.n_actions,
                dim: e.sf.dim,
                reward_weights: e.reward_weights.clone(),
                cost_weights: e.cost_weights.clone(),
                rows,
            }
        })
        .collect();
    let doc = CheckpointDoc {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        entries,
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn checkpoint_from_str<S>(text: &str) -> Result<Vec<PolicyEntry<S>>>
where
    S: Clone + Eq + Hash + DeserializeOwned,
{
    let doc: CheckpointDoc<S> =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if doc.format != CHECKPOINT_FORMAT || doc.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint {} v{}",
            doc.format, doc.version
        )));
    }
    doc.entries
        .into_iter()
        .map(|e| {
            let mut sf = SfTable::new(e.n_actions, e.dim);
            for (s, row) in e.rows {
                if row.len() != e.n_actions * e.dim {
                    return Err(Error::Checkpoint(format!(
                        "row of length {} in a {}x{} table",
                        row.len(),
                        e.n_actions,
                        e.dim
                    )));
                }
                sf.rows.insert(s, row);
            }
            PolicyEntry::new(sf, e.training_dual, e.reward_weights, e.cost_weights, e.source_task_id)
        })
        .collect()
}

pub fn save_checkpoint<S>(entries: &[PolicyEntry<S>], path: impl AsRef<Path>) -> Result<()>
where
    S: Clone + Eq + Hash + Ord + Serialize,
{
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_string(entries)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<S>(path: impl AsRef<Path>) -> Result<Vec<PolicyEntry<S>>>
where
    S: Clone + Eq + Hash + DeserializeOwned,
{
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unwritten_rows_read_as_zero() {
        let mut t: SfTable<u32> = SfTable::new(2, 3);
        assert_eq!(t.get(&7, 1), &[0.0; 3]);
        t.set(&7, 1, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.get(&7, 0), &[0.0; 3]);
        assert_eq!(t.q(&7, 1, &[1.0, 1.0, 1.0]).unwrap(), 6.0);
        assert!(t.set(&7, 0, &[1.0]).is_err());
    }

    #[test]
    fn negative_training_dual_rejected() {
        let t: SfTable<u32> = SfTable::new(2, 1);
        assert!(PolicyEntry::new(t, -1.0, vec![0.0], vec![0.0], "x").is_err());
    }

    #[test]
    fn checkpoint_rejects_wrong_version() {
        let text = r#"{"format":"sftcop-policy-library","version":9,"entries":[]}"#;
        assert!(checkpoint_from_str::<u32>(text).is_err());
    }

    proptest! {
        #[test]
        fn checkpoint_round_trip_is_exact(
            rows in proptest::collection::btree_map(0u32..1000, proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 6), 0..40),
            dual in 0.0..1e6f64,
            w in proptest::collection::vec(-1e3..1e3f64, 3),
        ) {
            let mut sf = SfTable::new(2, 3);
            for (s, v) in &rows {
                sf.set(s, 0, &v[..3]).unwrap();
                sf.set(s, 1, &v[3..]).unwrap();
            }
            let e = PolicyEntry::new(sf, dual, w.clone(), w.iter().map(|x| -x).collect(), "task-3").unwrap();
            let text = checkpoint_to_string(&[e.clone(), e.clone()]).unwrap();
            let back = checkpoint_from_str::<u32>(&text).unwrap();
            prop_assert_eq!(back.len(), 2);
            prop_assert_eq!(&back[0], &e);
            prop_assert_eq!(checkpoint_to_string(&back).unwrap(), text);
        }
    }
}
