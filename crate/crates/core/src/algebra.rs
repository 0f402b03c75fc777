//! Feature vectors, task weights and the scalar algebra that turns successor
//! features into action values.
//!
//! Everything here is an immutable value once constructed, so it can be shared
//! freely between worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shared reward/cost feature `phi(s, a, s')`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Indicator vector with a one at `index`.
    pub fn unit(dim: usize, index: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn dot(&self, weights: &[f64]) -> Result<f64> {
        evaluate_q(&self.0, weights)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// One task of the family: linear reward and utility weights on the shared
/// features, a utility threshold and the discount.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaskSpecDoc")]
pub struct TaskSpec {
    pub task_id: String,
    reward_weights: Vec<f64>,
    cost_weights: Vec<f64>,
    threshold: f64,
    discount: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskSpecDoc {
    task_id: String,
    reward_weights: Vec<f64>,
    cost_weights: Vec<f64>,
    threshold: f64,
    discount: f64,
}

impl TryFrom<TaskSpecDoc> for TaskSpec {
    type Error = Error;

    fn try_from(d: TaskSpecDoc) -> Result<Self> {
        Self::new(d.task_id, d.reward_weights, d.cost_weights, d.threshold, d.discount)
    }
}

impl TaskSpec {
    pub fn new(
        task_id: impl Into<String>,
        reward_weights: Vec<f64>,
        cost_weights: Vec<f64>,
        threshold: f64,
        discount: f64,
    ) -> Result<Self> {
        if reward_weights.len() != cost_weights.len() {
            return Err(Error::DimensionMismatch {
                expected: reward_weights.len(),
                actual: cost_weights.len(),
            });
        }
        if reward_weights
            .iter()
            .chain(&cost_weights)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("task weights"));
        }
        if !threshold.is_finite() {
            return Err(Error::NonFinite("threshold"));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::param("discount", format!("{discount} not in [0, 1)")));
        }
        Ok(Self {
            task_id: task_id.into(),
            reward_weights,
            cost_weights,
            threshold,
            discount,
        })
    }

    pub fn dim(&self) -> usize {
        self.reward_weights.len()
    }

    pub fn reward_weights(&self) -> &[f64] {
        &self.reward_weights
    }

    pub fn cost_weights(&self) -> &[f64] {
        &self.cost_weights
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Same weights and discount with a different threshold.
    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        Self::new(
            self.task_id.clone(),
            self.reward_weights.clone(),
            self.cost_weights.clone(),
            threshold,
            self.discount,
        )
    }

    /// Checks that `dim` matches the weight vectors.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: self.dim(),
            });
        }
        Ok(())
    }

    /// `(r, c)` for one feature vector.
    pub fn reward_and_cost(&self, phi: &FeatureVector) -> Result<(f64, f64)> {
        Ok((phi.dot(&self.reward_weights)?, phi.dot(&self.cost_weights)?))
    }
}

/// Multiplier and threshold of the Lagrangian action value
/// `Q_r + lambda (Q_c - tau)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedQParams {
    lambda: f64,
    threshold: f64,
}

impl CombinedQParams {
    pub fn new(lambda: f64, threshold: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::param("lambda", format!("{lambda} must be >= 0")));
        }
        Ok(Self { lambda, threshold })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Inner product of a successor-feature row with a weight vector.
pub fn evaluate_q(sf_row: &[f64], weights: &[f64]) -> Result<f64> {
    if sf_row.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: sf_row.len(),
            actual: weights.len(),
        });
    }
    Ok(dot(sf_row, weights))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn combined_q(q_r: f64, q_c: f64, params: CombinedQParams) -> f64 {
    q_r + params.lambda * (q_c - params.threshold)
}

/// Per-step reward whose discounted sum equals `V_r + lambda (V_c - tau)`.
pub fn lagrangian_reward(r: f64, c: f64, lambda: f64, tau: f64, gamma: f64) -> f64 {
    r + lambda * (c - (1.0 - gamma) * tau)
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluate_q_inner_product() {
        assert_eq!(evaluate_q(&[1.0, 0.0, 2.0], &[0.5, -1.0, 0.25]).unwrap(), 1.0);
        assert_eq!(evaluate_q(&[0.0; 3], &[3.0, -7.0, 1e9]).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_q_rejects_dimension_mismatch() {
        assert!(matches!(
            evaluate_q(&[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn combined_q_examples() {
        let p = CombinedQParams::new(0.5, 1.0).unwrap();
        assert_eq!(combined_q(1.0, 2.0, p), 1.5);
        let zero = CombinedQParams::new(0.0, 3.0).unwrap();
        assert_eq!(combined_q(1.25, -8.0, zero), 1.25);
        let p = CombinedQParams::new(7.0, 0.3).unwrap();
        assert_eq!(combined_q(-2.0, 0.3, p), -2.0);
        assert!(CombinedQParams::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn lagrangian_reward_examples() {
        assert_eq!(lagrangian_reward(1.0, 0.5, 2.0, 1.0, 0.5), 1.0);
        assert_eq!(lagrangian_reward(0.3, -4.0, 0.0, 2.0, 0.9), 0.3);
        assert_eq!(lagrangian_reward(0.0, 1.0, 1.0, 0.0, 0.9), 1.0);
    }

    #[test]
    fn task_spec_validation() {
        assert!(TaskSpec::new("t", vec![1.0, 2.0], vec![0.0], 0.0, 0.9).is_err());
        assert!(TaskSpec::new("t", vec![1.0], vec![0.0], 0.0, 1.0).is_err());
        assert!(TaskSpec::new("t", vec![1.0], vec![0.0], 0.0, -0.1).is_err());
        assert!(TaskSpec::new("t", vec![1.0], vec![f64::NAN], 0.0, 0.5).is_err());
        assert!(TaskSpec::new("t", vec![1.0], vec![0.0], 0.0, 0.0).is_ok());
    }

    #[test]
    fn feature_vector_rejects_non_finite() {
        assert!(FeatureVector::new(vec![0.0, f64::INFINITY]).is_err());
    }

    proptest! {
        #[test]
        fn combined_q_is_affine_in_lambda(
            q_r in -10.0..10.0f64, q_c in -10.0..10.0f64, tau in -5.0..5.0f64,
            l0 in 0.0..5.0f64, dl in 0.01..5.0f64,
        ) {
            let at = |l: f64| combined_q(q_r, q_c, CombinedQParams::new(l, tau).unwrap());
            let (a, b, c) = (at(l0), at(l0 + dl), at(l0 + 2.0 * dl));
            // collinear: equal successive differences, slope q_c - tau
            prop_assert!(((b - a) - (c - b)).abs() <= 1e-9 * (1.0 + a.abs() + c.abs()));
            prop_assert!(((b - a) / dl - (q_c - tau)).abs() <= 1e-8 * (1.0 + (q_c - tau).abs() + a.abs() / dl));
        }

        #[test]
        fn discounted_lagrangian_rewards_match_combined_q(
            steps in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..400),
            lambda in 0.0..4.0f64, tau in -3.0..3.0f64, gamma in 0.0..0.95f64,
        ) {
            // Trajectory of length T followed by a zero-reward absorbing tail:
            // the per-step threshold offset keeps accruing there, which is the
            // gamma^T truncation term.
            let t = steps.len() as i32;
            let (mut g, mut ret_r, mut ret_c, mut ret_l) = (1.0, 0.0, 0.0, 0.0);
            for &(r, c) in &steps {
                ret_r += g * r;
                ret_c += g * c;
                ret_l += g * lagrangian_reward(r, c, lambda, tau, gamma);
                g *= gamma;
            }
            let q = combined_q(ret_r, ret_c, CombinedQParams::new(lambda, tau).unwrap());
            let bound = gamma.powi(t) * lambda * tau.abs() + 1e-9;
            prop_assert!((ret_l - q).abs() <= bound, "{ret_l} vs {q}, bound {bound}");
        }
    }
}
