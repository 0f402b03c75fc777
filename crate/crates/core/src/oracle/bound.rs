use crate::algebra::l2_norm;
use crate::error::{Error, Result};

/// Weights and optimal multiplier of one task, as they enter the transfer
/// bound.
#[derive(Clone, Copy, Debug)]
pub struct BoundTask<'a> {
    pub reward_weights: &'a [f64],
    pub cost_weights: &'a [f64],
    pub lambda_star: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    /// Uniform error of the source action values.
    pub epsilon: f64,
    pub tau: f64,
    pub gamma: f64,
    /// Largest L2 norm of a feature vector.
    pub phi_max: f64,
}

/// Upper bound on `Q_{j,lambda_j*}^{pi_j*}(s,a) - Q_{j,lambda~_j}^{pi}(s,a)` for
/// the Lagrangian GPI policy `pi` built from `sources`:
///
/// `min_i 2/(1-gamma) (phi_max |w_rj - w_ri| + phi_max |l_j* w_cj - l_i* w_ci|
///  + |l_j* - l~_j| + eps (1 + l~_j)) + 2 |tau| |l_j* - l_i*|`.
///
/// The last term uses `|tau|`; it comes from bounding
/// `(1-gamma) tau (l_j* - l_i*)` in absolute value.
pub fn gpi_bound(target: BoundTask<'_>, lambda_tilde: f64, sources: &[BoundTask<'_>], p: BoundParams) -> Result<f64> {
    if sources.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    for (name, v) in [
        ("lambda_tilde", lambda_tilde),
        ("epsilon", p.epsilon),
        ("phi_max", p.phi_max),
        ("lambda_star", target.lambda_star),
    ] {
        if !(v >= 0.0) {
            return Err(Error::param(name, format!("{v} must be >= 0")));
        }
    }
    if !(0.0..1.0).contains(&p.gamma) {
        return Err(Error::param("gamma", format!("{} not in [0, 1)", p.gamma)));
    }
    let d = target.reward_weights.len();
    let scale = 2.0 / (1.0 - p.gamma);
    let mut best = f64::INFINITY;
    for src in sources {
        if !(src.lambda_star >= 0.0) {
            return Err(Error::param("lambda_star", format!("{} must be >= 0", src.lambda_star)));
        }
        for w in [src.reward_weights, src.cost_weights, target.cost_weights] {
            if w.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: w.len(),
                });
            }
        }
        let dr: Vec<f64> = target.reward_weights.iter().zip(src.reward_weights).map(|(a, b)| a - b).collect();
        let dc: Vec<f64> = target
            .cost_weights
            .iter()
            .zip(src.cost_weights)
            .map(|(a, b)| target.lambda_star * a - src.lambda_star * b)
            .collect();
        let inner = p.phi_max * l2_norm(&dr)
            + p.phi_max * l2_norm(&dc)
            + (target.lambda_star - lambda_tilde).abs()
            + p.epsilon * (1.0 + lambda_tilde);
        let b = scale * inner + 2.0 * p.tau.abs() * (target.lambda_star - src.lambda_star).abs();
        best = best.min(b);
    }
    Ok(best)
}
