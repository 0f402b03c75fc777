use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::algebra::{dot, FeatureVector, TaskSpec};
use crate::env::{Environment, Outcome};
use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// A finite CMDP with features on transitions: `phi(s, a, s')`, kernel
/// `P(s' | s, a)` and one task. Continuing; there are no terminal states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CmdpDoc", into = "CmdpDoc")]
pub struct TabularCmdp {
    n_states: usize,
    n_actions: usize,
    dim: usize,
    /// `kernel[(s * A + a) * S + s']`
    kernel: Vec<f64>,
    /// `phi[((s * A + a) * S + s') * d ..][..d]`
    phi: Vec<f64>,
    task: TaskSpec,
    start: usize,
}

impl TabularCmdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        kernel: Vec<f64>,
        phi: Vec<f64>,
        task: TaskSpec,
        start: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::MalformedMdp("needs at least one state and one action".into()));
        }
        let dim = task.dim();
        let pairs = n_states * n_actions;
        if kernel.len() != pairs * n_states {
            return Err(Error::MalformedMdp(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                pairs * n_states
            )));
        }
        if phi.len() != pairs * n_states * dim {
            return Err(Error::MalformedMdp(format!(
                "feature table has {} entries, expected {}",
                phi.len(),
                pairs * n_states * dim
            )));
        }
        if start >= n_states {
            return Err(Error::MalformedMdp(format!("start state {start} out of range")));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature table"));
        }
        for (i, row) in kernel.chunks(n_states).enumerate() {
            let (state, action) = (i / n_actions, i % n_actions);
            if let Some(p) = row.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
                return Err(Error::NonStochasticKernel {
                    state,
                    action,
                    reason: format!("entry {p}"),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NonStochasticKernel {
                    state,
                    action,
                    reason: format!("sums to {sum}"),
                });
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            dim,
            kernel,
            phi,
            task,
            start,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn gamma(&self) -> f64 {
        self.task.discount()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn with_task(&self, task: TaskSpec) -> Result<Self> {
        task.check_dim(self.dim)?;
        Ok(Self {
            task,
            ..self.clone()
        })
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        self.with_task(self.task.with_threshold(threshold)?)
    }

    pub fn with_start(&self, start: usize) -> Result<Self> {
        if start >= self.n_states {
            return Err(Error::MalformedMdp(format!("start state {start} out of range")));
        }
        Ok(Self {
            start,
            ..self.clone()
        })
    }

    #[inline]
    pub fn kernel_row(&self, s: usize, a: usize) -> &[f64] {
        let i = (s * self.n_actions + a) * self.n_states;
        &self.kernel[i..i + self.n_states]
    }

    #[inline]
    pub fn phi(&self, s: usize, a: usize, s_next: usize) -> &[f64] {
        let i = ((s * self.n_actions + a) * self.n_states + s_next) * self.dim;
        &self.phi[i..i + self.dim]
    }

    /// `E[phi(s, a, s')]` under the kernel.
    pub fn expected_phi(&self, s: usize, a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (s2, &p) in self.kernel_row(s, a).iter().enumerate() {
            if p > 0.0 {
                for (o, &f) in out.iter_mut().zip(self.phi(s, a, s2)) {
                    *o += p * f;
                }
            }
        }
        out
    }

    /// Expected one-step signal `E[phi(s, a, s')] . w` for every `(s, a)`,
    /// indexed `s * A + a`.
    pub fn expected_signal(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.task.check_dim(w.len())?;
        Ok((0..self.n_states * self.n_actions)
            .map(|i| dot(&self.expected_phi(i / self.n_actions, i % self.n_actions), w))
            .collect())
    }

    /// Largest L2 norm of a feature vector on a transition of positive
    /// probability.
    pub fn phi_max(&self) -> f64 {
        let mut m: f64 = 0.0;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                for (s2, &p) in self.kernel_row(s, a).iter().enumerate() {
                    if p > 0.0 {
                        m = m.max(dot(self.phi(s, a, s2), self.phi(s, a, s2)).sqrt());
                    }
                }
            }
        }
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedMdp(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Deterministic `side x side` grid with four moves (up, down, left,
    /// right); moves off the grid stay put. Two features: entering the
    /// bottom-right corner and entering the left column. Starts top-left.
    pub fn deterministic_grid(side: usize, task: TaskSpec) -> Result<Self> {
        if side == 0 {
            return Err(Error::param("side", "must be positive"));
        }
        task.check_dim(2)?;
        let n = side * side;
        let mut kernel = vec![0.0; n * 4 * n];
        let mut phi = vec![0.0; n * 4 * n * 2];
        for s in 0..n {
            let (r, c) = (s / side, s % side);
            for a in 0..4 {
                let (r2, c2) = match a {
                    0 => (r.saturating_sub(1), c),
                    1 => ((r + 1).min(side - 1), c),
                    2 => (r, c.saturating_sub(1)),
                    _ => (r, (c + 1).min(side - 1)),
                };
                let s2 = r2 * side + c2;
                kernel[(s * 4 + a) * n + s2] = 1.0;
                let f = ((s * 4 + a) * n + s2) * 2;
                phi[f] = f64::from(s2 == n - 1);
                phi[f + 1] = f64::from(c2 == 0);
            }
        }
        Self::new(n, 4, kernel, phi, task, 0)
    }
}

impl Environment for TabularCmdp {
    type State = usize;

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn initial_state(&self) -> usize {
        self.start
    }

    fn sample<R: Rng + ?Sized>(&self, state: &usize, action: usize, rng: &mut R) -> Result<Outcome<usize>> {
        if action >= self.n_actions {
            return Err(Error::InvalidAction {
                action,
                n_actions: self.n_actions,
            });
        }
        if *state >= self.n_states {
            return Err(Error::MalformedMdp(format!("state {state} out of range")));
        }
        let row = self.kernel_row(*state, action);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        // last state with positive mass absorbs rounding at the top of the row
        let mut next = row.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for (s2, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc && p > 0.0 {
                next = s2;
                break;
            }
        }
        Ok(Outcome {
            next,
            phi: FeatureVector::new(self.phi(*state, action, next).to_vec())?,
            done: false,
            events: Vec::new(),
        })
    }
}

const CMDP_FORMAT: &str = "sftcop-tabular-cmdp";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CmdpDoc {
    format: String,
    version: u32,
    n_states: usize,
    n_actions: usize,
    start_state: usize,
    task: TaskSpec,
    /// `kernel[s][a][s']`
    kernel: Vec<Vec<Vec<f64>>>,
    /// `phi[s][a][s']` is a feature vector
    phi: Vec<Vec<Vec<Vec<f64>>>>,
}

impl From<TabularCmdp> for CmdpDoc {
    fn from(m: TabularCmdp) -> Self {
        let (n, k) = (m.n_states, m.n_actions);
        CmdpDoc {
            format: CMDP_FORMAT.into(),
            version: 1,
            n_states: n,
            n_actions: k,
            start_state: m.start,
            kernel: (0..n)
                .map(|s| (0..k).map(|a| m.kernel_row(s, a).to_vec()).collect())
                .collect(),
            phi: (0..n)
                .map(|s| {
                    (0..k)
                        .map(|a| (0..n).map(|s2| m.phi(s, a, s2).to_vec()).collect())
                        .collect()
                })
                .collect(),
            task: m.task,
        }
    }
}

impl TryFrom<CmdpDoc> for TabularCmdp {
    type Error = Error;

    fn try_from(d: CmdpDoc) -> Result<Self> {
        if d.format != CMDP_FORMAT || d.version != 1 {
            return Err(Error::MalformedMdp(format!("unsupported document {} v{}", d.format, d.version)));
        }
        let shape_err = |what: &str| Error::MalformedMdp(format!("{what} does not match n_states x n_actions"));
        if d.kernel.len() != d.n_states || d.kernel.iter().any(|r| r.len() != d.n_actions) {
            return Err(shape_err("kernel"));
        }
        if d.phi.len() != d.n_states
            || d.phi
                .iter()
                .any(|r| r.len() != d.n_actions || r.iter().any(|x| x.len() != d.n_states))
        {
            return Err(shape_err("phi"));
        }
        let dim = d.task.dim();
        let kernel: Vec<f64> = d.kernel.into_iter().flatten().flatten().collect();
        let mut phi = Vec::with_capacity(kernel.len() * dim);
        for v in d.phi.into_iter().flatten().flatten() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            phi.extend(v);
        }
        TabularCmdp::new(d.n_states, d.n_actions, kernel, phi, d.task, d.start_state)
    }
}

/// Shape of a random instance.
///
/// Kernel rows are Dirichlet(`concentration`, ..., `concentration`) draws,
/// feature entries are U[0, 1], reward weights U[-1, 1] and utility weights
/// U[-1, 1] / d, so every one-step utility lies in [-1, 1]. The threshold is
/// left at zero; see [`crate::oracle::random_feasible_cmdp`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomCmdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub dim: usize,
    pub gamma: f64,
    pub concentration: f64,
}

impl Default for RandomCmdpSpec {
    fn default() -> Self {
        Self {
            n_states: 6,
            n_actions: 3,
            dim: 3,
            gamma: 0.9,
            concentration: 1.0,
        }
    }
}

pub fn random_cmdp<R: Rng + ?Sized>(spec: &RandomCmdpSpec, rng: &mut R) -> Result<TabularCmdp> {
    let gamma_dist =
        Gamma::new(spec.concentration, 1.0).map_err(|e| Error::param("concentration", e.to_string()))?;
    let (n, k, d) = (spec.n_states, spec.n_actions, spec.dim);
    if d == 0 {
        return Err(Error::param("dim", "must be positive"));
    }
    let mut kernel = Vec::with_capacity(n * k * n);
    for _ in 0..n * k {
        // normalised Gamma draws are Dirichlet; rand_distr's Dirichlet needs a
        // compile-time length
        let mut row: Vec<f64> = (0..n).map(|_| gamma_dist.sample(rng)).collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|p| *p /= total);
        } else {
            row.iter_mut().for_each(|p| *p = 1.0 / n as f64);
        }
        // push the rounding residue onto the largest entry
        let residue = 1.0 - row.iter().sum::<f64>();
        let imax = (0..n).fold(0, |b, i| if row[i] > row[b] { i } else { b });
        row[imax] += residue;
        kernel.extend(row);
    }
    let phi: Vec<f64> = (0..n * k * n * d).map(|_| rng.random::<f64>()).collect();
    let w_r: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let w_c: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0) / d as f64).collect();
    let task = TaskSpec::new("random", w_r, w_c, 0.0, spec.gamma)?;
    TabularCmdp::new(n, k, kernel, phi, task, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn single_state() -> TabularCmdp {
        let task = TaskSpec::new("one", vec![1.0, 0.0], vec![0.0, 1.0], 1.0, 0.5).unwrap();
        TabularCmdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0, 0.0, 1.0], task, 0).unwrap()
    }

    #[test]
    fn rejects_bad_kernels() {
        let task = TaskSpec::new("t", vec![1.0], vec![0.0], 0.0, 0.5).unwrap();
        let e = TabularCmdp::new(2, 1, vec![0.5, 0.6, 1.0, 0.0], vec![0.0; 4], task.clone(), 0);
        assert!(matches!(e, Err(Error::NonStochasticKernel { state: 0, .. })));
        let e = TabularCmdp::new(2, 1, vec![1.0, 0.0, 1.5, -0.5], vec![0.0; 4], task.clone(), 0);
        assert!(matches!(e, Err(Error::NonStochasticKernel { state: 1, .. })));
        assert!(TabularCmdp::new(2, 1, vec![1.0, 0.0], vec![0.0; 4], task.clone(), 0).is_err());
        assert!(TabularCmdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 4], task, 2).is_err());
    }

    #[test]
    fn random_instances_are_valid_and_reproducible() {
        let spec = RandomCmdpSpec {
            n_states: 20,
            n_actions: 4,
            dim: 4,
            ..Default::default()
        };
        let a = random_cmdp(&spec, &mut stream(&[3])).unwrap();
        let b = random_cmdp(&spec, &mut stream(&[3])).unwrap();
        assert_eq!(a, b);
        for s in 0..20 {
            for act in 0..4 {
                let c = dot(&a.expected_phi(s, act), a.task().cost_weights());
                assert!(c.abs() <= 1.0);
            }
        }
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let m = random_cmdp(&RandomCmdpSpec::default(), &mut stream(&[9])).unwrap();
        let text = m.to_json().unwrap();
        assert_eq!(TabularCmdp::from_json(&text).unwrap(), m);
        let one = single_state().to_json().unwrap();
        let extra = one.replacen("\"version\": 1", "\"version\": 1, \"colour\": 3", 1);
        assert!(TabularCmdp::from_json(&extra).is_err());
        let bent = one.replacen("\"start_state\": 0", "\"start_state\": 4", 1);
        assert!(TabularCmdp::from_json(&bent).is_err());
    }

    #[test]
    fn sampling_follows_the_kernel() {
        let task = TaskSpec::new("t", vec![1.0], vec![0.0], 0.0, 0.5).unwrap();
        let m = TabularCmdp::new(2, 1, vec![0.25, 0.75, 0.0, 1.0], vec![0.0, 1.0, 0.0, 1.0], task, 0).unwrap();
        let mut rng = stream(&[5]);
        let n = 100_000;
        let ones = (0..n).filter(|_| m.sample(&0, 0, &mut rng).unwrap().next == 1).count();
        assert!((ones as f64 / n as f64 - 0.75).abs() < 0.01);
        assert!(m.sample(&0, 1, &mut rng).is_err());
    }

    #[test]
    fn grid_moves_and_features() {
        let task = TaskSpec::new("g", vec![1.0, 0.0], vec![0.0, 1.0], 0.0, 0.9).unwrap();
        let g = TabularCmdp::deterministic_grid(3, task).unwrap();
        assert_eq!(g.kernel_row(0, 0)[0], 1.0);
        assert_eq!(g.kernel_row(0, 3)[1], 1.0);
        assert_eq!(g.phi(5, 1, 8), &[1.0, 0.0]);
        assert_eq!(g.phi(1, 2, 0), &[0.0, 1.0]);
        assert_eq!(g.phi_max(), 1.0);
    }
}
