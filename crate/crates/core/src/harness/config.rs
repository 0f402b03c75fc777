use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::PdqlConfig;
use crate::dual::DualConfig;
use crate::error::{Error, Result};
use crate::gridworld::GridLayout;
use crate::sf::LearnerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SftCop,
    Sfql,
    Pdql,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SftCop => "sft_cop",
            Method::Sfql => "sfql",
            Method::Pdql => "pdql",
        }
    }
}

/// Learner settings that are not part of the run's shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerParams {
    pub alpha_sf: f64,
    pub alpha_w: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub dual_update_period: usize,
    pub init_from_previous: bool,
    pub init_noise: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        let d = LearnerConfig::default();
        Self {
            alpha_sf: d.alpha_sf,
            alpha_w: d.alpha_w,
            gamma: d.gamma,
            epsilon: d.epsilon,
            dual_update_period: d.dual_update_period,
            init_from_previous: d.init_from_previous,
            init_noise: d.init_noise,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdqlParams {
    pub step_constant: f64,
}

impl Default for PdqlParams {
    fn default() -> Self {
        Self {
            step_constant: PdqlConfig::default().step_constant,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationParams {
    pub fixed_lambdas: Vec<f64>,
    /// Steps between dual re-estimations, one variant each.
    pub estimation_periods: Vec<usize>,
}

impl Default for AblationParams {
    fn default() -> Self {
        Self {
            fixed_lambdas: vec![0.0, 1.0],
            estimation_periods: vec![200, 2000],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub thresholds: Vec<f64>,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            thresholds: vec![-1.0, -0.05, -5e-6],
        }
    }
}

/// A whole experiment, read from TOML. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    /// Layout file; the bundled Four-Room layout when absent. Relative paths
    /// resolve against the config file's directory.
    #[serde(default)]
    pub layout: Option<PathBuf>,
    /// Overrides the layout's trap activation probability.
    #[serde(default)]
    pub trap_activation_prob: Option<f64>,
    /// Overrides the layout's object reward probability.
    #[serde(default)]
    pub object_reward_prob: Option<f64>,
    pub n_tasks: usize,
    #[serde(default = "default_steps")]
    pub steps_per_task: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub learner: LearnerParams,
    #[serde(default)]
    pub dual: DualConfig,
    #[serde(default)]
    pub pdql: PdqlParams,
    #[serde(default)]
    pub ablation: AblationParams,
    #[serde(default)]
    pub sweep: SweepParams,
    /// Tasks per point in the per-task curves.
    #[serde(default = "default_block")]
    pub block_size: usize,
}

fn default_steps() -> usize {
    20_000
}

fn default_horizon() -> usize {
    200
}

fn default_threshold() -> f64 {
    -5e-6
}

fn default_block() -> usize {
    8
}

impl RunConfig {
    /// Defaults of the published Four-Room setup with the given shape.
    pub fn four_room(method: Method, n_tasks: usize, seeds: Vec<u64>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            method,
            layout: None,
            trap_activation_prob: None,
            object_reward_prob: None,
            n_tasks,
            steps_per_task: default_steps(),
            horizon: default_horizon(),
            seeds,
            threshold: default_threshold(),
            output_dir: output_dir.into(),
            learner: LearnerParams::default(),
            dual: DualConfig::default(),
            pdql: PdqlParams::default(),
            ablation: AblationParams::default(),
            sweep: SweepParams::default(),
            block_size: default_block(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(layout), Some(dir)) = (&cfg.layout, path.parent()) {
            if layout.is_relative() {
                cfg.layout = Some(dir.join(layout));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_tasks == 0 {
            return bad("n_tasks must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !self.threshold.is_finite() {
            return bad("threshold must be finite".into());
        }
        if self.block_size == 0 {
            return bad("block_size must be >= 1".into());
        }
        if !(self.pdql.step_constant > 0.0) {
            return bad("pdql.step_constant must be positive".into());
        }
        if self.ablation.fixed_lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return bad("ablation.fixed_lambdas must be finite and >= 0".into());
        }
        if self.ablation.estimation_periods.contains(&0) {
            return bad("ablation.estimation_periods must be >= 1".into());
        }
        if self.sweep.thresholds.iter().any(|t| !t.is_finite()) {
            return bad("sweep.thresholds must be finite".into());
        }
        for p in [self.trap_activation_prob, self.object_reward_prob].into_iter().flatten() {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} not in [0, 1]"));
            }
        }
        self.learner_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.dual.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn learner_config(&self) -> LearnerConfig {
        let p = &self.learner;
        LearnerConfig {
            alpha_sf: p.alpha_sf,
            alpha_w: p.alpha_w,
            gamma: p.gamma,
            epsilon: p.epsilon,
            episode_horizon: self.horizon,
            steps_per_task: self.steps_per_task,
            dual_update_period: p.dual_update_period,
            init_from_previous: p.init_from_previous,
            init_noise: p.init_noise,
        }
    }

    pub fn pdql_config(&self) -> PdqlConfig {
        PdqlConfig {
            learner: self.learner_config(),
            step_constant: self.pdql.step_constant,
        }
    }

    pub fn load_layout(&self) -> Result<GridLayout> {
        let mut layout = match &self.layout {
            Some(p) => GridLayout::load(p)?,
            None => GridLayout::default_four_room(),
        };
        if let Some(p) = self.trap_activation_prob {
            layout = layout.with_trap_activation_prob(p)?;
        }
        if let Some(p) = self.object_reward_prob {
            layout = layout.with_object_reward_prob(p)?;
        }
        Ok(layout)
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}
