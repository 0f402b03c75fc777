use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::TaskSpec;
use crate::baselines::{pdql_train_task, sfql_train_task};
use crate::error::{Error, Result};
use crate::gridworld::{sample_task, GridLayout, GridState};
use crate::metrics::{MetricsRecord, METRICS_HEADER};
use crate::rng::{domain, stream};
use crate::sf::{save_checkpoint, train_task, LambdaControl, LearnerConfig, PolicyEntry, StreamKey};

use super::config::{Method, RunConfig};

/// One learner configuration inside an experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arm {
    SftCop(LambdaControl),
    Sfql,
    Pdql,
}

impl Arm {
    pub fn for_method(cfg: &RunConfig) -> Self {
        match cfg.method {
            Method::SftCop => Arm::SftCop(LambdaControl::Estimated(cfg.dual)),
            Method::Sfql => Arm::Sfql,
            Method::Pdql => Arm::Pdql,
        }
    }
}

/// The task sequence of one seed. Depends only on the seed, the layout, the
/// threshold and the discount, so every method and variant sees the same
/// tasks.
pub fn sample_tasks(layout: &GridLayout, n: usize, threshold: f64, gamma: f64, seed: u64) -> Result<Vec<TaskSpec>> {
    let mut rng = stream(&[seed, domain::TASKS]);
    (0..n)
        .map(|i| sample_task(&mut rng, layout, threshold, gamma, format!("task-{i}")))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    /// Policy library after the last task; empty for PDQL.
    pub library: Vec<PolicyEntry<GridState>>,
}

/// Trains `tasks` in order with one arm; SF arms keep a growing library,
/// which is returned with the metrics.
pub fn run_tasks(
    layout: &GridLayout,
    tasks: &[TaskSpec],
    arm: Arm,
    learner: &LearnerConfig,
    pdql_step: f64,
    seed: u64,
) -> Result<(Vec<MetricsRecord>, Vec<PolicyEntry<GridState>>)> {
    let mut records = Vec::new();
    let mut library = Vec::new();
    for (k, task) in tasks.iter().enumerate() {
        let key = StreamKey { seed, task: k };
        let mut sink = |r: MetricsRecord| records.push(r);
        match arm {
            Arm::SftCop(control) => library.push(train_task(layout, task, &library, learner, &control, key, &mut sink)?),
            Arm::Sfql => library.push(sfql_train_task(layout, task, &library, learner, key, &mut sink)?),
            Arm::Pdql => {
                let cfg = crate::baselines::PdqlConfig {
                    learner: *learner,
                    step_constant: pdql_step,
                };
                pdql_train_task(layout, task, &cfg, key, &mut sink)?;
            }
        }
    }
    Ok((records, library))
}

/// Runs one arm for every seed of `cfg`; seeds in parallel when `parallel`.
/// Results are identical either way.
pub fn run_arm(cfg: &RunConfig, layout: &GridLayout, arm: Arm, threshold: f64, parallel: bool) -> Result<Vec<SeedRun>> {
    cfg.validate()?;
    let learner = cfg.learner_config();
    let one = |&seed: &u64| -> Result<SeedRun> {
        let tasks = sample_tasks(layout, cfg.n_tasks, threshold, learner.gamma, seed)?;
        let (records, library) = run_tasks(layout, &tasks, arm, &learner, cfg.pdql.step_constant, seed)?;
        Ok(SeedRun { seed, records, library })
    };
    if parallel {
        cfg.seeds.par_iter().map(one).collect()
    } else {
        cfg.seeds.iter().map(one).collect()
    }
}

pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<metrics csv>", e))?;
    Ok(())
}

pub fn save_metrics_csv(records: &[MetricsRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics_csv(records, std::io::BufWriter::new(file))
}

/// Reads a metrics CSV, requiring the exact header.
pub fn load_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let path = path.as_ref();
    let schema = |reason: String| Error::Schema {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| schema(e.to_string()))?;
    let header = rdr.headers().map_err(|e| schema(e.to_string()))?.clone();
    for (i, want) in METRICS_HEADER.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *want => {}
            Some(got) => return Err(schema(format!("column {} is `{got}`, expected `{want}`", i + 1))),
            None => return Err(schema(format!("missing column `{want}`"))),
        }
    }
    if header.len() > METRICS_HEADER.len() {
        return Err(schema(format!("unexpected column `{}`", &header[METRICS_HEADER.len()])));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| schema(format!("row {}: {e}", i + 2))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: usize,
    pub episodes: usize,
    pub failures: u64,
    pub total_reward: f64,
    pub safe_reward: f64,
    pub unsafe_reward: f64,
    pub mean_episode_reward: f64,
    pub mean_episode_failures: f64,
    pub mean_v_c_hat: f64,
    pub final_lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub arm: String,
    pub accumulated_failures: u64,
    pub accumulated_reward: f64,
    pub accumulated_safe_reward: f64,
    pub accumulated_unsafe_reward: f64,
    pub tasks: Vec<TaskSummary>,
}

/// Per-task sums and means of a metrics stream, in task order.
pub fn summarize_tasks(records: &[MetricsRecord]) -> Vec<TaskSummary> {
    let mut out: Vec<TaskSummary> = Vec::new();
    for r in records {
        if out.last().is_none_or(|t| t.task != r.task) {
            out.push(TaskSummary {
                task: r.task,
                episodes: 0,
                failures: 0,
                total_reward: 0.0,
                safe_reward: 0.0,
                unsafe_reward: 0.0,
                mean_episode_reward: 0.0,
                mean_episode_failures: 0.0,
                mean_v_c_hat: 0.0,
                final_lambda: 0.0,
            });
        }
        let t = out.last_mut().expect("pushed above");
        t.episodes += 1;
        t.failures += r.failures;
        t.total_reward += r.total_reward;
        t.safe_reward += r.safe_reward;
        t.unsafe_reward += r.unsafe_reward;
        t.mean_v_c_hat += r.v_c_hat;
        t.final_lambda = r.lambda;
    }
    for t in &mut out {
        let n = t.episodes as f64;
        t.mean_episode_reward = t.total_reward / n;
        t.mean_episode_failures = t.failures as f64 / n;
        t.mean_v_c_hat /= n;
    }
    out
}

pub fn summarize_seed(seed: u64, arm: &str, records: &[MetricsRecord]) -> SeedSummary {
    let tasks = summarize_tasks(records);
    SeedSummary {
        seed,
        arm: arm.to_string(),
        accumulated_failures: tasks.iter().map(|t| t.failures).sum(),
        accumulated_reward: tasks.iter().map(|t| t.total_reward).sum(),
        accumulated_safe_reward: tasks.iter().map(|t| t.safe_reward).sum(),
        accumulated_unsafe_reward: tasks.iter().map(|t| t.unsafe_reward).sum(),
        tasks,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub config_hash: String,
    pub arm: String,
    pub seed: u64,
    pub threshold: f64,
    pub n_tasks: usize,
    pub steps_per_task: usize,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedArtifacts {
    pub seed: u64,
    pub dir: PathBuf,
    pub metrics_csv: PathBuf,
    pub summary: SeedSummary,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes `seed-<n>/{metrics.csv, summary.json, manifest.json}` under `dir`,
/// plus `library.json` for arms that keep a policy library.
pub(crate) fn persist(
    cfg: &RunConfig,
    dir: &Path,
    arm_name: &str,
    threshold: f64,
    runs: &[SeedRun],
) -> Result<Vec<SeedArtifacts>> {
    let hash = cfg.hash()?;
    runs.iter()
        .map(|run| {
            let sd = dir.join(format!("seed-{}", run.seed));
            std::fs::create_dir_all(&sd).map_err(|e| Error::io(&sd, e))?;
            let metrics_csv = sd.join("metrics.csv");
            save_metrics_csv(&run.records, &metrics_csv)?;
            let summary = summarize_seed(run.seed, arm_name, &run.records);
            write_json(&summary, &sd.join("summary.json"))?;
            let mut files = vec!["metrics.csv".to_string(), "summary.json".to_string()];
            if !run.library.is_empty() {
                save_checkpoint(&run.library, sd.join("library.json"))?;
                files.push("library.json".into());
            }
            let manifest = Manifest {
                crate_version: env!("CARGO_PKG_VERSION").to_string(),
                config_hash: hash.clone(),
                arm: arm_name.to_string(),
                seed: run.seed,
                threshold,
                n_tasks: cfg.n_tasks,
                steps_per_task: cfg.steps_per_task,
                files,
            };
            write_json(&manifest, &sd.join("manifest.json"))?;
            Ok(SeedArtifacts {
                seed: run.seed,
                dir: sd,
                metrics_csv,
                summary,
            })
        })
        .collect()
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Trains the configured method on every seed and writes the artifacts under
/// `output_dir`, alongside a copy of the config.
pub fn run_sequence(cfg: &RunConfig) -> Result<Vec<SeedArtifacts>> {
    cfg.validate()?;
    let layout = cfg.load_layout()?;
    let runs = run_arm(cfg, &layout, Arm::for_method(cfg), cfg.threshold, true)?;
    prepare_dir(&cfg.output_dir)?;
    let copy = cfg.output_dir.join("config.toml");
    std::fs::write(&copy, cfg.to_toml()?).map_err(|e| Error::io(&copy, e))?;
    persist(cfg, &cfg.output_dir, cfg.method.name(), cfg.threshold, &runs)
}

/// Per-variant means across seeds, one row per (variant, seed) in `rows`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: String,
    pub seed: u64,
    pub accumulated_failures: u64,
    pub accumulated_reward: f64,
    pub accumulated_safe_reward: f64,
    pub accumulated_unsafe_reward: f64,
    pub mean_episode_reward: f64,
    pub mean_episode_failures: f64,
}

fn comparison_row(variant: &str, run: &SeedRun) -> ComparisonRow {
    let s = summarize_seed(run.seed, variant, &run.records);
    let episodes = run.records.len().max(1) as f64;
    ComparisonRow {
        variant: variant.to_string(),
        seed: run.seed,
        accumulated_failures: s.accumulated_failures,
        accumulated_reward: s.accumulated_reward,
        accumulated_safe_reward: s.accumulated_safe_reward,
        accumulated_unsafe_reward: s.accumulated_unsafe_reward,
        mean_episode_reward: s.accumulated_reward / episodes,
        mean_episode_failures: s.accumulated_failures as f64 / episodes,
    }
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Per-variant metrics streams, in variant order.
    pub runs: Vec<(String, Vec<SeedRun>)>,
}

impl Comparison {
    pub fn variants(&self) -> Vec<&str> {
        self.runs.iter().map(|(v, _)| v.as_str()).collect()
    }

    /// Mean over seeds of a per-seed statistic for one variant.
    pub fn mean(&self, variant: &str, stat: impl Fn(&ComparisonRow) -> f64) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter(|r| r.variant == variant).map(stat).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn compare(cfg: &RunConfig, sub: &str, variants: Vec<(String, Arm, f64, RunConfig)>, write: bool) -> Result<Comparison> {
    cfg.validate()?;
    let layout = cfg.load_layout()?;
    let runs: Vec<(String, Vec<SeedRun>, f64, RunConfig)> = variants
        .into_par_iter()
        .map(|(name, arm, tau, vcfg)| Ok((name, run_arm(&vcfg, &layout, arm, tau, true)?, tau, vcfg)))
        .collect::<Result<_>>()?;
    let rows: Vec<ComparisonRow> = runs
        .iter()
        .flat_map(|(name, seeds, _, _)| seeds.iter().map(move |r| comparison_row(name, r)))
        .collect();
    if write {
        let dir = cfg.output_dir.join(sub);
        prepare_dir(&dir)?;
        for (name, seeds, tau, vcfg) in &runs {
            persist(vcfg, &dir.join(name), name, *tau, seeds)?;
        }
        write_comparison_csv(&rows, &dir.join("comparison.csv"))?;
    }
    Ok(Comparison {
        rows,
        runs: runs.into_iter().map(|(n, s, _, _)| (n, s)).collect(),
    })
}

pub fn ablation_variant_name(arm: &Arm, period: usize) -> String {
    match arm {
        Arm::SftCop(LambdaControl::Fixed(l)) => format!("fixed-{l}"),
        Arm::SftCop(LambdaControl::Estimated(_)) => format!("estimated-{period}"),
        Arm::SftCop(LambdaControl::Folded) | Arm::Sfql => "sfql".into(),
        Arm::Pdql => "pdql".into(),
    }
}

/// SFT-CoP with each fixed multiplier and with estimation at each period, on
/// the same seeds and tasks. Writes under `output_dir/ablation` when `write`.
pub fn lambda_ablation(cfg: &RunConfig, write: bool) -> Result<Comparison> {
    let mut variants = Vec::new();
    for &l in &cfg.ablation.fixed_lambdas {
        let arm = Arm::SftCop(LambdaControl::Fixed(l));
        variants.push((ablation_variant_name(&arm, 0), arm, cfg.threshold, cfg.clone()));
    }
    for &period in &cfg.ablation.estimation_periods {
        let mut vcfg = cfg.clone();
        vcfg.learner.dual_update_period = period;
        let arm = Arm::SftCop(LambdaControl::Estimated(cfg.dual));
        variants.push((ablation_variant_name(&arm, period), arm, cfg.threshold, vcfg));
    }
    if variants.is_empty() {
        return Err(Error::Config("ablation lists no variants".into()));
    }
    compare(cfg, "ablation", variants, write)
}

/// SFT-CoP once per threshold in `sweep.thresholds`. Writes under
/// `output_dir/sweep` when `write`.
pub fn threshold_sweep(cfg: &RunConfig, write: bool) -> Result<Comparison> {
    if cfg.sweep.thresholds.len() < 2 {
        return Err(Error::Config("threshold sweep needs at least two thresholds".into()));
    }
    let variants = cfg
        .sweep
        .thresholds
        .iter()
        .map(|&tau| {
            let vcfg = RunConfig {
                threshold: tau,
                ..cfg.clone()
            };
            (format!("tau={tau}"), Arm::SftCop(LambdaControl::Estimated(cfg.dual)), tau, vcfg)
        })
        .collect();
    compare(cfg, "sweep", variants, write)
}

/// Several methods on the same seeds and tasks. Writes under
/// `output_dir/methods` when `write`.
pub fn compare_methods(cfg: &RunConfig, methods: &[Method], write: bool) -> Result<Comparison> {
    let variants = methods
        .iter()
        .map(|&m| {
            let vcfg = RunConfig {
                method: m,
                ..cfg.clone()
            };
            (m.name().to_string(), Arm::for_method(&vcfg), cfg.threshold, vcfg)
        })
        .collect();
    compare(cfg, "methods", variants, write)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(method: Method, dir: &Path) -> RunConfig {
        RunConfig {
            steps_per_task: 1_000,
            ..RunConfig::four_room(method, 3, vec![0, 1, 2], dir)
        }
    }

    #[test]
    fn metrics_header_is_exact() {
        let mut buf = Vec::new();
        write_metrics_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "task,episode,step,failures,total_reward,safe_reward,unsafe_reward,v_c_hat,lambda\n"
        );
    }

    #[test]
    fn serial_and_parallel_agree() {
        let cfg = small(Method::SftCop, Path::new("unused"));
        let layout = cfg.load_layout().unwrap();
        let a = run_arm(&cfg, &layout, Arm::for_method(&cfg), cfg.threshold, false).unwrap();
        let b = run_arm(&cfg, &layout, Arm::for_method(&cfg), cfg.threshold, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].records.last().unwrap().step, 1_000);
    }

    #[test]
    fn summaries_match_raw_records_and_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(Method::Sfql, dir.path());
        let arts = run_sequence(&cfg).unwrap();
        assert_eq!(arts.len(), 3);
        let records = load_metrics_csv(&arts[1].metrics_csv).unwrap();
        let tasks = summarize_tasks(&records);
        assert_eq!(tasks.len(), 3);
        for t in &tasks {
            let rows: Vec<_> = records.iter().filter(|r| r.task == t.task).collect();
            let sum: f64 = rows.iter().map(|r| r.total_reward).sum();
            assert!((t.mean_episode_reward - sum / rows.len() as f64).abs() <= 1e-12);
        }
        assert_eq!(tasks, arts[1].summary.tasks);
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(arts[0].dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest.config_hash, cfg.hash().unwrap());
    }

    #[test]
    fn schema_errors_name_the_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, "task,episode,step,fails,total_reward,safe_reward,unsafe_reward,v_c_hat,lambda\n").unwrap();
        let e = load_metrics_csv(&p).unwrap_err().to_string();
        assert!(e.contains("fails") && e.contains("failures"), "{e}");
    }
}
