use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sftcop::dual::{consistency_experiment, save_consistency_csv, ConsistencySetup, DualConfig};
use sftcop::harness::{lambda_ablation, plot_series, run_sequence, threshold_sweep, Comparison, RunConfig, Series};
use sftcop::oracle::{
    consistency_instance, run_oracle_checks, source_library, CheckCounts, TabularCmdp, CONSISTENCY_MULTIPLIERS,
};
use sftcop::Result;

#[derive(Parser)]
#[command(name = "sftcop", version, about = "Constrained policy transfer with successor features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured method over a task sequence, one run per seed.
    Train { config: PathBuf },
    /// Compare fixed multipliers with estimation at several periods.
    AblateLambda { config: PathBuf },
    /// Run SFT-CoP once per threshold in the config's sweep list.
    SweepThreshold { config: PathBuf },
    /// Error of the dual estimate from K Monte-Carlo rollouts per source.
    Consistency {
        /// Instance file; a random instance is generated when absent.
        #[arg(long)]
        cmdp: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        instance_seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value = "consistency.csv")]
        out: PathBuf,
    },
    /// Property suites on random instances: strong duality, GPI improvement,
    /// the value-gap lemma and the transfer bound.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        strong_duality: usize,
        #[arg(long, default_value_t = 20)]
        gpi: usize,
        #[arg(long, default_value_t = 20)]
        value_gap: usize,
        #[arg(long, default_value_t = 50)]
        transfer_bound: usize,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Charts from metrics CSVs. Each series is `LABEL=PATH[,PATH...]`; a
    /// directory path stands for its `seed-*/metrics.csv` files.
    Plot {
        #[arg(long = "series", required = true)]
        series: Vec<String>,
        #[arg(long, default_value_t = 8)]
        block: usize,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

fn print_comparison(c: &Comparison) {
    println!("variant,mean_failures,mean_reward,mean_unsafe_reward");
    for v in c.variants() {
        let f = c.mean(v, |r| r.accumulated_failures as f64).unwrap_or(f64::NAN);
        let r = c.mean(v, |r| r.accumulated_reward).unwrap_or(f64::NAN);
        let u = c.mean(v, |r| r.accumulated_unsafe_reward).unwrap_or(f64::NAN);
        println!("{v},{f},{r},{u}");
    }
}

fn parse_series(spec: &str) -> Result<Series> {
    let (label, paths) = spec
        .split_once('=')
        .ok_or_else(|| sftcop::Error::Config(format!("series `{spec}` is not LABEL=PATH")))?;
    let paths: Vec<PathBuf> = paths.split(',').map(PathBuf::from).collect();
    Series::load(label, &paths)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            for a in run_sequence(&cfg)? {
                let s = &a.summary;
                println!(
                    "seed {}: failures {} reward {:.3} unsafe {:.3} -> {}",
                    a.seed,
                    s.accumulated_failures,
                    s.accumulated_reward,
                    s.accumulated_unsafe_reward,
                    a.dir.display()
                );
            }
        }
        Command::AblateLambda { config } => print_comparison(&lambda_ablation(&RunConfig::load(&config)?, true)?),
        Command::SweepThreshold { config } => print_comparison(&threshold_sweep(&RunConfig::load(&config)?, true)?),
        Command::Consistency {
            cmdp,
            instance_seed,
            k,
            seeds,
            horizon,
            out,
        } => {
            let lib = match cmdp {
                Some(p) => source_library(&TabularCmdp::load(p)?, &CONSISTENCY_MULTIPLIERS)?,
                None => consistency_instance(instance_seed)?,
            };
            let task = lib.cmdp.task();
            let setup = ConsistencySetup {
                env: &lib.cmdp,
                sources: &lib.entries,
                reward_weights: task.reward_weights(),
                cost_weights: task.cost_weights(),
                gamma: task.discount(),
                threshold: task.threshold(),
                state: lib.cmdp.start(),
                exact: lib.exact.clone(),
                horizon,
                dual: DualConfig {
                    iterations: 100_000,
                    step_constant: 1.0,
                    ..DualConfig::default()
                },
            };
            let report = consistency_experiment(&setup, &k, &seeds)?;
            save_consistency_csv(&report.rows, &out)?;
            println!("lambda* = {}", report.lambda_star);
            for s in &report.summary {
                println!("K={}: median {:.4e} (min {:.4e}, max {:.4e})", s.k, s.median, s.min, s.max);
            }
        }
        Command::OracleCheck {
            seed,
            strong_duality,
            gpi,
            value_gap,
            transfer_bound,
            json,
        } => {
            let counts = CheckCounts {
                strong_duality,
                gpi_improvement: gpi,
                value_gap,
                transfer_bound,
            };
            let report = run_oracle_checks(seed, counts)?;
            for c in &report.checks {
                println!(
                    "{} {}: {} instances, {} violations, worst margin {:.3e}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.instances,
                    c.violations,
                    c.worst_margin
                );
            }
            if let Some(p) = json {
                let text = serde_json::to_string_pretty(&report)?;
                std::fs::write(&p, text).map_err(|e| sftcop::Error::io(&p, e))?;
            }
            return Ok(report.passed());
        }
        Command::Plot { series, block, out } => {
            let series = series.iter().map(|s| parse_series(s)).collect::<Result<Vec<_>>>()?;
            let outputs = plot_series(&series, block, &out)?;
            for c in &outputs.charts {
                println!("{}", c.display());
            }
            println!("{}", outputs.aggregates.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
