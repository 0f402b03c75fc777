// Runs two methods, writes their artifacts and renders the charts.
//
// `cargo run --release --example plot_runs`

use sftcop::harness::{compare_methods, plot_series, Method, RunConfig, Series};

pub fn run_example() -> sftcop::Result<()> {
    let out = std::env::temp_dir().join("sftcop-plot-example");
    let cfg = RunConfig {
        steps_per_task: 1_000,
        block_size: 2,
        ..RunConfig::four_room(Method::SftCop, 4, vec![0, 1, 2], &out)
    };
    compare_methods(&cfg, &[Method::SftCop, Method::Sfql], true)?;
    let series = [
        Series::load("SFT-CoP", &[out.join("methods/sft_cop")])?,
        Series::load("SFQL", &[out.join("methods/sfql")])?,
    ];
    let written = plot_series(&series, cfg.block_size, out.join("plots"))?;
    for c in &written.charts {
        println!("{}", c.display());
    }
    println!("{}", written.aggregates.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
