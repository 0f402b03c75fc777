// Experiment configs: parsing, defaults, validation and the hash recorded in
// every manifest.
//
// `cargo run --example run_config`

use sftcop::harness::RunConfig;

pub fn run_example() -> sftcop::Result<()> {
    let text = r#"
method = "sfql"
n_tasks = 16
seeds = [0, 1, 2, 3, 4]
output_dir = "runs/sfql"

[learner]
epsilon = 0.1
"#;
    let cfg = RunConfig::parse(text)?;
    println!("{}", cfg.to_toml()?);
    println!("hash {}", cfg.hash()?);
    match RunConfig::parse(&format!("learning_rate = 0.1\n{text}")) {
        Ok(_) => unreachable!("unknown keys are rejected"),
        Err(e) => println!("rejected: {e}"),
    }
    let bundled = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/four_room.toml"))?;
    println!("bundled config: {} tasks x {} steps", bundled.n_tasks, bundled.steps_per_task);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
