//! Every example runs to completion with its default settings.

#[allow(dead_code)]
mod successor_features {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/successor_features.rs"));
}

#[test]
fn successor_features_example_runs() {
    successor_features::run_example().unwrap();
}

#[allow(dead_code)]
mod four_room {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/four_room.rs"));
}

#[test]
fn four_room_example_runs() {
    four_room::run_example().unwrap();
}

#[allow(dead_code)]
mod train_task {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/train_task.rs"));
}

#[test]
fn train_task_example_runs() {
    train_task::run_example().unwrap();
}

#[allow(dead_code)]
mod compare_methods {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/compare_methods.rs"));
}

#[test]
fn compare_methods_example_runs() {
    compare_methods::run_example().unwrap();
}

#[allow(dead_code)]
mod dual_estimation {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/dual_estimation.rs"));
}

#[test]
fn dual_estimation_example_runs() {
    dual_estimation::run_example().unwrap();
}

#[allow(dead_code)]
mod consistency {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/consistency.rs"));
}

#[test]
fn consistency_example_runs() {
    consistency::run_example().unwrap();
}

#[allow(dead_code)]
mod exact_cmdp {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/exact_cmdp.rs"));
}

#[test]
fn exact_cmdp_example_runs() {
    exact_cmdp::run_example().unwrap();
}

#[allow(dead_code)]
mod oracle_checks {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/oracle_checks.rs"));
}

#[test]
fn oracle_checks_example_runs() {
    oracle_checks::run_example().unwrap();
}

#[allow(dead_code)]
mod lambda_ablation {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/lambda_ablation.rs"));
}

#[test]
fn lambda_ablation_example_runs() {
    lambda_ablation::run_example().unwrap();
}

#[allow(dead_code)]
mod threshold_sweep {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/threshold_sweep.rs"));
}

#[test]
fn threshold_sweep_example_runs() {
    threshold_sweep::run_example().unwrap();
}

#[allow(dead_code)]
mod plot_runs {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/plot_runs.rs"));
}

#[test]
fn plot_runs_example_runs() {
    plot_runs::run_example().unwrap();
}

#[allow(dead_code)]
mod checkpoint {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/checkpoint.rs"));
}

#[test]
fn checkpoint_example_runs() {
    checkpoint::run_example().unwrap();
}

#[allow(dead_code)]
mod run_config {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/run_config.rs"));
}

#[test]
fn run_config_example_runs() {
    run_config::run_example().unwrap();
}
