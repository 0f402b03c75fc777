//! The `sftcop` binary end to end on tiny inputs.

use std::path::Path;
use std::process::Command;

fn sftcop(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sftcop"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) {
    let layout = concat!(env!("CARGO_MANIFEST_DIR"), "/layouts/four_room.toml");
    let text = format!(
        "method = \"sft_cop\"\nlayout = \"{layout}\"\nn_tasks = 2\nsteps_per_task = 400\nseeds = [0, 1]\noutput_dir = \"out\"\nblock_size = 1\n\n[ablation]\nfixed_lambdas = [0.0]\nestimation_periods = [200]\n\n[sweep]\nthresholds = [-1.0, -5e-6]\n"
    );
    std::fs::write(dir.join("run.toml"), text).unwrap();
}

#[test]
fn train_writes_artifacts_then_plot_reads_them() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path());
    let out = sftcop(tmp.path(), &["train", "run.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let seed = tmp.path().join("out/seed-0");
    for f in ["metrics.csv", "summary.json", "manifest.json", "library.json"] {
        assert!(seed.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(seed.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("task,episode,step,failures,total_reward,safe_reward,unsafe_reward,v_c_hat,lambda\n"));

    let out = sftcop(tmp.path(), &["plot", "--series", "a=out", "--block", "1", "--out", "plots"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("plots/aggregates.csv").is_file());
    assert!(tmp.path().join("plots/failures_per_task.svg").is_file());
}

#[test]
fn ablation_and_sweep_write_comparisons() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path());
    for (cmd, sub) in [("ablate-lambda", "ablation"), ("sweep-threshold", "sweep")] {
        let out = sftcop(tmp.path(), &[cmd, "run.toml"]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(tmp.path().join("out").join(sub).join("comparison.csv").is_file());
    }
}

#[test]
fn consistency_and_oracle_check() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sftcop(tmp.path(), &["consistency", "--k", "10,100", "--seeds", "0,1", "--out", "c.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("c.csv")).unwrap();
    assert!(csv.starts_with("K,seed,lambda_hat,lambda_star,abs_error\n"));
    assert_eq!(csv.lines().count(), 5);

    let out = sftcop(
        tmp.path(),
        &["oracle-check", "--strong-duality", "2", "--gpi", "2", "--value-gap", "2", "--transfer-bound", "2", "--json", "r.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("PASS").count(), 4);
    assert!(tmp.path().join("r.json").is_file());
}

#[test]
fn bad_config_fails_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "method = \"sft_cop\"\nn_tasks = 1\nseeds = [0]\noutput_dir = \"o\"\nspeed = 2\n").unwrap();
    let out = sftcop(tmp.path(), &["train", "bad.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("speed"));
}
