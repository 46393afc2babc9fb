//! Exit-code contract and error-path checks for the `docal` binary.

use std::path::Path;
use std::process::{Command, Output};

fn docal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_docal"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn zero_episodes_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = docal(dir.path(), &["gen", "--episodes", "0", "--out", "x"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ppo_without_checkpoint_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let ok = docal(dir.path(), &["gen", "--episodes", "2", "--out", "ds"]);
    assert_eq!(code(&ok), 0);
    let out = docal(
        dir.path(),
        &["select", "--dataset", "ds/dataset.jsonl", "--strategy", "ppo", "--out", "sel"],
    );
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = docal(dir.path(), &["gen", "--frobnicate"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn identify_without_outputs_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&docal(dir.path(), &["gen", "--episodes", "2", "--out", "ds"])), 0);
    assert_eq!(
        code(&docal(
            dir.path(),
            &["select", "--dataset", "ds/dataset.jsonl", "--strategy", "greedy", "--out", "sel"],
        )),
        0
    );
    let out = docal(
        dir.path(),
        &[
            "identify",
            "--dataset",
            "ds/dataset.jsonl",
            "--selections",
            "sel/selections.jsonl",
            "--out",
            "id",
        ],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn degenerate_selections_are_an_identifiability_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&docal(
            dir.path(),
            &["gen", "--episodes", "2", "--with-outputs", "--out", "ds"],
        )),
        0
    );
    // Hand-written selections reusing the same posture four times.
    std::fs::write(
        dir.path().join("bad.jsonl"),
        concat!(
            "{\"format_version\":1,\"strategy\":\"manual\",\"k\":4,\"repeats\":1,\"dataset_digest\":\"x\"}\n",
            "{\"episode_id\":0,\"indices\":[3,3,3,3],\"det_s\":0.0,\"logdet\":-50.0}\n",
            "{\"episode_id\":1,\"indices\":[5,5,5,5],\"det_s\":0.0,\"logdet\":-50.0}\n",
        ),
    )
    .unwrap();
    let out = docal(
        dir.path(),
        &[
            "identify",
            "--dataset",
            "ds/dataset.jsonl",
            "--selections",
            "bad.jsonl",
            "--out",
            "id",
        ],
    );
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    // Failures are still recorded per episode.
    let text = std::fs::read_to_string(dir.path().join("id/parameters.csv")).unwrap();
    assert_eq!(text.matches("rank_deficient").count(), 2);
}

#[test]
fn missing_dataset_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = docal(
        dir.path(),
        &["select", "--dataset", "nope.jsonl", "--strategy", "greedy", "--out", "sel"],
    );
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn mixed_full_rank_and_degenerate_selections_succeed_with_failures_recorded() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&docal(
            dir.path(),
            &["gen", "--episodes", "2", "--with-outputs", "--out", "ds"],
        )),
        0
    );
    std::fs::write(
        dir.path().join("mixed.jsonl"),
        concat!(
            "{\"format_version\":1,\"strategy\":\"manual\",\"k\":4,\"repeats\":1,\"dataset_digest\":\"x\"}\n",
            "{\"episode_id\":0,\"indices\":[0,7,21,40],\"det_s\":0.0,\"logdet\":0.0}\n",
            "{\"episode_id\":1,\"indices\":[5,5,5,5],\"det_s\":0.0,\"logdet\":-50.0}\n",
        ),
    )
    .unwrap();
    let out = docal(
        dir.path(),
        &[
            "identify",
            "--dataset",
            "ds/dataset.jsonl",
            "--selections",
            "mixed.jsonl",
            "--out",
            "id",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("id/parameters.csv")).unwrap();
    assert_eq!(text.matches(",ok,").count(), 1);
    assert_eq!(text.matches("rank_deficient").count(), 1);
}

#[test]
fn gen_reports_identical_digest_for_identical_config() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = docal(
        dir.path(),
        &["gen", "--episodes", "3", "--seed", "4", "--out", "d1"],
    );
    let out2 = docal(
        dir.path(),
        &["gen", "--episodes", "3", "--seed", "4", "--out", "d2"],
    );
    assert_eq!(code(&out1), 0);
    let digest = |o: &Output| {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .find(|l| l.starts_with("digest"))
            .unwrap()
            .to_string()
    };
    assert_eq!(digest(&out1), digest(&out2));
}

#[test]
fn effective_config_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&docal(dir.path(), &["gen", "--episodes", "2", "--out", "ds"])),
        0
    );
    let text = std::fs::read_to_string(dir.path().join("ds/effective_config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["preset"], "desk");
    assert_eq!(v["dataset"]["n_episodes"], 2);
}
