//! End-to-end checks of the command line binary: file contracts, exit
//! codes and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spfa::simulation::{build_population, generate_sample};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spfa"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .env_remove("SPFA_SEED")
        .output()
        .expect("binary should run")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process should exit normally")
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// A 20-variable two-factor sample written as a data CSV the binary
/// can ingest.
fn write_sample(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let spec = build_population(2, 0.80).unwrap();
    let data = generate_sample(&spec, n, seed).unwrap();
    let mut text = (1..=data.ncols())
        .map(|i| format!("X{i}"))
        .collect::<Vec<_>>()
        .join(",");
    text.push('\n');
    for i in 0..data.nrows() {
        let row: Vec<String> = (0..data.ncols()).map(|j| data[(i, j)].to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn help_exits_zero() {
    let output = bin().arg("--help").output().unwrap();
    assert_eq!(exit_code(&output), 0);
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("simulate"), "help should list subcommands");
}

#[test]
fn missing_required_flag_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "data.csv", 60, 7);
    let output = run_in(dir.path(), &["fit", "--input", "data.csv"]);
    assert_eq!(exit_code(&output), 1);
    assert!(stderr_text(&output).contains("--q"));
    let prefix = input.with_extension("");
    assert!(
        !prefix.with_extension("cfm.loadings.csv").exists(),
        "no outputs on usage error"
    );
}

#[test]
fn unreadable_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(dir.path(), &["fit", "--input", "missing.csv", "--q", "2"]);
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn fit_writes_expected_files_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    write_sample(dir.path(), "data.csv", 200, 11);
    let args = ["fit", "--input", "data.csv", "--q", "2"];
    let output = run_in(dir.path(), &args);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_text(&output));
    let expected = [
        "data.cfm.loadings.csv",
        "data.cfm.rotated.csv",
        "data.cfm.json",
        "data.spfa.loadings.csv",
        "data.spfa.rotated.csv",
        "data.spfa.json",
    ];
    let first: Vec<Vec<u8>> = expected
        .iter()
        .map(|f| std::fs::read(dir.path().join(f)).unwrap_or_else(|_| panic!("missing {f}")))
        .collect();
    let header = String::from_utf8(first[0].clone()).unwrap();
    assert!(header.starts_with("variable,F1,F2\n"));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("data.spfa.json")).unwrap()).unwrap();
    assert_eq!(json["method"], "spfa");
    assert_eq!(json["q"], 2);
    assert_eq!(json["converged"], true);

    let rerun = run_in(dir.path(), &args);
    assert_eq!(exit_code(&rerun), 0);
    for (f, bytes) in expected.iter().zip(&first) {
        assert_eq!(
            &std::fs::read(dir.path().join(f)).unwrap(),
            bytes,
            "{f} should be byte identical across runs"
        );
    }
}

#[test]
fn fit_reports_non_convergence_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    write_sample(dir.path(), "data.csv", 200, 11);
    let output = run_in(
        dir.path(),
        &[
            "fit",
            "--input",
            "data.csv",
            "--q",
            "2",
            "--method",
            "spfa",
            "--max-iter",
            "1",
            "--tol-gradient",
            "0",
        ],
    );
    assert_eq!(exit_code(&output), 2);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("data.spfa.json")).unwrap()).unwrap();
    assert_eq!(json["converged"], false);
}

#[test]
fn rotate_target_recovers_input() {
    let dir = tempfile::tempdir().unwrap();
    write_sample(dir.path(), "data.csv", 200, 11);
    let output = run_in(dir.path(), &["fit", "--input", "data.csv", "--q", "2"]);
    assert_eq!(exit_code(&output), 0);
    let rotated = run_in(
        dir.path(),
        &[
            "rotate",
            "--input",
            "data.cfm.loadings.csv",
            "--rotation",
            "target",
            "--target",
            "data.cfm.rotated.csv",
            "--output",
            "target.csv",
        ],
    );
    assert_eq!(exit_code(&rotated), 0, "stderr: {}", stderr_text(&rotated));
    let text = std::fs::read_to_string(dir.path().join("target.csv")).unwrap();
    let reference = std::fs::read_to_string(dir.path().join("data.cfm.rotated.csv")).unwrap();
    for (a, b) in text.lines().zip(reference.lines()).skip(1) {
        for (va, vb) in a.split(',').skip(1).zip(b.split(',').skip(1)) {
            let (va, vb): (f64, f64) = (va.parse().unwrap(), vb.parse().unwrap());
            assert!((va - vb).abs() < 1e-4, "target rotation should match {vb}, got {va}");
        }
    }
}

#[test]
fn scores_reports_perfect_determinacy_for_best_linear() {
    let dir = tempfile::tempdir().unwrap();
    write_sample(dir.path(), "data.csv", 200, 11);
    let output = run_in(
        dir.path(),
        &[
            "scores",
            "--input",
            "data.csv",
            "--q",
            "2",
            "--family",
            "best_linear,bartlett",
        ],
    );
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_text(&output));
    let scores = std::fs::read_to_string(dir.path().join("data.scores.best_linear.csv")).unwrap();
    assert!(scores.starts_with("F1,F2\n"));
    assert_eq!(scores.lines().count(), 201);
    assert!(dir.path().join("data.scores.bartlett.csv").exists());
    let validity: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("data.validity.json")).unwrap())
            .unwrap();
    for d in validity["best_linear"]["determinacy"].as_array().unwrap() {
        assert!((d.as_f64().unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn takeuchi_in_oblique_mode_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    write_sample(dir.path(), "data.csv", 200, 11);
    let output = run_in(
        dir.path(),
        &[
            "scores",
            "--input",
            "data.csv",
            "--q",
            "2",
            "--family",
            "takeuchi",
            "--rotation",
            "parsimax",
            "--mode",
            "oblique",
        ],
    );
    assert_eq!(exit_code(&output), 1);
    assert!(
        stderr_text(&output).contains("orthogonal"),
        "stderr: {}",
        stderr_text(&output)
    );
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--sl", "0.8", "--q", "2", "--n", "100", "--reps", "3", "--seed", "5",
        "--out", "a.csv", "--json", "a.json",
    ];
    let first = run_in(dir.path(), &args);
    assert_eq!(exit_code(&first), 0, "stderr: {}", stderr_text(&first));
    let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sl,q,n,method,rotation,replications,mean_congruence,hit05,hit10,failures"
    );
    assert_eq!(lines.count(), 2, "one row per method");

    let mut rerun_args = args;
    rerun_args[12] = "b.csv";
    rerun_args[14] = "b.json";
    let rerun = run_in(dir.path(), &rerun_args);
    assert_eq!(exit_code(&rerun), 0);
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(dir.path().join("a.json")).unwrap(),
        std::fs::read(dir.path().join("b.json")).unwrap()
    );

    let mut reseeded_args = args;
    reseeded_args[10] = "6";
    reseeded_args[12] = "c.csv";
    reseeded_args[14] = "c.json";
    let reseeded = run_in(dir.path(), &reseeded_args);
    assert_eq!(exit_code(&reseeded), 0);
    assert_ne!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("c.csv")).unwrap(),
        "a different seed should change the results"
    );
}

#[test]
fn simulate_reads_seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--sl", "0.8", "--q", "2", "--n", "100", "--reps", "2", "--out", "env.csv",
    ];
    let with_env = bin()
        .args(args)
        .current_dir(dir.path())
        .env("SPFA_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(exit_code(&with_env), 0, "stderr: {}", stderr_text(&with_env));
    let mut flag_args = args.to_vec();
    flag_args.extend(["--seed", "5"]);
    flag_args[10] = "flag.csv";
    let with_flag = run_in(dir.path(), &flag_args);
    assert_eq!(exit_code(&with_flag), 0);
    assert_eq!(
        std::fs::read(dir.path().join("env.csv")).unwrap(),
        std::fs::read(dir.path().join("flag.csv")).unwrap()
    );
}

#[test]
fn report_compares_against_reference_table() {
    let dir = tempfile::tempdir().unwrap();
    let simulate = run_in(
        dir.path(),
        &[
            "simulate", "--sl", "0.8", "--q", "2", "--n", "200", "--reps", "2", "--seed", "5",
            "--out", "results.csv",
        ],
    );
    assert_eq!(exit_code(&simulate), 0, "stderr: {}", stderr_text(&simulate));
    let report = run_in(
        dir.path(),
        &["report", "--input", "results.csv", "--output", "report.csv"],
    );
    assert_eq!(exit_code(&report), 0, "stderr: {}", stderr_text(&report));
    let text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sl,q,n,method,hit05,ref_hit05,diff05,hit10,ref_hit10,diff10"
    );
    assert_eq!(lines.count(), 2, "one comparison row per method");

    let unknown = run_in(
        dir.path(),
        &["report", "--input", "results.csv", "--compare", "nope"],
    );
    assert_eq!(exit_code(&unknown), 1);
}
