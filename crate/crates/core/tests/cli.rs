use std::path::{Path, PathBuf};

use splitlora::cli::{cli_main, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};

fn run(args: &[&str]) -> i32 {
    cli_main(std::iter::once("splitlora").chain(args.iter().copied()))
}

fn shipped_scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/edge_fleet.json")
}

#[test]
fn validate_accepts_builtin_and_shipped_file() {
    assert_eq!(run(&["validate"]), EXIT_OK);
    assert_eq!(
        run(&[
            "validate",
            "--scenario",
            shipped_scenario().to_str().unwrap()
        ]),
        EXIT_OK
    );
}

#[test]
fn invalid_scenario_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(shipped_scenario()).unwrap();
    let bad = text.replace("\"weight\": 0.2", "\"weight\": 1.5");
    assert_ne!(bad, text);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, bad).unwrap();
    assert_eq!(
        run(&["validate", "--scenario", path.to_str().unwrap()]),
        EXIT_VALIDATION
    );

    let unknown = text.replacen("\"seed\": 42,", "\"seed\": 42,\n  \"sead\": 7,", 1);
    let path = dir.path().join("unknown.json");
    std::fs::write(&path, unknown).unwrap();
    assert_eq!(
        run(&["validate", "--scenario", path.to_str().unwrap()]),
        EXIT_VALIDATION
    );
    assert_eq!(
        run(&[
            "validate",
            "--lenient",
            "--scenario",
            path.to_str().unwrap()
        ]),
        EXIT_OK
    );

    let missing = dir.path().join("missing.json");
    assert_ne!(
        run(&["validate", "--scenario", missing.to_str().unwrap()]),
        EXIT_OK
    );
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(&["run", "--policies", "card,nonsense"]), EXIT_USAGE);
    assert_eq!(run(&["sweep", "--param", "w"]), EXIT_USAGE);
}

#[test]
fn out_of_range_policy_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "run",
        "--rounds",
        "1",
        "--policies",
        "fixed-cut:99",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_VALIDATION);
}

#[test]
fn show_decision_writes_one_row_per_cut() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&[
            "show-decision",
            "--device",
            "2",
            "--round",
            "3",
            "--out",
            dir.path().to_str().unwrap()
        ]),
        EXIT_OK
    );
    let text = std::fs::read_to_string(dir.path().join("decisions.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("cut_layer,cost_u,delay_s,energy_j"));
    let cuts: Vec<u32> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(cuts, (0..=32).collect::<Vec<_>>());

    assert_eq!(run(&["show-decision", "--device", "9"]), EXIT_VALIDATION);
}

#[test]
fn run_and_sweep_write_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(
        run(&[
            "run",
            "--rounds",
            "3",
            "--channel",
            "poor",
            "--out",
            out.to_str().unwrap()
        ]),
        EXIT_OK
    );
    for file in ["rounds.csv", "summary.csv", "reductions.csv"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    let rounds = std::fs::read_to_string(out.join("rounds.csv")).unwrap();
    // header + 5 devices x 3 rounds x 3 policies
    assert_eq!(rounds.lines().count(), 1 + 5 * 3 * 3);

    let sweep = dir.path().join("sweep");
    let code = run(&[
        "sweep",
        "--rounds",
        "2",
        "--param",
        "w",
        "--values",
        "0.2,0.8",
        "--out",
        sweep.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(sweep.join("sweep.csv").is_file());
    let summary = std::fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert!(summary.lines().count() > 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str| {
        let out = dir.path().join(name);
        assert_eq!(
            run(&[
                "run",
                "--rounds",
                "5",
                "--seed",
                "9",
                "--out",
                out.to_str().unwrap()
            ]),
            EXIT_OK
        );
        std::fs::read(out.join("rounds.csv")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}
