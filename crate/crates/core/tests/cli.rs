use std::path::Path;

use oorl::cli::main_with;
use oorl::harness::{parse_csv, ExperimentSpec};

fn run(args: &[&str]) -> i32 {
    main_with(std::iter::once("oorl").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_env_then_diag_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("pair.env");
    assert_eq!(
        run(&[
            "gen-env",
            "--states",
            "3",
            "--actions",
            "2",
            "--horizon",
            "2",
            "--delta",
            "0.2",
            "--out",
            s(&env)
        ]),
        0
    );
    assert!(std::fs::read_to_string(&env)
        .unwrap()
        .contains("offline.2.1 ="));
    assert_eq!(run(&["diag", "--env", s(&env), "--m-off", "500"]), 0);
}

#[test]
fn run_writes_curves_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.spec");
    std::fs::write(
        &spec,
        "states = 3\nactions = 2\nhorizon = 2\nenv_seed = 2\naxis = delta\nvalues = 0 0.5\nepisodes = 15\nm_off = 100\n\
         repeats = 2\nbonus_scale = 0.2\n",
    )
    .unwrap();
    let (out, agg) = (dir.path().join("c.csv"), dir.path().join("a.csv"));
    assert_eq!(
        run(&[
            "run",
            "--spec",
            s(&spec),
            "--out",
            s(&out),
            "--aggregate",
            s(&agg)
        ]),
        0
    );
    let curves = parse_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(curves.len(), 2 * 3 * 2);
    assert!(curves.iter().all(|c| c.cum_regret.len() == 15));
    assert_eq!(
        std::fs::read_to_string(&agg)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .count(),
        1 + 2 * 3
    );
    // the echoed config parses back to the same spec
    let text = std::fs::read_to_string(&out).unwrap();
    let echo: String = text
        .lines()
        .filter_map(|l| l.strip_prefix("# config: "))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_eq!(
        ExperimentSpec::parse(&echo).unwrap(),
        ExperimentSpec::read(&spec).unwrap()
    );
}

#[test]
fn sweep_and_bound_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let code = run(&[
        "sweep",
        "--axis",
        "m-off",
        "--values",
        "10,100",
        "--states",
        "2",
        "--actions",
        "2",
        "--horizon",
        "2",
        "--episodes",
        "5",
        "--repeats",
        "1",
        "--bonus-scale",
        "0.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let bound = dir.path().join("b.csv");
    assert_eq!(run(&["bound", "--points", "4", "--out", s(&bound)]), 0);
    let text = std::fs::read_to_string(&bound).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("tau,delta,term_a,term_b,informative")
    );
    assert_eq!(text.lines().count(), 1 + 16);
}

#[test]
fn invalid_specs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.spec");
    std::fs::write(
        &spec,
        "axis = delta\nvalues = 3\nrepeats = 0\nbonus_scale = 2\n",
    )
    .unwrap();
    let out = dir.path().join("never.csv");
    assert_eq!(run(&["run", "--spec", s(&spec), "--out", s(&out)]), 2);
    assert!(!out.exists());
    assert_eq!(
        run(&["sweep", "--axis", "delta", "--values=-1", "--out", s(&out)]),
        2
    );
    assert_eq!(run(&["gen-env", "--delta", "3", "--out", s(&out)]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
}

#[test]
fn corrupt_kernels_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("pair.env");
    assert_eq!(
        run(&[
            "gen-env",
            "--states",
            "2",
            "--actions",
            "1",
            "--horizon",
            "2",
            "--out",
            s(&env)
        ]),
        0
    );
    let text = std::fs::read_to_string(&env).unwrap();
    let broken: String = text
        .lines()
        .map(|l| {
            if l.starts_with("online.0.0 =") {
                "online.0.0 = 0.9 0.9".to_string()
            } else {
                l.to_string()
            }
        })
        .map(|l| l + "\n")
        .collect();
    std::fs::write(&env, broken).unwrap();
    assert_eq!(run(&["diag", "--env", s(&env)]), 3);
}

#[test]
fn missing_files_exit_with_one() {
    assert_eq!(run(&["diag", "--env", "/nonexistent/pair.env"]), 1);
}
