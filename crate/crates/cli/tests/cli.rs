use std::path::Path;
use std::process::{Command, Output};

fn rearrange(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rearrange")).args(args).output().unwrap()
}

fn gen(dir: &Path, n: &str, rho: &str, seed: &str) -> String {
    let path = dir.join(format!("inst_{n}_{seed}.json"));
    let path = path.to_str().unwrap().to_string();
    let out = rearrange(&["gen", "--scenario", "rand", "--n", n, "--rho", rho, "--seed", seed, "--out", &path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn gen_plan_render_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "8", "0.3", "4");
    let plan = dir.path().join("plan.json");
    let plan = plan.to_str().unwrap();
    for mode in ["ETBM", "erbm", "TBM", "RBM", "EMCTS", "MCTS"] {
        let out = rearrange(&["plan", &inst, "--mode", mode, "--objective", "ti", "--seed", "1", "--time-limit", "20", "--out", plan]);
        assert_eq!(out.status.code(), Some(0), "{mode}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let svg = dir.path().join("frames.svg");
    let out = rearrange(&["render", &inst, "--plan", plan, "--out", svg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("frames_000.svg").exists());
}

#[test]
fn plan_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "12", "0.4", "9");
    let run = || rearrange(&["plan", &inst, "--mode", "ERBM", "--seed", "3", "--time-limit", "30"]).stdout;
    let first = run();
    assert!(!first.is_empty());
    assert_eq!(first, run());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // bad flags and malformed files are invalid input
    assert_eq!(rearrange(&["gen", "--n", "5"]).status.code(), Some(2));
    assert_eq!(rearrange(&["gen", "--n", "5", "--rho", "1.5"]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"workspace\": {}}").unwrap();
    let out = rearrange(&["plan", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(rearrange(&["plan", "/no/such/file.json"]).status.code(), Some(2));
    let inst = gen(dir.path(), "5", "0.2", "0");
    assert_eq!(rearrange(&["plan", &inst, "--mode", "XYZ"]).status.code(), Some(2));

    // two halves swapping sides of the table cannot be rearranged
    let stuck = dir.path().join("stuck.json");
    std::fs::write(
        &stuck,
        r#"{"workspace": {"w": 10, "h": 10},
            "objects": [{"shape": "rect", "w": 5, "h": 10}, {"shape": "rect", "w": 5, "h": 10}],
            "start": [[2.5, 5, 0], [7.5, 5, 0]],
            "goal": [[7.5, 5, 0], [2.5, 5, 0]],
            "seed": 0}"#,
    )
    .unwrap();
    let out = rearrange(&["plan", stuck.to_str().unwrap(), "--time-limit", "0.3"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bench_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = rearrange(&[
            "bench", "--scenario", "sq", "--n", "6", "--rho", "0.3", "--modes", "ETBM,TBM,EMCTS", "--trials", "2",
            "--time-limit", "10", "--seed", "5", "--workers", "2", "--csv-out", path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    let a = run("a.csv");
    assert_eq!(a.len(), 1 + 3 * 2 + 3);
    assert_eq!(a, run("b.csv"));
}
