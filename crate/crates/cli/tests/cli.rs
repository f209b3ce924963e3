use std::path::Path;
use std::process::{Command, Output};

fn dpse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpse"))
        .args(args)
        .env_remove("DPSE_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dpse(args);
    assert!(
        out.status.success(),
        "dpse {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn bounds_report() {
    let s = ok(&["bounds", "--beta", "1e-3", "--eps", "1", "--n", "1000"]);
    assert!(s.contains("eta = 0.006908"), "{s}");
}

#[test]
fn gen_then_estimate_every_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let truth = dir.path().join("truth.csv");
    ok(&[
        "gen", "--d", "8", "--k", "2", "--n", "2000", "--seed", "3", "--out", p(&data), "--truth-out", p(&truth),
    ]);
    let rows = std::fs::read_to_string(&data).unwrap();
    assert_eq!(rows.lines().count(), 2000);
    assert_eq!(rows.lines().next().unwrap().split(',').count(), 8);
    assert_eq!(std::fs::read_to_string(&truth).unwrap().lines().count(), 8);

    for alg in ["threshold", "cwz", "subset-sel", "nonprivate"] {
        let out = dir.path().join(format!("{alg}.csv"));
        ok(&[
            "estimate", "--alg", alg, "--eps", "1", "--k", "2", "--r-inf", "10", "--seed", "1", "--in", p(&data),
            "--out", p(&out), "--alpha", "1",
        ]);
        let est = std::fs::read_to_string(&out).unwrap();
        let mut lines = est.lines();
        assert_eq!(lines.next(), Some("coordinate,value"));
        let nonzero = lines.filter(|l| !l.ends_with(",0.0000000000000000e0")).count();
        assert!(nonzero <= 2, "{alg}: {est}");
    }
}

#[test]
fn experiment_is_deterministic_and_respects_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(&cfg, "d = 100\nk = 5\nn = 400\nr_inf_sweep = 10, 20\n").unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        ok(&[
            "experiment", "--preset", "fig1", "--config", p(&cfg), "--set", "algorithms=threshold,cwz", "--seeds", "0..3",
            "--out", p(out), "--quiet",
        ]);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("experiment,algorithm,sweep_value,seed,metric,value"));
    // 2 algorithms x 2 sweep values x 3 seeds x 2 metrics
    assert_eq!(lines.count(), 24);
}

#[test]
fn experiment_records_scale_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("s.csv");
    let out = dpse(&[
        "experiment", "--set", "d=60", "--set", "k=5", "--set", "n=200", "--set", "algorithms=subset_sel", "--set",
        "r_inf_sweep=1", "--seeds", "0", "--out", p(&out_path), "--quiet",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("scale limit exceeded"));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with(",NaN")).count(), 2);
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: Option<&str>, name: &str| {
        let path = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dpse"));
        cmd.args(["gen", "--d", "3", "--k", "1", "--n", "5", "--out", p(&path)]);
        match seed {
            Some(s) => cmd.env("DPSE_SEED", s),
            None => cmd.env_remove("DPSE_SEED"),
        };
        let out = cmd.output().unwrap();
        assert!(out.status.success());
        std::fs::read_to_string(path).unwrap()
    };
    assert_eq!(run(Some("0"), "a.csv"), run(None, "b.csv"));
    assert_ne!(run(Some("7"), "c.csv"), run(None, "d.csv"));
}

#[test]
fn robustness_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let pass = dpse(&[
        "robustness", "--mech", "laplace_mean", "--trials", "2000", "--n", "300", "--t", "1,2", "--out", p(&csv),
    ]);
    assert!(pass.status.success(), "{}", String::from_utf8_lossy(&pass.stdout));
    assert!(String::from_utf8_lossy(&pass.stdout).contains("overall: PASS"));
    assert!(std::fs::read_to_string(&csv).unwrap().contains("failure_rate"));

    let fail = dpse(&[
        "robustness", "--mech", "empirical_mean", "--trials", "2000", "--n", "300", "--t", "5", "--magnitude", "1e4",
        "--target-beta", "0.002",
    ]);
    assert_eq!(fail.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&fail.stdout).contains("overall: FAIL"));
}

#[test]
fn rejects_bad_input() {
    assert!(!dpse(&["estimate", "--alg", "magic", "--eps", "1", "--k", "1", "--r-inf", "1", "--in", "x", "--out", "y"])
        .status
        .success());
    assert!(!dpse(&["experiment", "--preset", "fig9", "--out", "/tmp/never.csv"]).status.success());
    assert!(!dpse(&["bounds", "--beta", "2", "--eps", "1", "--n", "10"]).status.success());
}
