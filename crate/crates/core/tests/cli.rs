//! End-to-end smoke tests for the command-line front end, exercising the
//! documented exit codes and file formats.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quantavg"))
}

#[test]
fn gen_graph_simulate_analyze_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("path3.txt");
    let trace = dir.path().join("trace.csv");
    let verdict = dir.path().join("verdict.json");
    let report = dir.path().join("report.csv");

    let out = bin()
        .args(["gen-graph", "--family", "path", "--n", "3", "--out"])
        .arg(&graph)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&graph).unwrap();
    assert!(text.starts_with("3 2"), "edge-list header: {text}");

    let out = bin()
        .args(["simulate", "--graph"])
        .arg(&graph)
        .args(["--weights", "modified", "--C", "2", "--x0", "0,1,2", "--quantizer", "trunc"])
        .arg("--trace-out")
        .arg(&trace)
        .arg("--verdict-out")
        .arg(&verdict)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let vjson = std::fs::read_to_string(&verdict).unwrap();
    assert!(vjson.contains("\"kind\""), "verdict: {vjson}");
    let tcsv = std::fs::read_to_string(&trace).unwrap();
    assert!(tcsv.starts_with("k,i,x_num,x_den,floor_x"), "trace header: {tcsv}");

    let out = bin()
        .args(["analyze", "--trace"])
        .arg(&trace)
        .arg("--verdict")
        .arg(&verdict)
        .arg("--graph")
        .arg(&graph)
        .args(["--weights", "modified", "--C", "2", "--out"])
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rcsv = std::fs::read_to_string(&report).unwrap();
    assert!(rcsv.starts_with("k,m,M,V_num,V_den,n_X1"), "report header: {rcsv}");
}

#[test]
fn simulate_rejects_bad_weights_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("k2.txt");
    std::fs::write(&graph, "2 1\n0 1\n").unwrap();
    let out = bin()
        .args(["simulate", "--graph"])
        .arg(&graph)
        .args(["--weights", "two-node", "--w", "1/25", "--x0", "3/10,53/10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--force"), "stderr: {err}");

    // Same invocation with --force runs and reports the cycle.
    let out = bin()
        .args(["simulate", "--graph"])
        .arg(&graph)
        .args(["--weights", "two-node", "--w", "1/25", "--x0", "3/10,53/10", "--force"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let json = String::from_utf8_lossy(&out.stdout);
    assert!(json.contains("\"cycle\"") && json.contains("\"period\": 2"), "stdout: {json}");
}

#[test]
fn verify_passes_on_seeded_instances() {
    let out = bin()
        .args(["verify", "--n", "6", "--runs", "4", "--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("all monitors passed"));
}

#[test]
fn experiment_runs_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        "graph = er\nn = 6\np = 1/2\nweights = modified\nC = 2\nruns = 3\nseed = 5\nout_dir = OUT\n"
            .replace("OUT", dir.path().join("out").to_str().unwrap()),
    )
    .unwrap();
    let out = bin().args(["experiment", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("parameter,runs,consensus,cycle"), "stdout: {stdout}");
    assert!(dir.path().join("out/sweep.csv").is_file());
}

#[test]
fn usage_errors_exit_one() {
    let out = bin().args(["simulate", "--x0", "1,2"]).output().unwrap(); // missing --graph
    assert_eq!(out.status.code(), Some(1));
    let out = bin().arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
