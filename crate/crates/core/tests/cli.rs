use std::path::PathBuf;
use std::process::{Command, Output};

fn instance(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("instances").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minimax-mdp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exit_codes_separate_infeasible_from_errors() {
    let ok = run(&["feasible", "--instance", instance("three_step.json").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = run(&["feasible", "--instance", instance("three_step_tight.json").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stdout(&bad).contains("\"alpha\": 1"));
    let missing = run(&["feasible", "--instance", "/definitely/not/here.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(missing.stdout.is_empty());
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{\n  \"T\": 2,\n  \"states\": [[\"a\"]\n").unwrap();
    let o = run(&["feasible", "--instance", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line "));
}

#[test]
fn exported_policy_replays() {
    let dir = tempfile::tempdir().unwrap();
    let pol = dir.path().join("policy.json");
    let inst = instance("three_step.json");
    let o = run(&["policy", "--instance", inst.to_str().unwrap(), "--out", pol.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let sim = |extra: &[&str]| {
        let mut args = vec!["simulate", "--instance", inst.to_str().unwrap(), "--policy", pol.to_str().unwrap()];
        args.extend_from_slice(extra);
        run(&args)
    };
    let all = sim(&["--format", "csv"]);
    assert_eq!(all.status.code(), Some(0));
    assert_eq!(stdout(&all), "path,inventory,actions,violations\na b1 c,0 2 3,2 1,0\na b2 c,0 2 4,2 2,0\n");
    assert_eq!(stdout(&sim(&["--format", "csv"])), stdout(&all));
    let one = sim(&["--path", "a,b1,c"]);
    assert!(stdout(&one).contains("\"feasible\": true"));
}

#[test]
fn ordering_optimum_and_policy_file() {
    let dir = tempfile::tempdir().unwrap();
    let pol = dir.path().join("cr.json");
    let o = run(&[
        "rmowp",
        "cr",
        "--instance",
        instance("two_day.json").to_str().unwrap(),
        "--policy-out",
        pol.to_str().unwrap(),
        "--verify",
        "--grid",
        "1/4",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("phi_star,\"2/3\""));
    assert!(text.contains("reduction_feasible_at_optimum,\"true\""));
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(pol).unwrap()).unwrap();
    assert_eq!(saved["scale"], "4/3");
}

#[test]
fn sensitivity_is_stable_and_handles_empty_sweeps() {
    let inst = instance("two_day.json");
    let args = ["sensitivity", "--instance", inst.to_str().unwrap(), "--metric", "regret", "--field", "delta", "--day", "2", "--values", "0,1/2,1"];
    let a = stdout(&run(&args));
    assert_eq!(a, stdout(&run(&args)));
    let vals: Vec<&str> = a.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(vals, ["1/2", "1/2", "1/2"]);
    let empty = run(&["sensitivity", "--instance", inst.to_str().unwrap(), "--metric", "cr", "--field", "v", "--day", "2"]);
    assert_eq!(stdout(&empty), "value,optimum,optimum_decimal,bottleneck_day,note\n");
}

#[test]
fn application_subcommands() {
    let o = run(&["rrawp", "cr", "--instance", instance("unit_boxes.json").to_str().unwrap(), "--format", "csv"]);
    assert!(stdout(&o).contains("phi_star,\"3/4\""));
    let o = run(&["rrawp", "cr", "--instance", instance("unit_boxes.json").to_str().unwrap(), "--phi", "4/5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["multiphase", "cr", "--instance", instance("changing_cost_shifted.json").to_str().unwrap(), "--format", "csv"]);
    assert!(stdout(&o).contains("phi_star,\"3/4\""));
    let o = run(&["multiphase", "check", "--instance", instance("two_phase.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn oracle_report_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["oracle", "run", "--suite", "feasibility,pwl", "--seeds", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["suites"].as_array().unwrap().len(), 2);
    let bad = run(&["oracle", "run", "--suite", "nonsense"]);
    assert_eq!(bad.status.code(), Some(1));
}
