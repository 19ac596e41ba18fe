use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_calibra"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("CALIBRA_THREADS", "1")
        .status()
        .expect("binary runs");
    status.code().expect("exit code")
}

fn cmd(sub: &str, cfg: &str, out: &Path, extra: &[&str]) -> i32 {
    let cfg = fixture(cfg);
    let mut args = vec![sub, "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args, out)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn audit_fixture_headline() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cmd("audit", "audit.json", tmp.path(), &["--format", "json,csv"]), 0);
    let report = json(&tmp.path().join("audit.json"));
    assert_eq!(report["headline_gap"].as_f64().unwrap(), 0.25);
    assert_eq!(report["schema"], "calibra.audit");
    for r in report["reports"].as_array().unwrap() {
        let slug = r["metric"].as_str().unwrap().replace('_', "-");
        let csv = std::fs::read_to_string(tmp.path().join(format!("audit-{slug}.csv"))).unwrap();
        assert_eq!(csv.lines().count() - 1, r["entries"].as_array().unwrap().len(), "{slug}");
        assert!(csv.starts_with("group,slice,index,cell,gap\n"));
    }
}

#[test]
fn reports_are_byte_identical() {
    for (sub, cfg) in [("audit", "audit.json"), ("learn", "learn.json"), ("rules", "rules.json"), ("omnipredict", "omnipredict.json")] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fmt = ["--format", "json,csv,plotdata"];
        assert_eq!(cmd(sub, cfg, a.path(), &fmt), 0, "{sub}");
        assert_eq!(cmd(sub, cfg, b.path(), &fmt), 0, "{sub}");
        let (ta, tb) = (tree(a.path()), tree(b.path()));
        assert!(!ta.is_empty());
        assert_eq!(ta, tb, "{sub}");
    }
}

#[test]
fn generate_is_seeded() {
    let cfg = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(
        cfg.path(),
        r#"{"schema":"calibra.run","version":1,"seeds":[5,6],"generate":{"size":16,"k":3,"groups":3,"deterministic":false,"with_predictor":true}}"#,
    )
    .unwrap();
    let path = cfg.path().to_str().unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(&["generate", "--config", path], a.path()), 0);
    assert_eq!(run(&["generate", "--config", path], b.path()), 0);
    assert_eq!(tree(a.path()), tree(b.path()));
    let s5 = std::fs::read(a.path().join("seed-5/instance.json")).unwrap();
    let s6 = std::fs::read(a.path().join("seed-6/instance.json")).unwrap();
    assert_ne!(s5, s6);

    let c = tempfile::tempdir().unwrap();
    assert_eq!(run(&["generate", "--config", path, "--seed", "5"], c.path()), 0);
    assert_eq!(std::fs::read(c.path().join("instance.json")).unwrap(), s5);
}

#[test]
fn learn_writes_trace_and_curve() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cmd("learn", "learn.json", tmp.path(), &["--format", "json,plotdata"]), 0);
    let dir = tmp.path().join("seed-1");
    let report = json(&dir.join("learn.json"));
    assert_eq!(report["converged"], true);
    assert!(report["final_gap"].as_f64().unwrap() <= 0.05);
    let trace = std::fs::read_to_string(dir.join("trace.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), report["iterations"].as_u64().unwrap() as usize + 1);
    assert!(lines.last().unwrap().get("summary").is_some());
    let curve = std::fs::read_to_string(dir.join("gap-vs-alpha.tsv")).unwrap();
    assert_eq!(curve.lines().count(), 4);
    assert!(!dir.join("predictor.csv").exists());
}

#[test]
fn budget_exhaustion_exits_two_with_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cmd("learn", "learn_starved.json", tmp.path(), &[]), 2);
    let report = json(&tmp.path().join("learn.json"));
    assert_eq!(report["converged"], false);
    assert!(tmp.path().join("predictor.csv").exists());
}

#[test]
fn malformed_config_exits_one_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(cmd("audit", "malformed.json", &out, &[]), 1);
    assert!(!out.exists());
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // Section for a different command.
    assert_eq!(cmd("learn", "audit.json", &out, &[]), 1);
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"schema":"calibra.run","version":1,"seeds":[0],"input":"nope.json","audit":{"metrics":["ma-cw"]}}"#).unwrap();
    assert_eq!(run(&["audit", "--config", cfg.to_str().unwrap()], &out), 1);
    std::fs::write(&cfg, r#"{"schema":"calibra.run","version":1,"seeds":[],"rules":{"rule":{"kind":"constant","k":2,"p":"0.5"}}}"#).unwrap();
    assert_eq!(run(&["rules", "--config", cfg.to_str().unwrap()], &out), 1);
    std::fs::write(&cfg, r#"{"schema":"calibra.run","version":2,"seeds":[0],"rules":{"rule":{"kind":"constant","k":2,"p":"0.5"}}}"#).unwrap();
    assert_eq!(run(&["rules", "--config", cfg.to_str().unwrap()], &out), 1);
    assert!(!out.exists());
}

#[test]
fn rules_certifies_step_rule() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cmd("rules", "rules.json", tmp.path(), &["--format", "json,csv"]), 0);
    let r = json(&tmp.path().join("rules.json"));
    assert_eq!(r["affine"], false);
    assert!(r["lipschitz"].is_null());
    let grid = std::fs::read_to_string(tmp.path().join("rule-grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 12);
}

#[test]
fn hardness_report_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let code = cmd("hardness", "hardness_small.json", tmp.path(), &["--format", "json,csv,plotdata"]);
    let text = std::fs::read_to_string(tmp.path().join("conflict-report.json")).unwrap();
    let report: calibra::hardness::ConflictReport = serde_json::from_str(&text).unwrap();
    assert_eq!(code, if report.verdict == calibra::hardness::Verdict::Fail { 2 } else { 0 });
    assert_eq!(calibra::report::to_canonical_json(&report).unwrap(), text);
    for t in &report.trials {
        assert_eq!(t.recompute_verdict(report.experiment, report.config.alpha), t.verdict);
    }
    let csv = std::fs::read_to_string(tmp.path().join("trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), report.trials.len() + 1);
}
