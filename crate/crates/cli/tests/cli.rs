use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn resources() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/resources")
}

fn tandem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tandem")).args(args).output().expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let suite = resources().join("suites/stall.toml");
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = tandem(&["run", path_arg(&suite), "--deterministic", "--parallel", "2", "--out", path_arg(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("SR: 1.0000"));
    }
    let files = files_under(&a);
    assert_eq!(files, files_under(&b));
    assert!(files.iter().any(|f| f.ends_with("report.tsv")));
    for f in files {
        assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap(), "{}", f.display());
    }
    let traces: Vec<String> = files_under(&a.join("traces")).iter().map(|f| path_arg(&a.join("traces").join(f)).to_string()).collect();
    let mut args = vec!["replay"];
    args.extend(traces.iter().map(String::as_str));
    let o = tandem(&args);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).matches("MATCH").count(), traces.len());
}

#[test]
fn replay_verifies_golden_traces() {
    let mut traces = Vec::new();
    for dir in ["stall", "random"] {
        let d = resources().join("golden").join(dir);
        traces.extend(files_under(&d).into_iter().map(|f| path_arg(&d.join(f)).to_string()));
    }
    let mut args = vec!["replay"];
    args.extend(traces.iter().map(String::as_str));
    let o = tandem(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().filter(|l| l.starts_with("MATCH ")).count(), traces.len());
}

#[test]
fn replay_reports_divergence() {
    let src = resources().join("golden/stall/settings_wifi_on.jsonl");
    let text = std::fs::read_to_string(src).unwrap().replacen("\"screen_after\":\"settings_network\"", "\"screen_after\":\"settings_home\"", 1);
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.jsonl");
    std::fs::write(&bad, text).unwrap();
    let o = tandem(&["replay", path_arg(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("DIVERGENCE"));
}

#[test]
fn bench_compares_three_arms() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = resources().join("suites/stall.toml");
    let o = tandem(&["bench", path_arg(&suite), "--deterministic", "--out", path_arg(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(tmp.path().join("comparison.txt")).unwrap();
    assert_eq!(String::from_utf8_lossy(&o.stdout), table);
    for arm in ["collaborative", "cloud_only", "device_only"] {
        assert!(table.contains(arm));
        assert!(tmp.path().join(arm).join("report.tsv").exists());
    }
    let collab = table.lines().find(|l| l.starts_with("collaborative")).unwrap();
    let saved: f64 = collab.split_whitespace().last().unwrap().parse().unwrap();
    assert!(saved > 0.0);
}

#[test]
fn grpo_demo_writes_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = resources().join("runs/bandit.toml");
    let o = tandem(&["grpo-demo", path_arg(&cfg), "--out", path_arg(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curve = std::fs::read_to_string(tmp.path().join("curve.tsv")).unwrap();
    assert_eq!(curve.lines().count(), 501);
    assert!(curve.starts_with("iteration\ttarget_prob"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("reached 0.95"));
}

#[test]
fn validate_pack_accepts_bundled_and_rejects_broken() {
    let pack = resources().join("packs/bundled.json");
    let o = tandem(&["validate-pack", path_arg(&pack)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("23 tasks"));

    let tmp = tempfile::tempdir().unwrap();
    let broken = tmp.path().join("broken.json");
    std::fs::write(&broken, std::fs::read_to_string(&pack).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 9", 1)).unwrap();
    let o = tandem(&["validate-pack", path_arg(&broken)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn rejects_bad_flags() {
    let suite = resources().join("suites/gold.toml");
    assert!(!tandem(&["run", path_arg(&suite), "--mode", "oracle"]).status.success());
    let o = tandem(&["run", path_arg(&suite), "--parallel", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
