use std::fs;
use std::path::Path;
use std::process::Command;

use porgysim::commands::main_with;
use tempfile::TempDir;

const STAR: &str = "c l0\nc l1\nc l2\n";

struct Outcome {
    code: i32,
    out: String,
    err: String,
}

fn porgysim(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("porgysim".to_owned()).chain(args.iter().map(|s| s.to_string()));
    let code = main_with(argv, &mut out, &mut err);
    Outcome {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn file(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn star_run(dir: &TempDir, out: &str) -> Outcome {
    let g = file(dir.path(), "star.txt", STAR);
    let out = dir.path().join(out);
    porgysim(&[
        "run", "--graph", &g, "--model", "ic", "--seeds", "c", "--p", "const:1.0", "--rng", "42", "--rounds", "10",
        "--out", out.to_str().unwrap(),
    ])
}

#[test]
fn star_metrics_file() {
    let dir = TempDir::new().unwrap();
    let r = star_run(&dir, "trace");
    assert_eq!(r.code, 0, "{}", r.err);
    let csv = fs::read_to_string(dir.path().join("trace/metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,active,visited,efficiency");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,1,0,"));
    assert!(lines[2].starts_with("2,4,3,") || lines[2].starts_with("1,4,3,"));
    for name in ["events.jsonl", "tree.dot", "session.json"] {
        assert!(dir.path().join("trace").join(name).exists(), "{name}");
    }
    assert!(r.out.contains("round 1: "), "{}", r.out);
}

#[test]
fn lt_without_theta() {
    let dir = TempDir::new().unwrap();
    let g = file(dir.path(), "star.txt", STAR);
    let r = porgysim(&["run", "--graph", &g, "--model", "lt", "--seeds", "c"]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("theta required for LT"), "{}", r.err);
    assert!(r.err.starts_with("error[config]"), "{}", r.err);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(porgysim(&["frobnicate"]).code, 2);
    assert_eq!(porgysim(&["run", "--rounds", "x"]).code, 2);
    let r = porgysim(&["run", "--model", "ic", "--seeds", "a", "--p", "const:1"]);
    assert_eq!(r.code, 2, "{}", r.err);
    assert!(r.err.contains("--graph"));
    assert_eq!(porgysim(&["validate"]).code, 2);
    assert_eq!(porgysim(&["--help"]).code, 0);
}

#[test]
fn domain_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let g = file(dir.path(), "bad.txt", "a\n");
    let r = porgysim(&["validate", "--graph", &g]);
    assert_eq!(r.code, 1);
    assert!(r.err.starts_with("error[graph]"), "{}", r.err);
    assert!(r.err.contains("missing endpoint"));
    let missing = dir.path().join("absent.json");
    assert_eq!(porgysim(&["metrics", "--session", missing.to_str().unwrap()]).code, 1);
}

#[test]
fn csv_on_stdout_without_out() {
    let dir = TempDir::new().unwrap();
    let g = file(dir.path(), "star.txt", STAR);
    let r = porgysim(&["run", "--graph", &g, "--model", "ic", "--seeds", "c", "--p", "const:1.0"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("step,active,visited,efficiency\n0,1,0,\n"), "{}", r.out);
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let g = file(dir.path(), "star.txt", STAR);
    let cfg = file(
        dir.path(),
        "model.toml",
        "[model]\nkind = \"ic\"\n\n[init]\nseeds = [\"l0\"]\np = \"const:1.0\"\n\n[rng]\nseed = 3\n",
    );
    let r = porgysim(&["run", "--graph", &g, "--config", &cfg]);
    assert_eq!(r.code, 0, "{}", r.err);
    // From a leaf only the centre is reachable, then the other leaves.
    assert!(r.out.contains("\n0,1,0,\n"), "{}", r.out);
    assert!(r.out.contains(",4,"), "{}", r.out);
    let r = porgysim(&["run", "--graph", &g, "--config", &cfg, "--p", "const:0.0"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(!r.out.contains(",4,"), "{}", r.out);
}

#[test]
fn compare_two_runs() {
    let dir = TempDir::new().unwrap();
    let g = file(dir.path(), "path.txt", "a b\nb c\nc d\n");
    for (name, extra) in [("ic", &[][..]), ("lt", &["--theta", "const:0.99"][..])] {
        let out = dir.path().join(name);
        let mut args = vec!["run", "--graph", &g, "--model", name, "--seeds", "a", "--p", "const:1.0", "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let r = porgysim(&args);
        assert_eq!(r.code, 0, "{}", r.err);
    }
    let ic = dir.path().join("ic/metrics.csv");
    let lt = dir.path().join("lt/session.json");
    let r = porgysim(&["compare", ic.to_str().unwrap(), lt.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);
    let lines: Vec<&str> = r.out.lines().collect();
    assert_eq!(lines[0], "step,ic_active,lt_active,gap");
    assert_eq!(lines[1], "0,1,1,0");
    assert_eq!(*lines.last().unwrap(), "3,4,4,0");
    let r = porgysim(&["compare", ic.to_str().unwrap(), ic.to_str().unwrap(), "--labels", "x,y"]);
    assert!(r.out.starts_with("step,x_active,y_active,gap\n"));
    assert_eq!(porgysim(&["compare", ic.to_str().unwrap(), ic.to_str().unwrap(), "--labels", "x"]).code, 2);
}

#[test]
fn validate_files() {
    let dir = TempDir::new().unwrap();
    let g = file(dir.path(), "g.txt", STAR);
    let s = file(dir.path(), "ic.strat", "repeat(IC trial d2s);\nrepeat(IC activate)\n");
    let r = porgysim(&["validate", "--graph", &g, "--strategy", &s]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("graph ok: 4 nodes, 8 ports, 3 edges"), "{}", r.out);
    assert!(r.out.contains("strategy ok: 2 instructions"), "{}", r.out);
    let bad = file(dir.path(), "bad.strat", "repeat(Nope)");
    let r = porgysim(&["validate", "--strategy", &bad]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("unknown rule `Nope`"), "{}", r.err);
    let broken = file(dir.path(), "broken.strat", "repeat(IC activate");
    assert_eq!(porgysim(&["validate", "--strategy", &broken]).code, 1);
}

#[test]
fn generate_and_run() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("g.json");
    let r = porgysim(&["generate", "--nodes", "40", "--edges-per-node", "2", "--rng", "7", "--out", g.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);
    let again = porgysim(&["generate", "--nodes", "40", "--edges-per-node", "2", "--rng", "7"]);
    assert_eq!(again.out.as_bytes(), fs::read(&g).unwrap());
    let r = porgysim(&["validate", "--graph", g.to_str().unwrap()]);
    assert!(r.out.contains("40 nodes, 80 ports, 77 edges"), "{}", r.out);
    let r = porgysim(&["run", "--graph", g.to_str().unwrap(), "--model", "ic", "--seeds", "n0", "--p", "const:1.0"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let last = r.out.lines().last().unwrap();
    assert!(last.contains(",40,"), "{last}");
}

#[test]
fn generate_imports_edge_lists() {
    let dir = TempDir::new().unwrap();
    let list = file(dir.path(), "l.txt", "x y 0.5 0.25\n");
    let r = porgysim(&["generate", "--import", &list]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("0.25"));
}

#[test]
fn step_resumes_session() {
    let dir = TempDir::new().unwrap();
    let g = file(dir.path(), "path.txt", "a b\nb c\nc d\n");
    let out = dir.path().join("one");
    let r = porgysim(&[
        "run", "--graph", &g, "--model", "ic", "--seeds", "a", "--p", "const:1.0", "--rounds", "1", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let session = out.join("session.json");
    let s = session.to_str().unwrap();
    let r = porgysim(&["metrics", "--session", s]);
    assert_eq!(r.out, "step,active,visited,efficiency\n0,1,0,\n1,2,1,2\n");
    let r = porgysim(&["step", "--session", s]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("round 2: ") && r.out.contains("active 3, visited 2"), "{}", r.out);
    let r = porgysim(&["metrics", "--session", s, "--json"]);
    let v: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(v["steps"].as_array().unwrap().len(), 3);

    // Continuing the full run in one go matches the stepped session.
    let full = dir.path().join("full");
    porgysim(&["run", "--graph", &g, "--model", "ic", "--seeds", "a", "--p", "const:1.0", "--out", full.to_str().unwrap()]);
    let stepped = dir.path().join("stepped");
    let r = porgysim(&["step", "--session", s, "--rounds", "5", "--out", stepped.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(
        fs::read(full.join("metrics.csv")).unwrap(),
        fs::read(stepped.join("metrics.csv")).unwrap()
    );
}

#[test]
fn step_from_earlier_state_branches() {
    let dir = TempDir::new().unwrap();
    let g = file(dir.path(), "path.txt", "a b\nb c\n");
    let out = dir.path().join("t");
    porgysim(&["run", "--graph", &g, "--model", "ic", "--seeds", "a", "--p", "const:1.0", "--out", out.to_str().unwrap()]);
    let s = out.join("session.json");
    let r = porgysim(&["step", "--session", s.to_str().unwrap(), "--from", "0"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&s).unwrap()).unwrap();
    let text = doc.to_string();
    assert!(text.contains("\"cursor\""));
    let r = porgysim(&["step", "--session", s.to_str().unwrap(), "--from", "999"]);
    assert_eq!(r.code, 1);
}

#[test]
fn binary_exit_status() {
    let bin = env!("CARGO_BIN_EXE_porgysim");
    let st = Command::new(bin).args(["run", "--model", "lt", "--seeds", "x"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stderr).contains("theta required for LT"));
    let st = Command::new(bin).arg("nonsense").output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}
