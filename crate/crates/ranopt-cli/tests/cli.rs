use std::path::Path;
use std::process::{Command, Output};

fn ranopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ranopt")).args(args).output().unwrap()
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let out = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let path = out.to_str().unwrap().to_string();
    full.extend(["--out", &path]);
    let o = ranopt(&full);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn every_subcommand_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["ch3", "--puf", "hpc", "--seed", "3"],
        &["ch3", "--puf", "tpc", "--seed", "3"],
        &["ch4", "--mode", "adaptive", "--seed", "2"],
        &["ch4", "--mode", "hybrid", "--qam-f", "16", "--seed", "2"],
        &["ch8", "--method", "ra", "--seed", "4", "--cloud", "2e7"],
    ];
    for (k, args) in cases.iter().enumerate() {
        let a = run_to(dir.path(), &format!("a{k}.csv"), args);
        let b = run_to(dir.path(), &format!("b{k}.csv"), args);
        assert_eq!(a, b, "{args:?}");
        assert!(a.iter().filter(|&&c| c == b'\n').count() >= 2, "{args:?} wrote no rows");
    }
}

#[test]
fn headers_name_the_columns() {
    let dir = tempfile::tempdir().unwrap();
    let ch3 = String::from_utf8(run_to(dir.path(), "c3.csv", &["ch3"])).unwrap();
    assert!(ch3.starts_with("iteration,user,power,sinr,bs,supported\n"));
    let ch4 = String::from_utf8(run_to(dir.path(), "c4.csv", &["ch4"])).unwrap();
    assert!(ch4.starts_with("cell,qam,tau,min_rate,fairness,objective,iterations\n"));
}

#[test]
fn sweep_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "chapter = \"ch3\"\nseeds = [1, 2]\n[sweep]\nvariable = \"x\"\nvalues = [0.2, 0.4]\n").unwrap();
    let out = dir.path().join("out");
    let o = ranopt(&["sweep", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(out.join("rows.csv")).unwrap();
    assert!(rows.starts_with("sweep,seed,metric,value\n"));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("sweep,metric,mean,count\n"));
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "chapter = \"ch9\"\n").unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert!(!ranopt(&["sweep", "--spec", bad.to_str().unwrap(), "--out", out]).status.success());
    assert!(!ranopt(&["sweep", "--spec", "/nonexistent/spec.toml", "--out", out]).status.success());
    std::fs::write(&bad, "target_sinr = \"high\"\n").unwrap();
    assert!(!ranopt(&["ch3", "--config", bad.to_str().unwrap(), "--out", out]).status.success());
    assert!(!ranopt(&["ch4", "--mode", "sideways", "--out", out]).status.success());
}
