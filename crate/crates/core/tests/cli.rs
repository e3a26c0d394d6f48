use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn freqasym(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqasym"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_gappy(path: &Path) {
    let mut s = String::from("time_s,frequency_hz\n");
    for t in (0..30).chain(40..60) {
        s.push_str(&format!("{t},{}\n", 50.0 + 0.01 * ((t % 7) as f64 - 3.0)));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn analyze_enforces_gap_policy() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    write_gappy(&input);
    let input = input.to_str().unwrap();

    let o = freqasym(&["analyze", "--input", input], &dir.path().join("a"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("gap"));

    let o = freqasym(&["analyze", "--input", input, "--gap-policy", "hold-last"], &dir.path().join("b"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("b/report.csv")).unwrap();
    let row: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[11], "60");
    let hist = fs::read_to_string(dir.path().join("b/histogram.csv")).unwrap();
    assert!(hist.starts_with("bin_center_hz,density\n"));
}

#[test]
fn analyze_compares_two_windows() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "time_s,frequency_hz\n0,49.99\n1,50.01\n2,49.98\n3,50.02\n").unwrap();
    fs::write(&b, "time_s,frequency_hz\n0,49.9\n1,50.01\n2,49.98\n3,50.02\n").unwrap();
    let o = freqasym(
        &["analyze", "--input", a.to_str().unwrap(), "--compare", b.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cmp = fs::read_to_string(dir.path().join("out/comparison.csv")).unwrap();
    let sigma_minus: Vec<&str> = cmp.lines().find(|l| l.starts_with("sigma_minus,")).unwrap().split(',').collect();
    assert!(sigma_minus[3].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn run_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let o = freqasym(&["run", "--scenario", "42", "--horizon", "5"], &dir.path().join("x"));
    assert!(!o.status.success());
    let o = freqasym(&["run", "--scenario", "1", "--full", "--seeds", "2"], &dir.path().join("y"));
    assert!(!o.status.success());
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "id = 1\nwind_generation = maybe\n").unwrap();
    let o = freqasym(&["run", "--scenario", bad.to_str().unwrap()], &dir.path().join("z"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.cfg"));
}

#[test]
fn run_writes_expected_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = freqasym(&["run", "--scenario", "2", "--seeds", "1", "--horizon", "20"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    let trace = fs::read_to_string(out.join("scenario2/trace_seed0.csv")).unwrap();
    assert_eq!(trace.lines().count(), 21);
    assert!(out.join("scenario2/summary.txt").exists());
    assert!(out.join("scenario2/seeds.csv").exists());
    assert!(out.join("scenario2/run_seed0.txt").exists());
}
