use std::path::Path;
use std::process::{Command, Output};

fn simlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const ANALYZE: &str =
    "[experiment]\nkind = analyze\nname = half\nseed = 11\n\n[input]\nmatrix = [0.5]\n";

#[test]
fn analyze_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.ini", ANALYZE);
    let out = dir.path().join("out");
    let o = simlab(&["analyze", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = std::fs::read_to_string(out.join("half.csv")).unwrap();
    assert!(csv.contains("# config_sha256="));
    assert!(csv.contains("# seed=11"));
    let last = csv.lines().last().unwrap();
    assert_eq!(last, "input1,1.0000000000000000e0,1,1.0000000000000000e0,1.0000000000000000e0,1.0000000000000000e0,Similar");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("half.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "r.ini",
        "[experiment]\nkind = analyze\nname = rnd\nseed = 3\n[times]\nvalues = 1, 2\n[input]\nrandom = 3\nradius = 0.7\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = simlab(&["analyze", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let ca = std::fs::read(a.join("rnd.csv")).unwrap();
    assert_eq!(ca, std::fs::read(b.join("rnd.csv")).unwrap());
    let c = dir.path().join("c");
    simlab(&[
        "analyze",
        "--config",
        &cfg,
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert_ne!(ca, std::fs::read(c.join("rnd.csv")).unwrap());
}

#[test]
fn refuses_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.ini", ANALYZE);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(
        simlab(&["analyze", "--config", &cfg, "--out", out])
            .status
            .code(),
        Some(0)
    );
    let again = simlab(&["analyze", "--config", &cfg, "--out", out]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("exists"));
    assert_eq!(
        simlab(&["analyze", "--config", &cfg, "--out", out, "--force"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn config_errors_exit_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.ini",
        "[experiment]\nkind = analyze\nseed = 1\n[input]\nmatrix = [1;2]\n",
    );
    let o = simlab(&["analyze", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
    let wrong = write(dir.path(), "w.ini", ANALYZE);
    assert_eq!(
        simlab(&["split", "--config", &wrong]).status.code(),
        Some(2)
    );
}

#[test]
fn obstructed_split_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.ini",
        "[experiment]\nkind = split\nname = s\nseed = 1\n[input]\nmatrix = [2]\n[input]\nmatrix = [0.75]\n",
    );
    let out = dir.path().join("out");
    let o = simlab(&["split", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let csv = std::fs::read_to_string(out.join("s.csv")).unwrap();
    assert!(csv.lines().last().unwrap().ends_with("SpectralObstruction"));
}

#[test]
fn crsim_and_interpolate_from_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let crsim = write(
        dir.path(),
        "c.ini",
        "[experiment]\nkind = crsim\nname = c\nseed = 1\n[times]\ndyadic = 6\n[input]\nmatrix = [-1]\nrole = generator\n",
    );
    assert_eq!(
        simlab(&["crsim", "--config", &crsim, "--out", out])
            .status
            .code(),
        Some(0)
    );
    let csv = std::fs::read_to_string(dir.path().join("out/c.csv")).unwrap();
    assert_eq!(
        csv.lines().filter(|l| l.ends_with(",Consistent")).count(),
        7
    );
    std::fs::write(dir.path().join("t.txt"), "2 2\n0.5:0 1:0\n0:0 0.25:0\n").unwrap();
    let interp = write(
        dir.path(),
        "i.ini",
        "[experiment]\nkind = interpolate\nname = i\nseed = 1\narcs = 4\n[times]\nrange = 0, 2, 9\n[input]\nmatrix = @t.txt\n",
    );
    let o = simlab(&["interpolate", "--config", &interp, "--out", out]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn verify_suites() {
    let o = simlab(&["verify", "product-laws"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS norm-multiplicativity"));
    assert_eq!(simlab(&["verify", "nope"]).status.code(), Some(2));
}
