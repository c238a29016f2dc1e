use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wiener_chaos::independence::criterion_check;
use wiener_chaos::io::load_kernel;
use wiener_chaos::sequences::{generate, Family, FamilySpec};

fn wiener(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wiener"))
        .args(args)
        .output()
        .expect("run wiener")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV output, split into cells, after the comment header
/// and the column line.
fn rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let cols = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (cols, rows)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const E1: &str = r#"{ "dimension": 2, "order": 1, "entries": [ { "index": [1], "value": 1.0 } ] }"#;
const E2: &str = r#"{ "dimension": 2, "order": 1, "entries": [ { "index": [2], "value": 1.0 } ] }"#;
const E11: &str = r#"{ "dimension": 2, "order": 2, "entries": [ { "index": [1, 1], "value": 1.0 } ] }"#;
const E22: &str = r#"{ "dimension": 2, "order": 2, "entries": [ { "index": [2, 2], "value": 1.0 } ] }"#;

#[test]
fn contract_examples() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", E11);
    let g = write(dir.path(), "g.json", E22);
    for r in ["1", "2"] {
        let o = wiener(&["contract", s(&f), s(&g), "-r", r]);
        assert!(o.status.success());
        let (cols, data) = rows(&stdout(&o));
        assert_eq!(cols[2], "contraction_norm");
        assert_eq!(data[0][2], "0e0");
    }
    let o = wiener(&["contract", s(&f), s(&f), "-r", "1"]);
    let (_, data) = rows(&stdout(&o));
    assert_eq!(data[0][2].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn contract_json_reloads_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let ft = r#"{ "dimension": 3, "order": 3, "entries": [
        { "index": [1, 1, 2], "value": 0.3 }, { "index": [1, 2, 3], "value": -0.7 },
        { "index": [3, 3, 3], "value": 0.11 } ] }"#;
    let gt = r#"{ "dimension": 3, "order": 2, "entries": [
        { "index": [1, 3], "value": 1.3 }, { "index": [2, 2], "value": 0.2 } ] }"#;
    let f = write(dir.path(), "f.json", ft);
    let g = write(dir.path(), "g.json", gt);
    let out = dir.path().join("c.json");
    let o = wiener(&["contract", s(&f), s(&g), "-r", "1", "--format", "json", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let back = load_kernel(&out).unwrap();
    let expect = load_kernel(&f).unwrap().contract_sym(&load_kernel(&g).unwrap(), 1).unwrap();
    assert_eq!(back.len(), expect.len());
    for ((a, x), (b, y)) in back.iter().zip(expect.iter()) {
        assert_eq!(a, b);
        assert_eq!(x.to_bits(), y.to_bits());
    }
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["header"]["generator"], "chacha8-as241-v1");
    assert_eq!(doc["header"]["r"], 1);
}

#[test]
fn cov2_examples() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "e1.json", E1);
    write(dir.path(), "e2.json", E2);
    let disjoint = write(
        dir.path(),
        "disjoint.json",
        r#"{ "groups": [ { "order": 1, "elements": ["e1.json"] }, { "order": 1, "elements": ["e2.json"] } ] }"#,
    );
    let (_, data) = rows(&stdout(&wiener(&["cov2", s(&disjoint)])));
    assert_eq!(data.len(), 1);
    assert_eq!(&data[0][2..4], ["0e0", "0e0"]);

    let dup = write(
        dir.path(),
        "dup.json",
        r#"{ "groups": [ { "order": 1, "elements": ["e1.json"] }, { "order": 1, "elements": ["e1.json"] } ] }"#,
    );
    let (_, data) = rows(&stdout(&wiener(&["cov2", s(&dup)])));
    assert_eq!(data[0][2], "2e0");
}

#[test]
fn cov2_witness_matches_library() {
    let o = wiener(&["cov2", "--family", "mixed_orders", "--orders", "3,2", "--theta", "0.8", "--n", "6"]);
    assert!(o.status.success());
    let (_, data) = rows(&stdout(&o));
    let v = generate(&FamilySpec::new(Family::MixedOrders, vec![3, 2], 0.8, 6)).unwrap();
    let c = criterion_check(&v, 1e-6).unwrap();
    let cov: f64 = data.iter().map(|r| r[2].parse::<f64>().unwrap()).fold(0.0, f64::max);
    let con: f64 = data.iter().map(|r| r[3].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert_eq!(cov.to_bits(), c.squared_covariance.value.to_bits());
    assert_eq!(con.to_bits(), c.contraction.value.to_bits());
}

#[test]
fn check_exit_codes_and_reproducibility() {
    let base = ["check", "--samples", "20000", "--seed", "9", "--n", "4"];
    let run = |family: &str| {
        let mut args = base.to_vec();
        args.extend(["--family", family]);
        wiener(&args)
    };
    let pass = run("disjoint");
    assert_eq!(pass.status.code(), Some(0));
    let fail = run("persistent_overlap");
    assert_eq!(fail.status.code(), Some(1));
    let again = run("persistent_overlap");
    assert_eq!(fail.stdout, again.stdout);
    let text = stdout(&fail);
    assert!(text.contains("# condition 1: fail"));
    assert!(text.contains("# seed: 9"));

    let mut json_args = base.to_vec();
    json_args.extend(["--family", "vanishing_overlap", "--format", "json"]);
    let j = wiener(&json_args);
    let doc: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(doc["header"]["seed"], 9);
    assert_eq!(doc["header"]["config"]["samples"], 20000);
    assert!(doc["report"]["dependence"]["tuples"].as_array().unwrap().len() == 49);
}

#[test]
fn bad_input_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{ "dimension": 2, "order": 2, "entries": [ { "index": [1, 1], "value": 1.0 }, { "index": [2, 1], "value": 1.0 } ] }"#,
    );
    let good = write(dir.path(), "good.json", E11);
    let out = dir.path().join("out.csv");
    let o = wiener(&["contract", s(&bad), s(&good), "-r", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("entry 2") && err.contains("bad.json"), "{err}");
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);

    let o = wiener(&["check", "--family", "persistent_overlap", "--theta", "0", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    assert_eq!(wiener(&["sweep", "--family", "nope", "--n", "1"]).status.code(), Some(2));
    assert_eq!(wiener(&["check", "--samples", "10", "--family", "disjoint"]).status.code(), Some(2));
}

fn sweep(family: &str, ns: &str) -> Vec<Vec<f64>> {
    let o = wiener(&["sweep", "--family", family, "--n", ns, "--samples", "20000", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (cols, data) = rows(&stdout(&o));
    assert_eq!(
        cols,
        ["n", "cov2_witness", "contraction_witness", "empirical_gap", "stderr", "bound_ratio"]
    );
    data.iter()
        .map(|r| r.iter().map(|c| c.parse::<f64>().unwrap()).collect())
        .collect()
}

#[test]
fn sweep_examples() {
    let d = sweep("disjoint", "1,4,16");
    for r in &d {
        assert_eq!(r[1], 0.0);
        assert_eq!(r[2], 0.0);
        assert!(r[5].is_nan());
    }
    let p = sweep("persistent_overlap", "1,8,64");
    for r in &p {
        assert!((r[1] - p[0][1]).abs() <= 1e-9);
    }
    let v = sweep("vanishing_overlap", "2,8,32,128");
    for w in v.windows(2) {
        assert!(w[1][1] < w[0][1]);
        assert!(w[1][2] < w[0][2]);
    }
}

#[test]
fn simulate_dumps_rows() {
    let o = wiener(&["simulate", "--family", "vanishing_overlap", "--orders", "2,1", "--sizes", "2,1", "--n", "3", "--samples", "500"]);
    assert!(o.status.success());
    let (cols, data) = rows(&stdout(&o));
    assert_eq!(cols, ["F1.1", "F1.2", "F2.1"]);
    assert_eq!(data.len(), 500);
    let again = wiener(&["simulate", "--family", "vanishing_overlap", "--orders", "2,1", "--sizes", "2,1", "--n", "3", "--samples", "500"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn help_documents_formats() {
    let o = wiener(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("Kernel file") && text.contains("EXIT CODES"));
}
