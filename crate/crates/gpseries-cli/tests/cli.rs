use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gpseries(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpseries"))
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn solve_prints_factorials() {
    let v = json(&gpseries(&["solve", "--eq", "corpus/euler.eq", "--depth", "8", "--json"]));
    let vals: Vec<&str> =
        v["coefficients"].as_array().unwrap().iter().map(|c| c["value"]["re"].as_str().unwrap()).collect();
    assert_eq!(&vals[..4], ["1", "1", "2", "6"]);
    assert_eq!(v["relative_defect"], 0.0);
}

#[test]
fn certify_with_overrides() {
    let v = json(&gpseries(&[
        "certify", "--eq", "corpus/qpainleve.eq", "--param", "omega=sqrt2", "--param", "r=0.3+0.2i", "--depth", "8",
    ]));
    assert_eq!(v["theorem"], "6");
}

#[test]
fn bruno_on_the_golden_mean() {
    let v = json(&gpseries(&["check-arith", "--kind", "bruno", "--omega", "golden", "--depth", "40", "--json"]));
    assert_eq!(v["verdict"], "PassUpToBound");
    assert!(v["stabilized_at"].as_u64().unwrap() <= 20);
}

#[test]
fn exit_codes() {
    // usage and input errors
    assert_eq!(gpseries(&["solve"]).status.code(), Some(1));
    assert_eq!(gpseries(&["solve", "--eq", "corpus/euler.eq", "--depth", "0"]).status.code(), Some(1));
    assert_eq!(gpseries(&["solve", "--eq", "no/such/file.eq"]).status.code(), Some(1));
    assert_eq!(gpseries(&["--help"]).status.code(), Some(0));

    let dir = std::env::temp_dir().join(format!("gpseries-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    // no solution: the linear part is a root of unity
    let bad = dir.join("rotation.eq");
    std::fs::write(&bad, "@schroeder -x + x^2\n").unwrap();
    let out = gpseries(&["solve", "--eq", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not linearizable"));

    let corpus = dir.join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    std::fs::write(corpus.join("euler.eq"), "x*delta(y) - y + x = 0\n").unwrap();
    std::fs::write(
        corpus.join("euler.expect.json"),
        r#"{ "depth": 6, "coefficients": [ { "exponent": "3", "value": "3" } ] }"#,
    )
    .unwrap();
    let out = gpseries(&["corpus", "--dir", corpus.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], false);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn corpus_runs_are_reproducible() {
    let a = gpseries(&["corpus", "--json"]);
    let b = gpseries(&["corpus", "--json"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["entries"].as_array().unwrap().len(), 11);
}

#[test]
fn out_flag_writes_a_file() {
    let p = std::env::temp_dir().join(format!("gpseries-out-{}.json", std::process::id()));
    let out = gpseries(&["solve", "--eq", "corpus/euler.eq", "--depth", "4", "--out", p.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["depth"], 4);
    std::fs::remove_file(Path::new(&p)).unwrap();
}
