use std::fs;
use std::process::Command;

use serde_json::Value;

use leibniz_cli::run_command;
use leibniz_core::families::canonical_samples;
use leibniz_core::scalar::fmt_scalar;

fn run(args: &[&str]) -> (i32, Value) {
    let out = run_command(std::iter::once("leibniz").chain(args.iter().copied()));
    let report = serde_json::from_str(&out.stdout).unwrap_or(Value::Null);
    (out.code, report)
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn generate_l1_has_four_products() {
    let (code, r) = run(&["generate", "L1", "--k", "3", "--params", "2,5"]);
    assert_eq!(code, 0);
    assert_eq!(r["outcome"]["nonzero_products"], 4);
    assert_eq!(
        r["outcome"]["algebra"]["products"]
            .as_array()
            .unwrap()
            .len(),
        4
    );
    assert_eq!(r["exact"], true);
}

#[test]
fn verify_zero_algebra() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        &dir,
        "z.json",
        r#"{"schema_version":"1","dim":3,"basis":["a","b","c"],"products":[]}"#,
    );
    let (code, r) = run(&["verify", &f]);
    assert_eq!(code, 0);
    assert_eq!(r["outcome"]["class"], "nilpotent(2)");
    assert_eq!(r["outcome"]["leibniz"]["pass"], true);
}

#[test]
fn verify_reports_violation_and_nilradical() {
    let dir = tempfile::tempdir().unwrap();
    // [a,b] = c, [c,a] = b breaks the identity at (a, a, b)
    let bad = r#"{"schema_version":"1","dim":3,"basis":["a","b","c"],"products":[
        {"left":0,"right":1,"value":[{"idx":2,"num":"1","den":"1"}]},
        {"left":2,"right":0,"value":[{"idx":1,"num":"1","den":"1"}]}]}"#;
    let (code, r) = run(&["verify", &write(&dir, "bad.json", bad)]);
    assert_eq!(code, 1);
    assert_eq!(r["outcome"]["leibniz"]["pass"], false);

    let (_, g) = run(&["generate", "L2", "--k", "3", "--params", "1,-1/2"]);
    let file = serde_json::to_string(&g["outcome"]["algebra"]).unwrap();
    let f = write(&dir, "l2.json", &file);
    let (code, r) = run(&["verify", &f, "--nilradical", "0,1,2"]);
    assert_eq!(code, 0);
    assert_eq!(r["outcome"]["nilradical"]["passed"], true);
    assert_eq!(r["outcome"]["class"], "solvable_not_nilpotent(2)");
}

#[test]
fn fuzz_m3_passes() {
    let (code, r) = run(&[
        "fuzz", "--label", "M3", "--k", "4", "--t", "2", "--trials", "50", "--seed", "7",
    ]);
    assert_eq!(code, 0);
    assert_eq!(r["outcome"]["passed"], 50);
    assert_eq!(r["outcome"]["failed"], 0);
    assert_eq!(r["seed"], 7);
}

#[test]
fn generated_files_classify_back() {
    let dir = tempfile::tempdir().unwrap();
    for (i, spec) in canonical_samples(3, 2, 4).unwrap().iter().enumerate() {
        let params: Vec<String> = spec.params.iter().map(fmt_scalar).collect();
        let path = dir.path().join(format!("{i}.json")).display().to_string();
        let t = spec.t.to_string();
        let mut args = vec!["generate", spec.label.name(), "--k", "3", "--params"];
        let joined = params.join(",");
        args.push(&joined);
        if spec.label.is_m() {
            args.extend(["--t", &t]);
        }
        args.extend(["--out", &path]);
        assert_eq!(run(&args).0, 0, "{spec}");
        let (code, r) = run(&["classify", &path]);
        assert_eq!(code, 0, "{spec}: {r}");
        assert_eq!(r["outcome"]["spec"], spec.to_string());
    }
}

#[test]
fn reports_are_deterministic() {
    let args = [
        "fuzz", "--label", "L7", "--k", "3", "--trials", "12", "--seed", "3",
    ];
    let a = run_command(std::iter::once("leibniz").chain(args));
    let b = run_command(std::iter::once("leibniz").chain(args));
    assert_eq!(a, b);
    let (_, l) = run(&["list-families", "--k", "4"]);
    assert_eq!(l, run(&["list-families", "--k", "4"]).1);
    assert!(l["outcome"]["count"].as_u64().unwrap() > 10);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = write(&dir, "m.json", "{ not json");
    assert_eq!(run(&["classify", &malformed]).0, 2);
    let (code, r) = run(&[
        "invariants",
        &write(
            &dir,
            "d.json",
            r#"{"schema_version":"2","dim":0,"basis":[],"products":[]}"#,
        ),
    ]);
    assert_eq!(
        (code, r["outcome"]["error"]["code"].as_str()),
        (2, Some("E_FILE"))
    );
    let abelian = write(
        &dir,
        "a.json",
        r#"{"schema_version":"1","dim":5,"basis":["a","b","c","d","e"],"products":[]}"#,
    );
    let (code, r) = run(&["classify", &abelian]);
    assert_eq!(
        (code, r["outcome"]["error"]["code"].as_str()),
        (1, Some("E_NOT_IN_CLASS"))
    );
    assert_eq!(run(&["generate", "L9", "--k", "3", "--params", "1"]).0, 2);
    assert_eq!(run(&["generate", "Q1", "--k", "3"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn invariants_of_generated_algebra() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json").display().to_string();
    run(&[
        "generate", "L1", "--k", "3", "--params", "2,5", "--out", &path,
    ]);
    let (code, r) = run(&["invariants", &path]);
    assert_eq!(code, 0);
    assert_eq!(r["outcome"]["dim"], 5);
    assert_eq!(r["outcome"]["spectrum_available"], true);
}

#[test]
fn catalog_writes_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cat");
    let (code, r) = run(&[
        "catalog",
        "--k",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--draws",
        "2",
        "--seed",
        "1",
    ]);
    assert_eq!(code, 0);
    let count = r["outcome"]["count"].as_u64().unwrap() as usize;
    assert!(count > 0);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 2 * count);
    let first = r["outcome"]["entries"][0]["file"].as_str().unwrap();
    let cert: Value =
        serde_json::from_str(&fs::read_to_string(out.join(format!("{first}.cert.json"))).unwrap())
            .unwrap();
    assert_eq!(cert["passed"], true);
}

#[test]
fn binary_uses_seed_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_leibniz"))
        .args(["fuzz", "--label", "L1", "--k", "2", "--trials", "3"])
        .env("LEIBNIZ_SEED", "41")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["seed"], 41);
}
