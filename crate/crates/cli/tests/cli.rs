use std::path::PathBuf;
use std::process::{Command, Output};

use radul_core::cyclic_index::fixtures;
use radul_core::samples::{example_germ, example_symbol};
use radul_core::wodzicki_residue::residue;
use serde_json::Value;

fn radul(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radul")).args(args).env_remove("RADUL_PRECISION").output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture(name: &str) -> String {
    fixture_dir().join(name).to_str().unwrap().to_string()
}

/// Every fixture file with the value it must hold.
fn shipped() -> Vec<(String, Value)> {
    let mut v: Vec<_> =
        fixtures().unwrap().into_iter().map(|k| (format!("kclass_{}.json", k.name), k.to_json())).collect();
    v.push(("symbol_example.json".into(), example_symbol().to_json()));
    v.push(("germ_example.json".into(), example_germ().to_json()));
    v
}

#[test]
fn fixture_files_match_the_code() {
    for (name, want) in shipped() {
        let text = std::fs::read_to_string(fixture_dir().join(&name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let got: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(got, want, "{name} is stale; regenerate with `cargo test -p radul-cli -- --ignored`");
    }
}

#[test]
#[ignore = "regenerates the fixture files"]
fn write_fixtures() {
    for (name, v) in shipped() {
        std::fs::write(fixture_dir().join(name), serde_json::to_string_pretty(&v).unwrap() + "\n").unwrap();
    }
}

#[test]
fn acceptance_run_passes() {
    let o = radul(&["verify", "--suite", "all", "--n", "1", "--seed", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&o);
    assert_eq!(r["summary"]["all_pass"], true);
    assert!(r["summary"]["total"].as_u64().unwrap() >= 25);
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn series_records_are_exact() {
    let o = radul(&["verify", "--suite", "series", "--zorder", "8", "--xorder", "12"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    let checks = r["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert_eq!(c["exact"], true, "{c}");
        assert_eq!(c["deviation"], "0", "{c}");
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("r{i}.json"));
        let o = radul(&["verify", "--suite", "symbols", "--seed", "3", "--report", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        outs.push((o.stdout, std::fs::read(&path).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
    let other = radul(&["verify", "--suite", "symbols", "--seed", "4"]);
    assert_eq!(json(&other)["config"]["seed"], 4);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["verify", "--backend", "hyperbolic"][..],
        &["verify", "--n", "3"],
        &["verify", "--n", "1", "--p", "0", "--backend", "two_sheet"],
        &["verify", "--suite", "everything"],
        &["verify", "--cutoff", "0"],
        &["verify", "--precision", "5"],
        &["index", "--kclass", "/nonexistent.json"],
        &["residue"],
        &["frobnicate"],
    ] {
        let o = radul(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn precision_comes_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_radul"))
        .args(["verify", "--suite", "scalars"])
        .env("RADUL_PRECISION", "80")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["config"]["precision"], 80);
    let flag = Command::new(env!("CARGO_BIN_EXE_radul"))
        .args(["verify", "--suite", "scalars", "--precision", "60"])
        .env("RADUL_PRECISION", "80")
        .output()
        .unwrap();
    assert_eq!(json(&flag)["config"]["precision"], 60);
}

#[test]
fn toeplitz_fixtures_have_index_minus_k() {
    for (k, want) in [(1, -1), (2, -2), (3, -3)] {
        let o = radul(&["index", "--kclass", &fixture(&format!("kclass_toeplitz_{k}.json")), "--method", "both"]);
        assert_eq!(o.status.code(), Some(0));
        let r = json(&o);
        assert_eq!(r["radul"]["nearest_integer"], want);
        assert_eq!(r["top"]["nearest_integer"], want);
        assert_eq!(r["radul"]["rounding_distance"], "0");
        assert_eq!(r["agree"], true);
    }
    let id = json(&radul(&["index", "--kclass", &fixture("kclass_identity.json")]));
    assert_eq!(id["radul"]["nearest_integer"], 0);
    assert_eq!(id["top"]["nearest_integer"], 0);
    let only = json(&radul(&["index", "--kclass", &fixture("kclass_toeplitz_2.json"), "--method", "radul"]));
    assert!(only.get("top").is_none() && only.get("agree").is_none());
}

#[test]
fn index_report_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.json");
    let o = radul(&["index", "--kclass", &fixture("kclass_su2_p1.json"), "--report", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(r, json(&o));
    assert_eq!(r["agree"], true);
}

#[test]
fn non_elliptic_kclass_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("kclass_constant.json")).unwrap()).unwrap();
    // [[2, 1], [1, 1]] becomes the singular [[1, 1], [1, 1]].
    let before = v.to_string();
    let mut s = serde_json::to_string(&v["u"]).unwrap();
    s = s.replacen("\"2\"", "\"1\"", 1);
    v["u"] = serde_json::from_str(&s).unwrap();
    assert_ne!(v.to_string(), before, "fixture layout changed");
    let path = dir.path().join("singular.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = radul(&["index", "--kclass", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not elliptic"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn residue_of_the_example_symbol() {
    let o = radul(&["residue", "--symbol", &fixture("symbol_example.json")]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    let want = residue(&example_symbol()).unwrap();
    assert!(!want.is_exact_zero());
    assert_eq!(r["residue"], radul_core::json::scalar_to_json(&want));
    // Each sheet point carries weight 1 and the x-average of e^{ix} is 0: 2 + 1/2.
    assert_eq!(r["residue"]["exact"]["re"], serde_json::json!(["5", "2"]));
    assert_eq!(r["degree"], -1);
    assert!(!r["component"]["components"].as_array().unwrap().is_empty());
}

#[test]
fn germ_residues_by_order() {
    for (order, want) in [("2", 3), ("1", 5), ("0", 7), ("3", 0)] {
        let o = radul(&["residue", "--germ", &fixture("germ_example.json"), "--order", order]);
        assert_eq!(o.status.code(), Some(0));
        let v = json(&o)["value"].clone();
        assert_eq!(v, radul_core::json::scalar_to_json(&radul_core::Scalar::from_int(want)), "order {order}");
    }
}

#[test]
fn conventions_are_stable() {
    let a = radul(&["conventions"]);
    let b = radul(&["conventions"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = json(&a);
    assert_eq!(c["c_modulus_is_one"], true);
    assert_eq!(c["c_prime_vs_c_double_prime"], "c' = -c''");
    assert_eq!(c["pairing_order"], "Ind(u) = radul(u, u^-1)");
    assert_eq!(c["berezin_orientation"]["n=2"], -1);
}
