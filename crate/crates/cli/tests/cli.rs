use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const TREE: &str = "g2(0)[a(2), b(0)[c(3), d(2)]]";
const PAIR: &str = "g1(0)[a(2)] - g1(0)[b(2)]";

fn modcalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modcalc")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("modcalc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn enumerate_weight_zero() {
    let o = modcalc(&["enumerate", "--d", "0"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.contains(&"g2(0)"));
    assert!(lines.contains(&"g1(0) - g1(0)"));
}

#[test]
fn enumerate_writes_json() {
    let out = scratch("enum.json");
    let o = modcalc(&["enumerate", "--d", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 6);
}

#[test]
fn vocab_of_tree_example() {
    let o = modcalc(&["vocab", TREE]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["depth1"], 2);
    let words: Vec<String> = v["reduced"]["words"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w["letters"].as_array().unwrap().iter().map(|l| l.as_str().unwrap()).collect::<Vec<_>>().join(""))
        .collect();
    let mut words = words;
    words.sort();
    assert_eq!(words, ["a", "aa", "bc", "bcbc", "bcbcbc", "bd", "bdbd"]);
}

#[test]
fn simulate_and_render() {
    let dot = scratch("f.dot");
    let o = modcalc(&["simulate", PAIR, "--rounds", "A", "--dot", dot.to_str().unwrap()]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["terminals"].as_array().unwrap().len(), 3);
    assert!(std::fs::read_to_string(&dot).unwrap().starts_with("digraph"));

    let dot2 = scratch("g.dot");
    let o = modcalc(&["render", PAIR, "--rounds", "A", "--dot", dot2.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&dot).unwrap(), std::fs::read(&dot2).unwrap());
}

#[test]
fn diagonalize_one_state() {
    let all = stdout_json(&modcalc(&["diagonalize", PAIR, "--n", "2"]));
    let first = &all.as_array().unwrap()[0];
    let id = first["state-id"].as_str().unwrap().to_string();
    let o = modcalc(&["diagonalize", PAIR, "--state", &id, "--n", "2"]);
    let one = stdout_json(&o);
    assert_eq!(one.as_array().unwrap().len(), 1);
    assert_eq!(one[0]["state-id"], id.as_str());
    assert!(one[0]["local_model"]["primary_dim"].is_i64());
    let o = modcalc(&["diagonalize", PAIR, "--state", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_reports_violations_with_exit_one() {
    let out = scratch("r1.json");
    let o = modcalc(&["verify", "--d-max", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("graphs checked: 8"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["totals_excluding_interior_zero"]["diagonalization"], 0);
}

#[test]
fn verify_is_byte_identical_across_runs() {
    let a = scratch("r3a.json");
    let b = scratch("r3b.json");
    modcalc(&["verify", "--d-max", "3", "--out", a.to_str().unwrap()]);
    modcalc(&["verify", "--d-max", "3", "--out", b.to_str().unwrap()]);
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
}

#[test]
fn bad_input_exits_two() {
    let o = modcalc(&["vocab", "g2(0)[x("]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("syntax error"));
    let o = modcalc(&["simulate", PAIR, "--flags", "chi=maybe"]);
    assert_eq!(o.status.code(), Some(2));
}
