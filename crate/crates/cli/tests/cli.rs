use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn resilex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resilex"))
        .args(args)
        .current_dir(dir)
        .env_remove("RESILEX_CATALOG")
        .output()
        .expect("spawn resilex")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = resilex(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn enumerate_default_prints_586() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["enumerate", "--rules", "default"]);
    assert!(out.lines().any(|l| l == "total 586"), "{out}");
}

#[test]
fn inject_plan_evaluate_meets_target() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-design", "--preset", "toy-pipeline", "--out", "toy.json"]);
    ok(d, &["inject", "--seed", "3", "--samples", "2000", "--out", "p.json", "--design-out", "d.json"]);
    assert_eq!(json(d, "toy.json")["body"]["flip_flops"], json(d, "d.json")["body"]["flip_flops"]);
    ok(d, &["plan", "--design", "d.json", "--profile", "p.json", "--target", "sdc:50", "--out", "plan.json"]);
    ok(d, &["evaluate", "--design", "d.json", "--profile", "p.json", "--plan", "plan.json", "--out", "r.json"]);
    let r = json(d, "r.json");
    assert!(r["body"]["sdc_improvement"].as_f64().unwrap() >= 50.0);
    for key in ["catalog", "design", "profile", "plan"] {
        assert_eq!(r["inputs"][key].as_str().unwrap().len(), 64);
    }
    assert_eq!(r["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn empty_plan_is_neutral() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-design",
            "--preset",
            "ooo-like",
            "--ff-count",
            "60",
            "--seed",
            "1",
            "--out",
            "d.json",
            "--profile-out",
            "p.json",
        ],
    );
    ok(d, &["evaluate", "--design", "d.json", "--profile", "p.json", "--plan", "empty", "--out", "r.json"]);
    let r = &json(d, "r.json")["body"];
    assert_eq!(r["sdc_improvement"], 1.0);
    assert_eq!(r["due_improvement"], 1.0);
    assert_eq!(r["cost"]["energy_pct"], 0.0);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let runs: Vec<Vec<Vec<u8>>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let d = dir.path();
            ok(
                d,
                &[
                    "gen-design",
                    "--ff-count",
                    "200",
                    "--seed",
                    "9",
                    "--out",
                    "d.json",
                    "--profile-out",
                    "p.json",
                    "--dead",
                    "5",
                ],
            );
            ok(
                d,
                &[
                    "inject",
                    "--seed",
                    "4",
                    "--samples",
                    "500",
                    "--mode",
                    "random",
                    "--programs",
                    "sum10,gcd",
                    "--out",
                    "i.json",
                ],
            );
            ok(
                d,
                &[
                    "explore",
                    "--design",
                    "d.json",
                    "--profile",
                    "p.json",
                    "--targets",
                    "sdc:5,due:5",
                    "--out",
                    "x.csv",
                    "--front",
                    "f.csv",
                ],
            );
            ok(
                d,
                &[
                    "depend",
                    "--design",
                    "d.json",
                    "--profile",
                    "p.json",
                    "--seed",
                    "2",
                    "--pairs",
                    "5",
                    "--out",
                    "dep.json",
                    "--csv",
                    "dep.csv",
                ],
            );
            ok(d, &["report", "--inputs", "x.csv", "--out", "front.csv", "--bound", "bound.csv"]);
            ["d.json", "p.json", "i.json", "x.csv", "f.csv", "dep.json", "dep.csv", "front.csv", "bound.csv"]
                .iter()
                .map(|f| fs::read(d.join(f)).unwrap())
                .collect()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert!(String::from_utf8_lossy(&runs[0][3]).starts_with("# resilex "));
}

#[test]
fn failures_have_distinct_codes_and_json_records() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-design", "--ff-count", "50", "--seed", "1", "--out", "d.json", "--profile-out", "p.json"]);
    let cases: [(&[&str], i32, &str); 3] = [
        (&["evaluate", "--design", "missing.json", "--profile", "p.json", "--plan", "empty"], 3, "missing-file"),
        (&["evaluate", "--design", "p.json", "--profile", "p.json", "--plan", "empty"], 4, "schema"),
        (
            &[
                "plan",
                "--design",
                "d.json",
                "--profile",
                "p.json",
                "--target",
                "due:5",
                "--strategy",
                "eds+unconstrained",
                "--out",
                "x.json",
            ],
            5,
            "infeasible",
        ),
    ];
    for (args, code, kind) in cases {
        let out = resilex(d, args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(rec["error"], kind);
        assert_eq!(rec["exit_code"], code);
    }
    // Stochastic commands refuse to run without a seed.
    assert!(!resilex(d, &["inject", "--out", "i.json"]).status.success());
}

#[test]
fn catalog_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["catalog", "dump", "--out", "cat.json"]);
    let mut cat = json(d, "cat.json");
    cat["body"]["hardened"][0]["ser_multiplier"] = serde_json::json!(-1.0);
    fs::write(d.join("bad.json"), cat.to_string()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_resilex"))
        .args(["catalog", "dump"])
        .current_dir(d)
        .env("RESILEX_CATALOG", "bad.json")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(6));
    let out = Command::new(env!("CARGO_BIN_EXE_resilex"))
        .args(["catalog", "dump"])
        .current_dir(d)
        .env("RESILEX_CATALOG", "cat.json")
        .output()
        .unwrap();
    assert!(out.status.success());
}
