use rlcm_core::gamma::equivalence_partition;
use rlcm_core::models::Dataset;
use rlcm_core::{build_gamma, datasets, LatentClassSpace, ModelSpec, QMatrix};
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn rlcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlcm")).args(args).output().expect("run rlcm")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn satisfied(v: &Value, id: &str) -> bool {
    v["conditions"].as_array().unwrap().iter().any(|r| r["id"] == id && r["status"] == "satisfied")
}

#[test]
fn check_bundled_datasets() {
    let o = rlcm(&["check", "--dataset", "toefl_a", "--model", "conj", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["schema"], "rlcm-ident/1");
    assert_eq!(v["level"], "PPartial");
    assert_eq!(v["classes"], 14);

    let v = json(&rlcm(&["check", "--dataset", "timss", "--model", "multi", "--json"]));
    assert_eq!(v["level"], "Generic");
    assert!(satisfied(&v, "C5/C6"));

    let v = json(&rlcm(&["check", "--dataset", "fraction", "--json"]));
    assert_eq!(v["level"], "PPartial");
    assert!(satisfied(&v, "Thm2-case"));

    let o = rlcm(&["check", "--dataset", "toefl_a"]);
    assert!(stdout(&o).starts_with("level: PPartial\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "q.csv", "1,0\n0,1\n0,1\n");
    let o = rlcm(&["check", "--q", &q]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("NotIdentifiable"));
    let o = rlcm(&["check", "--dataset", "timss", "--model", "multi", "--budget", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = rlcm(&["check", "--dataset", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown dataset"));
    let o = rlcm(&["check", "--q", &q, "--model", "cd"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn classes_listing() {
    let v = json(&rlcm(&["classes", "--dataset", "toefl_b", "--json"]));
    assert_eq!(v["count"], 12);
    let reps: Vec<&str> = v["classes"].as_array().unwrap().iter().map(|c| c["representative"].as_str().unwrap()).collect();
    for missing in ["0001", "1001", "0101", "1101"] {
        assert!(!reps.contains(&missing));
    }

    let dir = tempfile::tempdir().unwrap();
    let ex4 = write(dir.path(), "ex4.csv", "a1,a2\n1,0\n1,1\n");
    assert_eq!(json(&rlcm(&["classes", "--q", &ex4, "--json"]))["count"], 3);
    let identity = write(dir.path(), "id.csv", "1,0,0\n0,1,0\n0,0,1\n");
    let v = json(&rlcm(&["classes", "--q", &identity, "--json"]));
    assert_eq!(v["count"], 8);
    assert!(v["classes"].as_array().unwrap().iter().all(|c| c["size"] == 1));
    let text = stdout(&rlcm(&["classes", "--q", &ex4]));
    assert!(text.starts_with("3 equivalence classes over 4 profiles"));
}

#[test]
fn simulate_is_reproducible_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "q.csv", "1,0,0\n0,1,0\n1,1,1\n0,1,1\n1,0,1\n");
    let args = ["simulate", "--q", &q, "--random", "--seed", "4", "-n", "3000"];
    let a = rlcm(&args);
    let b = rlcm(&[&args[..], &["--sequential"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, rlcm(&["simulate", "--q", &q, "--random", "--seed", "5", "-n", "3000"]).stdout);
    let data = Dataset::parse_csv(&stdout(&a)).unwrap();
    assert_eq!((data.len(), data.j()), (3000, 5));
    assert_eq!(data.to_csv(), stdout(&a));

    let csv = rlcm(&["datasets", "timss"]);
    let parsed = QMatrix::parse_csv(&stdout(&csv), false).unwrap();
    assert_eq!(parsed.rows(), datasets::timss().q.rows());
}

/// True θ⁺, θ⁻ and grouped proportions from the parameter file of a saturated conjunctive model.
fn truth(params: &Value, q: &QMatrix) -> (Vec<f64>, Vec<f64>, Vec<(String, f64)>) {
    let space = LatentClassSpace::saturated(q.k()).unwrap();
    let g = build_gamma(q, &space, &ModelSpec::conj(q.j())).unwrap();
    let theta: Vec<Vec<f64>> = serde_json::from_value(params["theta"].clone()).unwrap();
    let p: Vec<f64> = serde_json::from_value(params["p"].clone()).unwrap();
    let top = space.len() - 1;
    let plus = theta.iter().map(|r| r[top]).collect();
    let minus = theta.iter().map(|r| r[0]).collect();
    let part = equivalence_partition(&g);
    let nu = part
        .classes
        .iter()
        .zip(&part.representatives)
        .map(|(members, rep)| (rep.to_string(), members.iter().map(|&a| p[a]).sum()))
        .collect();
    (plus, minus, nu)
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let qtext = "1,0,0\n0,1,0\n1,1,1\n0,1,1\n1,0,1\n";
    let q = write(dir.path(), "q.csv", qtext);
    let qm = QMatrix::parse_csv(qtext, false).unwrap();
    let mut errors = Vec::new();
    for seed in 0..5 {
        let data = dir.path().join(format!("data{seed}.csv"));
        let params = dir.path().join(format!("params{seed}.json"));
        let seed_s = seed.to_string();
        let o = rlcm(&[
            "simulate", "--q", &q, "--random", "--seed", &seed_s, "-n", "5000", "--out", data.to_str().unwrap(), "--params-out",
            params.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let o = rlcm(&["estimate", "--q", &q, "--data", data.to_str().unwrap(), "--seed", &seed_s]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let fit = json(&o);
        assert_eq!(fit["schema"], "rlcm-ident/1");
        assert_eq!(fit["seed"], seed);
        let p: Value = serde_json::from_str(&std::fs::read_to_string(&params).unwrap()).unwrap();
        let (plus, minus, nu) = truth(&p, &qm);
        let mut worst: f64 = 0.0;
        for j in 0..5 {
            worst = worst.max((fit["theta_plus"][j].as_f64().unwrap() - plus[j]).abs());
            worst = worst.max((fit["theta_minus"][j].as_f64().unwrap() - minus[j]).abs());
        }
        for (rep, v) in nu {
            worst = worst.max((fit["nu"][&rep].as_f64().unwrap() - v).abs());
        }
        errors.push(worst);
    }
    errors.sort_by(f64::total_cmp);
    assert!(errors[2] <= 0.05, "{errors:?}");
}

#[test]
fn counterexample_command() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "q.csv", "1,0\n0,1\n0,1\n");
    let o = rlcm(&["counterexample", "--q", &q]);
    assert_eq!(o.status.code(), Some(0));
    let ce = json(&o);
    assert_eq!(ce["construction"], "Thm2a");
    assert!(ce["distance"].as_f64().unwrap() < 1e-10);
    assert!(ce["param_gap"].as_f64().unwrap() >= 0.025);
    let again = rlcm(&["counterexample", "--q", &q, "--random", "--seed", "7"]);
    assert_eq!(again.stdout, rlcm(&["counterexample", "--q", &q, "--random", "--seed", "7"]).stdout);
    assert!(json(&again)["distance"].as_f64().unwrap() < 1e-10);

    let o = rlcm(&["counterexample", "--dataset", "toefl_a"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("definitive negative"));
    let o = rlcm(&["counterexample", "--q", &q, "--construction", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_command() {
    let dir = tempfile::tempdir().unwrap();
    let small = write(dir.path(), "small.csv", "1,0\n0,1\n0,1\n");
    let o = rlcm(&["oracle", "--q", &small, "--restarts", "40"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["outcome"], "found_counterexample");
    assert!(r["best_gap"].as_f64().unwrap() < 1e-8);

    let big = write(dir.path(), "big.csv", "1,0\n0,1\n1,0\n0,1\n1,1\n1,1\n");
    let o = rlcm(&["oracle", "--q", &big]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("size limit"));
}

#[test]
fn datasets_listing() {
    let v = json(&rlcm(&["datasets", "--json"]));
    let names: Vec<&str> = v["datasets"].as_array().unwrap().iter().map(|d| d["name"].as_str().unwrap()).collect();
    assert_eq!(names, datasets::NAMES);
    let text = stdout(&rlcm(&["datasets"]));
    assert_eq!(text.lines().count(), 4);
    assert_eq!(rlcm(&["datasets", "missing"]).status.code(), Some(1));
}
