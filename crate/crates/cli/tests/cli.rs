use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnn"))
        .args(args)
        .env("FNN_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn fixtures(kind: &str) -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(kind);
    let mut files: Vec<String> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path().display().to_string()).collect();
    files.sort();
    files
}

const SUBCOMMANDS: [&str; 10] = [
    "simulate-star",
    "simulate-bilocal",
    "certify",
    "extract-witness",
    "evaluate",
    "ingest-star",
    "ingest-bilocal",
    "sweep",
    "optimize",
    "mutual-info",
];

#[test]
fn help_documents_units_and_conventions() {
    let dir = tempfile::tempdir().unwrap();
    for sub in SUBCOMMANDS {
        let out = fnn(dir.path(), &[sub, "--help"]);
        assert_eq!(code(&out), 0, "{sub}");
        let text = stdout(&out);
        assert!(text.contains("radians"), "{sub}");
        assert!(text.contains("b = 0 is GHZ success"), "{sub}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fnn(dir.path(), &["certify", "--bogus"])), 1);
    assert_eq!(code(&fnn(dir.path(), &["no-such-command"])), 1);
    assert_eq!(code(&fnn(dir.path(), &["certify"])), 1, "needs --distribution or --ideal");
}

#[test]
fn domain_errors_exit_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnn(dir.path(), &["simulate-star", "--visibility", "1.5"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("visibility"));
    let out = fnn(dir.path(), &["sweep", "--phi0", "0.3"]);
    assert_eq!(code(&out), 1);
    let out = fnn(dir.path(), &["ingest-star", "--projection", "5/0", &fixtures("star")[0]]);
    assert_eq!(code(&out), 1);
}

#[test]
fn certify_ideal_star() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnn(
        dir.path(),
        &["certify", "--ideal", "--theta0", "-1.865", "--theta1", "-0.415", "--denominator-bound", "10000"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("FNN: true"));
    let report = read_json(dir.path().join("certify.json"));
    assert_eq!(report["fnn"], true);
    for k in 1..=3 {
        assert!(dir.path().join(format!("certificate_{k}.json")).exists());
    }
}

#[test]
fn noisy_star_is_not_certified() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnn(dir.path(), &["certify", "--ideal", "--visibility", "0.4", "--denominator-bound", "10000"]);
    assert_eq!(code(&out), 3);
    assert_eq!(read_json(dir.path().join("certify.json"))["fnn"], false);
}

#[test]
fn ingest_star_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["ingest-star", "--projection", "2019/15562", "--resamples", "200"];
    let files = fixtures("star");
    args.extend(files.iter().map(String::as_str));
    let out = fnn(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("I1 = 0.0598"));
    let first = std::fs::read(dir.path().join("ingest_star.json")).unwrap();
    let report: Value = serde_json::from_slice(&first).unwrap();
    assert!((report["results"][0]["value"].as_f64().unwrap() - 0.0598).abs() < 1e-3);
    assert_eq!(report["results"][0]["inputs"].as_object().unwrap().len(), 8);

    // byte-identical on a rerun
    fnn(dir.path(), &args);
    assert_eq!(std::fs::read(dir.path().join("ingest_star.json")).unwrap(), first);
}

#[test]
fn ingest_bilocal_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["ingest-bilocal", "--resamples", "200"];
    let files = fixtures("bilocal");
    args.extend(files.iter().map(String::as_str));
    let out = fnn(dir.path(), &args);
    assert_eq!(code(&out), 0);
    let report = read_json(dir.path().join("ingest_bilocal.json"));
    assert!((report["results"][0]["value"].as_f64().unwrap() - 3.4966).abs() < 2e-3);
    assert!((report["results"][1]["value"].as_f64().unwrap() - 3.4166).abs() < 2e-3);
}

#[test]
fn simulate_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fnn(dir.path(), &["simulate-star", "--visibility", "0"])), 0);
    let dist = dir.path().join("star_distribution.json").display().to_string();
    let out = fnn(dir.path(), &["evaluate", "--witness", "I1", "--distribution", &dist]);
    assert_eq!(code(&out), 3);
    assert_eq!(read_json(dir.path().join("evaluation.json"))["result"]["value"], -0.5);

    assert_eq!(code(&fnn(dir.path(), &["simulate-star"])), 0);
    let out = fnn(dir.path(), &["evaluate", "--witness", "I2", "--distribution", &dist]);
    assert_eq!(code(&out), 0);

    assert_eq!(code(&fnn(dir.path(), &["simulate-bilocal"])), 0);
    let bil = dir.path().join("bilocal_distribution.json").display().to_string();
    let out = fnn(dir.path(), &["evaluate", "--witness", "R_C-NS", "--distribution", &bil]);
    assert_eq!(code(&out), 0);
    let v = read_json(dir.path().join("evaluation.json"))["result"]["value"].as_f64().unwrap();
    assert!((v - 5.0 / 2f64.sqrt()).abs() < 1e-9);
}

#[test]
fn extracted_witness_can_be_evaluated() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fnn(dir.path(), &["extract-witness", "--ideal", "--denominator-bound", "10000"])), 0);
    assert_eq!(code(&fnn(dir.path(), &["simulate-star"])), 0);
    let dist = dir.path().join("star_distribution.json").display().to_string();
    for file in ["witness_W2.json", "witness_W2_probability.json"] {
        let w = dir.path().join(file).display().to_string();
        let out = fnn(dir.path(), &["evaluate", "--witness", &w, "--distribution", &dist]);
        assert_eq!(code(&out), 0, "{file}");
        assert!(read_json(dir.path().join("evaluation.json"))["result"]["value"].as_f64().unwrap() > 0.15);
    }
}

#[test]
fn sweep_and_optimize() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fnn(dir.path(), &["sweep", "--points", "20"])), 0);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("theta0,theta1,phi0,phi1,v,value\n"));
    assert_eq!(csv.lines().count(), 22);
    let v_crit = read_json(dir.path().join("sweep.json"))["v_crit"].as_f64().unwrap();
    assert!((v_crit - 0.882).abs() < 1e-3);

    assert_eq!(code(&fnn(dir.path(), &["sweep", "--theta0", "0", "--theta1", "0"])), 3);

    assert_eq!(code(&fnn(dir.path(), &["optimize", "--resolution", "0.05"])), 0);
    let best = &read_json(dir.path().join("optimize.json"))["best"];
    assert!((best["value"].as_f64().unwrap() - 0.1859).abs() < 5e-4);
}

#[test]
fn mutual_information_of_ideal_star() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnn(dir.path(), &["mutual-info", "--ideal"]);
    assert_eq!(code(&out), 0);
    let report = read_json(dir.path().join("mutual_info.json"));
    assert_eq!(report["pairs"].as_array().unwrap().len(), 12);
    assert!(report["max"].as_f64().unwrap() <= 1e-12);
}

fn significant_digits(x: f64) -> usize {
    let text = format!("{:e}", x.abs());
    text.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count()
}

fn all_floats(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) if n.is_f64() => out.push(n.as_f64().unwrap()),
        Value::Array(items) => items.iter().for_each(|i| all_floats(i, out)),
        Value::Object(map) => map.values().for_each(|i| all_floats(i, out)),
        _ => {}
    }
}

#[test]
fn numbers_have_twelve_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    fnn(dir.path(), &["optimize", "--resolution", "0.1"]);
    let mut floats = Vec::new();
    all_floats(&read_json(dir.path().join("optimize.json")), &mut floats);
    assert!(floats.len() > 5);
    assert!(floats.iter().any(|&x| significant_digits(x) == 12));
    assert!(floats.iter().all(|&x| significant_digits(x) <= 12), "{floats:?}");
}
