use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn locball(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_locball"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn schema_required() -> Vec<String> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schemas/summary.schema.json")).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    schema["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
}

fn assert_summary_shape(path: &Path) -> Value {
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let obj = doc.as_object().unwrap();
    let required = schema_required();
    for key in &required {
        assert!(obj.contains_key(key), "{} lacks {key}", path.display());
    }
    assert_eq!(obj.len(), required.len(), "unexpected keys in {}", path.display());
    let hash = doc["input_hash"].as_str().unwrap();
    assert!(hash.starts_with("sha256:") && hash.len() == 71);
    for v in doc["verdicts"].as_array().unwrap() {
        for key in ["name", "pass", "value", "threshold", "detail"] {
            assert!(v.get(key).is_some());
        }
    }
    doc
}

#[test]
fn unknown_experiment_in_a_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "experiment = \"nope\"\n[params]\ndt = -1.0\nwidth = 3\n").unwrap();
    let out = locball(&["run", "--config", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error [cli]"), "{err}");
    assert!(err.contains("smallball") && err.contains("certificate"), "valid names listed: {err}");
    assert!(err.contains("params.width") && err.contains("params.dt"), "every bad key listed: {err}");
}

#[test]
fn illegal_backend_exits_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = locball(
        &["localize", "--family", "uniform_ball", "--dim", "3", "--backend", "closed_form", "--outdir", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error [localization]"));
}

#[test]
fn verify_martingale_on_the_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().to_str().unwrap();
    let out = locball(
        &["verify", "martingale", "--family", "gaussian", "--dim", "3", "--paths", "256", "--seed", "1", "--outdir", outdir],
        &[],
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}{}", String::from_utf8_lossy(&out.stderr));
    let doc = assert_summary_shape(&dir.path().join("martingale-1.json"));
    assert_eq!(doc["pass"], Value::Bool(true));
    let verdicts = doc["verdicts"].as_array().unwrap();
    assert!(verdicts.len() >= 3);
    let csv = std::fs::read(dir.path().join("martingale-1.csv")).unwrap();
    assert!(csv.windows(2).any(|w| w == b"\r\n"));
}

#[test]
fn config_files_in_toml_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let toml = format!(
        "experiment = \"smallball\"\nseed = 3\noutdir = {:?}\n[family]\nkind = \"gaussian\"\ndim = 4\n[params]\nN = 20000\n",
        a.to_str().unwrap()
    );
    let json = format!(
        "{{\"experiment\": \"smallball\", \"seed\": 3, \"outdir\": {:?}, \"family\": {{\"kind\": \"gaussian\", \"dim\": 4}}, \"params\": {{\"N\": 20000}}}}",
        b.to_str().unwrap()
    );
    std::fs::write(dir.path().join("c.toml"), toml).unwrap();
    std::fs::write(dir.path().join("c.json"), json).unwrap();
    for name in ["c.toml", "c.json"] {
        let out = locball(&["run", "--config", dir.path().join(name).to_str().unwrap()], &[]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(csv_files(&a), csv_files(&b));
    assert_summary_shape(&a.join("smallball-3.json"));
}

#[test]
fn replicate_all_is_byte_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (name, threads) in [("one", "1"), ("two", "1"), ("three", "3")] {
        let outdir = dir.path().join(name);
        let out = locball(
            &["replicate-all", "--seed", "42", "--scale", "quick", "--outdir", outdir.to_str().unwrap()],
            &[("LOCBALL_THREADS", threads)],
        );
        assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(String::from_utf8_lossy(&out.stdout).lines().filter(|l| l.starts_with("criterion")).count(), 11);
        runs.push(csv_files(&outdir));
        assert_summary_shape(&outdir.join("criterion-01-42.json"));
    }
    assert_eq!(runs[0].len(), 12);
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}
