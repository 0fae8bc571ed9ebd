use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddkf::Trajectory;
use ddkf_cli::csv_io::{parse_trajectories, read_trajectories, write_trajectories};
use ddkf_cli::model_file::ModelFile;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

fn ddkf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddkf"))
        .args(args)
        .env("DDKF_LOG", "off")
        .output()
        .expect("binary runs")
}

fn run_ok(cmd: &str, config: &Path, out: &Path) {
    let o = ddkf(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn assert_schema_valid(result: &Value) {
    let schema: Value = serde_json::from_str(include_str!("../schema/result.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(result).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

/// Second-order SISO system driven by white input and innovations.
fn record(len: usize, seed: u64) -> (Trajectory, Trajectory) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let (mut x1, mut x2) = (0.0, 0.0);
    let mut u = DMatrix::zeros(1, len);
    let mut y = DMatrix::zeros(1, len);
    for t in 0..len {
        let (ut, et) = (draw(), 0.2 * draw());
        let yt = x1 + et;
        u[(0, t)] = ut;
        y[(0, t)] = yt;
        (x1, x2) = (1.2 * x1 + x2 + 0.5 * ut + 0.4 * et, -0.5 * x1 + 0.3 * ut + 0.1 * et);
    }
    (
        Trajectory::new(u, vec!["thrust".into()], None).unwrap(),
        Trajectory::new(y, vec!["pitch".into()], None).unwrap(),
    )
}

#[test]
fn build_then_predict_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let (u, y) = record(800, 1);
    write_trajectories(&dir.path().join("data.csv"), &[("u", &u), ("y", &y)]).unwrap();
    let cfg = write_config(
        dir.path(),
        "build.json",
        &json!({"schema_version": 1, "build": {"data": "data.csv", "past_horizon": 12, "t_p": 6, "t_f": 5, "n_x_bar": 2}}),
    );
    let out = dir.path().join("out");
    run_ok("build", &cfg, &out);
    let result = read_json(&out.join("result.json"));
    assert_schema_valid(&result);
    assert_eq!(result["command"], "build");
    assert_eq!(result["payload"]["horizon"]["t_f"], 5);
    assert!(result["payload"]["filter"]["closed_loop_radius"].as_f64().unwrap() < 1.0);

    // the stored model reproduces the in-process one
    let model = ModelFile::read(&out.join("model.json")).unwrap().to_model().unwrap();
    let spec = ddkf::HorizonSpec::new(6, 5, 2, 1, 1).unwrap();
    let direct = ddkf::pipeline::build_innovations_model(&u, &y, 12, &spec, &Default::default()).unwrap();
    assert_eq!(model.filter.gain, direct.model.filter.gain);
    assert_eq!(model.prediction, direct.model.prediction);

    let (u2, y2) = record(40, 2);
    write_trajectories(&dir.path().join("past.csv"), &[("u", &u2.slice(0, 30).unwrap()), ("y", &y2.slice(0, 30).unwrap())]).unwrap();
    write_trajectories(&dir.path().join("future.csv"), &[("u", &u2.slice(30, 5).unwrap())]).unwrap();
    let cfg = write_config(
        dir.path(),
        "predict.json",
        &json!({"schema_version": 1, "predict": {"model": "out/model.json", "past": "past.csv", "future": "future.csv"}}),
    );
    let out2 = dir.path().join("pred");
    run_ok("predict", &cfg, &out2);
    let pred = read_trajectories(&out2.join("prediction.csv"), None).unwrap();
    let pred = pred.y.unwrap();
    assert_eq!(pred.len(), 5);
    assert_eq!(pred.channel_names(), ["pitch"]);
    let mut m = direct.model.clone();
    let expected = ddkf_cli::commands::predict_from(
        &mut m,
        &u2.slice(0, 30).unwrap(),
        &y2.slice(0, 30).unwrap(),
        &u2.slice(30, 5).unwrap(),
    )
    .unwrap();
    assert_eq!(pred.samples(), &expected);
    // a one-step prediction is close to the measured output
    assert!((expected[(0, 0)] - y2.samples()[(0, 30)]).abs() < 1.0);
    assert_schema_valid(&read_json(&out2.join("result.json")));
}

#[test]
fn estimate_innovations_writes_the_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let (u, y) = record(500, 3);
    write_trajectories(&dir.path().join("data.csv"), &[("y", &y), ("u", &u)]).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"schema_version": 1, "estimate_innovations": {"data": "data.csv", "past_horizon": 15}}),
    );
    run_ok("estimate-innovations", &cfg, dir.path());
    let e = read_trajectories(&dir.path().join("innovations.csv"), None).unwrap().e.unwrap();
    assert_eq!(e.len(), 485);
    let result = read_json(&dir.path().join("result.json"));
    assert_schema_valid(&result);
    let lambda = result["payload"]["innovations"]["lambda_hat"]["data"][0].as_f64().unwrap();
    assert!((lambda - 0.04).abs() < 0.01, "{lambda}");
    assert_eq!(result["payload"]["innovations"]["whiteness"]["passes"], true);
}

fn error_category(o: &Output) -> String {
    let v: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).expect("JSON error report");
    v["error"]["category"].as_str().unwrap().to_string()
}

#[test]
fn too_short_data_fails_with_insufficient_data() {
    let dir = tempfile::tempdir().unwrap();
    let (u, y) = record(30, 4);
    write_trajectories(&dir.path().join("data.csv"), &[("u", &u), ("y", &y)]).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"schema_version": 1, "build": {"data": "data.csv", "past_horizon": 12, "t_p": 6, "t_f": 5, "n_x_bar": 2}}),
    );
    let o = ddkf(&["build", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert_eq!(error_category(&o), "insufficient-data");
    assert!(!dir.path().join("result.json").exists());
}

#[test]
fn configuration_errors_are_reported_by_category() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = write_config(dir.path(), "c.json", &json!({"schema_version": 1, "bulid": {}}));
    let o = ddkf(&["build", "--config", cfg.to_str().unwrap(), "--out", d]);
    assert_eq!((o.status.code(), error_category(&o).as_str()), (Some(4), "schema"));

    let cfg = write_config(dir.path(), "c2.json", &json!({"schema_version": 1}));
    let o = ddkf(&["predict", "--config", cfg.to_str().unwrap(), "--out", d]);
    assert_eq!(error_category(&o), "schema");

    let o = ddkf(&["build", "--config", dir.path().join("missing.json").to_str().unwrap(), "--out", d]);
    assert_eq!((o.status.code(), error_category(&o).as_str()), (Some(3), "io"));

    let cfg = write_config(
        dir.path(),
        "c3.json",
        &json!({"schema_version": 1, "build": {"data": "d.csv", "past_horizon": 4, "t_p": 3, "t_f": 2, "n_x_bar": 1}}),
    );
    std::fs::write(dir.path().join("d.csv"), "u:a,q:b\n1,2\n").unwrap();
    let o = ddkf(&["build", "--config", cfg.to_str().unwrap(), "--out", d]);
    assert_eq!(error_category(&o), "schema");
}

fn small_benchmark(dir: &Path) -> PathBuf {
    let mut c = ddkf::benchmark::BenchmarkConfig::standard(774.0, 7);
    c.mc_runs = 2;
    c.n_samples = 800;
    c.past_horizon = 40;
    c.t_p = 12;
    c.t_f = 10;
    write_config(dir, "bench.json", &json!({"schema_version": 1, "benchmark": c}))
}

#[test]
fn repeated_benchmarks_have_identical_payloads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_benchmark(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("benchmark", &cfg, &a);
    let o = ddkf(&["benchmark", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success());
    let (ra, rb) = (read_json(&a.join("result.json")), read_json(&b.join("result.json")));
    assert_schema_valid(&ra);
    assert_eq!(serde_json::to_string(&ra["payload"]).unwrap(), serde_json::to_string(&rb["payload"]).unwrap());
    assert_eq!(ra["payload_sha256"], rb["payload_sha256"]);
    assert_eq!(
        ra["payload_sha256"].as_str().unwrap(),
        ddkf_cli::output::json_sha256(&ra["payload"]).unwrap()
    );
    for f in ["runs.csv", "boxplot.json", "innovations_run0.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let runs = std::fs::read_to_string(a.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 4);

    // the seed flag changes the realizations
    let c = dir.path().join("c");
    let o = ddkf(&["benchmark", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "8"]);
    assert!(o.status.success());
    let rc = read_json(&c.join("result.json"));
    assert_eq!(rc["payload"]["master_seed"], 8);
    assert_ne!(rc["payload_sha256"], ra["payload_sha256"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_roundtrip_is_lossless(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 2..40)) {
        let n = values.len() / 2;
        let m = DMatrix::from_row_slice(2, n, &values[..2 * n]);
        let t = Trajectory::with_prefix(m, "c", None).unwrap();
        let text = ddkf_cli::csv_io::format_trajectories(&[("w", &t)]).unwrap();
        let back = parse_trajectories(&text, None).unwrap();
        prop_assert_eq!(back.w.unwrap(), t);
    }
}
