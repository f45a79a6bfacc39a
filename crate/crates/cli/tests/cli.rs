use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vissample::io::{parse_graph_json, parse_matrix_csv, parse_sampling_set_json, parse_signals_csv};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vissample"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().last().expect("summary line");
    serde_json::from_str(line).expect("summary is JSON")
}

const DDGL: &str = r#"{"n": 4, "edges": [[0, 1, 1.0], [1, 2, 1.0], [2, 3, 1.0]], "q": [0.4, 0.1, 0.3, 0.2]}"#;
const CGL: &str = r#"{"n": 4, "edges": [[0, 1, 1.0], [1, 2, 1.0], [2, 3, 1.0]]}"#;

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["sample", "--help"]).status.code(), Some(0));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["sample", "--bogus", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn vis_without_importance_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    fs::write(&g, CGL).unwrap();
    let out = run(&["sample", "--graph", p(&g), "--method", "vis", "--k", "2", "--out", p(&dir.path().join("s.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no vertex importances"));
    assert!(!dir.path().join("s.json").exists());
}

#[test]
fn bad_budget_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    fs::write(&g, DDGL).unwrap();
    let out = run(&["sample", "--graph", p(&g), "--method", "visr", "--k", "9", "--out", p(&dir.path().join("s.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sample_methods_write_valid_sets() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    fs::write(&g, DDGL).unwrap();
    for method in ["greedy", "vis", "visr", "random", "bernoulli"] {
        let s = dir.path().join(format!("{method}.json"));
        let out = run(&["sample", "--graph", p(&g), "--method", method, "--k", "2", "--seed", "3", "--out", p(&s)]);
        assert_eq!(out.status.code(), Some(0), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        let set = parse_sampling_set_json(&fs::read_to_string(&s).unwrap(), Some(4)).unwrap();
        assert!(!set.is_empty());
        if method != "bernoulli" {
            assert_eq!(set.len(), 2);
        }
        assert_eq!(stdout_json(&out)["command"], "sample");
    }
    let vis = parse_sampling_set_json(&fs::read_to_string(dir.path().join("vis.json")).unwrap(), Some(4)).unwrap();
    assert_eq!(vis.indices, vec![0, 2]);
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let out = run(&[
        "gen-data", "--n", "12", "--r", "0.3", "--num-train", "300", "--num-test", "5",
        "--sigma", "0.1", "--seed", "4", "--out-dir", p(&data),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cov_text = fs::read_to_string(data.join("covariance.csv")).unwrap();
    let cov = parse_matrix_csv(&cov_text).unwrap();
    assert_eq!(cov.order(), 12);
    assert_eq!(vissample::io::write_matrix_csv(&cov), cov_text);
    assert_eq!(parse_signals_csv(&fs::read_to_string(data.join("train.csv")).unwrap()).unwrap().len(), 300);

    // Learn from the empirical covariance of the training draws.
    let train = parse_signals_csv(&fs::read_to_string(data.join("train.csv")).unwrap()).unwrap();
    let batch = vissample::synth::SignalBatch::new(train, 0, 0.0).unwrap();
    let s = vissample::synth::empirical_covariance(&batch).unwrap();
    let s_path = d.join("s.csv");
    fs::write(&s_path, vissample::io::write_matrix_csv(&s)).unwrap();

    let g = d.join("g.json");
    let out = run(&["learn", "--cov", p(&s_path), "--model", "ddgl", "--out", p(&g)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert!(summary["objective"].is_f64());
    assert!(summary["sweeps"].as_u64().unwrap() >= 1);
    let graph_text = fs::read_to_string(&g).unwrap();
    let graph = parse_graph_json(&graph_text).unwrap();
    assert!(graph.vertex_importance().unwrap().iter().all(|&q| q > 0.0));
    assert_eq!(vissample::io::write_graph_json(&graph), graph_text);

    let set = d.join("set.json");
    let out = run(&["sample", "--graph", p(&g), "--method", "visr", "--k", "6", "--out", p(&set)]);
    assert_eq!(out.status.code(), Some(0));

    let rec = d.join("rec.csv");
    let out = run(&[
        "reconstruct", "--graph", p(&g), "--set", p(&set), "--signals", p(&data.join("test_noisy.csv")),
        "--use-q", "true", "--out", p(&rec),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_signals_csv(&fs::read_to_string(&rec).unwrap()).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.len() == 12));

    // Re-running gives identical bytes.
    let rec2 = d.join("rec2.csv");
    run(&[
        "reconstruct", "--graph", p(&g), "--set", p(&set), "--signals", p(&data.join("test_noisy.csv")),
        "--use-q", "true", "--out", p(&rec2),
    ]);
    assert_eq!(fs::read(&rec).unwrap(), fs::read(&rec2).unwrap());
}

#[test]
fn reconstruct_accepts_observation_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("g.json"), CGL).unwrap();
    fs::write(d.join("set.json"), r#"{"method": "manual", "indices": [3, 0]}"#).unwrap();
    fs::write(d.join("y.csv"), "2,1\n").unwrap();
    fs::write(d.join("f.csv"), "1,0,0,2\n").unwrap();
    for (input, name) in [("y.csv", "a.csv"), ("f.csv", "b.csv")] {
        let out = run(&[
            "reconstruct", "--graph", p(&d.join("g.json")), "--set", p(&d.join("set.json")),
            "--signals", p(&d.join(input)), "--use-q", "false", "--out", p(&d.join(name)),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    let f = &parse_signals_csv(&fs::read_to_string(d.join("a.csv")).unwrap()).unwrap()[0];
    assert!((f[0] - 1.0).abs() < 0.05 && (f[3] - 2.0).abs() < 0.05);
}

#[test]
fn bench_row_count_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{"n": 15, "r": 0.2, "train_count": 100, "test_count": 4, "budgets": [3, 6],
                  "sigma_levels": [0.1, 1.0], "seeds": [0, 1, 2]}"#;
    fs::write(d.join("cfg.json"), cfg).unwrap();
    let out_dir = d.join("out");
    let out = run(&["bench", "--config", p(&d.join("cfg.json")), "--out-dir", p(&out_dir), "--emit-svg", "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let results = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 5 * 2 * 2 * 3);
    assert_eq!(stdout_json(&out)["rows"], 60);
    for f in ["summary.csv", "timings.csv", "run.json", "series_sigma_0.1.csv", "mse_vs_budget_sigma_1.svg"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }

    let bad = d.join("bad.json");
    fs::write(&bad, r#"{"budgets": [500]}"#).unwrap();
    assert_eq!(run(&["bench", "--config", p(&bad), "--out-dir", p(&out_dir)]).status.code(), Some(1));
}
