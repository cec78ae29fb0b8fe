use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ideal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ideal"))
        .args(args)
        .env_remove("IDEAL_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_jsonl(path: &Path, rows: &[(&str, Vec<f64>)]) {
    let text: String = rows
        .iter()
        .map(|(id, v)| format!("{}\n", serde_json::json!({"id": id, "vector": v})))
        .collect();
    fs::write(path, text).unwrap();
}

/// Twelve points on the unit circle, ids `p0`..`p11`.
fn circle(dir: &Path) -> String {
    let rows: Vec<(String, Vec<f64>)> = (0..12)
        .map(|i| {
            let a = i as f64 * 0.5;
            (format!("p{i}"), vec![a.cos(), a.sin(), 0.3])
        })
        .collect();
    let refs: Vec<(&str, Vec<f64>)> = rows
        .iter()
        .map(|(id, v)| (id.as_str(), v.clone()))
        .collect();
    let path = dir.join("pool.jsonl");
    write_jsonl(&path, &refs);
    path.to_string_lossy().into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn json(path: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn build_graph_from_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let e = dir.path().join("e.jsonl");
    write_jsonl(
        &e,
        &[
            ("a", vec![1.0, 0.0, 0.0]),
            ("b", vec![0.0, 1.0, 0.0]),
            ("c", vec![1.0, 1.0, 0.0]),
        ],
    );
    let out = path(dir.path(), "g.txt");
    let o = ideal(&[
        "build-graph",
        "--embeddings",
        e.to_str().unwrap(),
        "--k",
        "2",
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("n=3 k=2"));
    let g = ideal::graph::DiffusionGraph::load(&out).unwrap();
    assert_eq!(g.n(), 3);
    let meta = json(&format!("{out}.meta.json"));
    assert_eq!(meta["config"]["k"], 2);
    assert!(meta["metadata"]["threads"].is_u64());
}

#[test]
fn build_graph_defaults_to_ten_neighbors() {
    let dir = tempfile::tempdir().unwrap();
    let pool = circle(dir.path());
    let out = path(dir.path(), "g.txt");
    let o = ideal(&["build-graph", "--embeddings", &pool, "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&out)
        .unwrap()
        .starts_with("IDEALGRAPH v1 n=12 k=10 "));
    let help = stdout(&ideal(&["build-graph", "--help"]));
    assert!(help.contains("[default: 10]"));
}

#[test]
fn missing_input_is_a_usage_error() {
    let o = ideal(&[
        "build-graph",
        "--embeddings",
        "/no/such/file.jsonl",
        "--out",
        "/tmp/x",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/file.jsonl"));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let pool = circle(dir.path());
    let o = ideal(&[
        "build-graph",
        "--embeddings",
        &pool,
        "--out",
        "/no/such/dir/g.txt",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn select_rejects_bad_budgets_and_methods() {
    let dir = tempfile::tempdir().unwrap();
    let pool = circle(dir.path());
    let out = path(dir.path(), "s.json");
    for budget in ["0", "13"] {
        let o = ideal(&[
            "select",
            "--method",
            "random",
            "--embeddings",
            &pool,
            "--budget",
            budget,
            "--out",
            &out,
        ]);
        assert_eq!(o.status.code(), Some(2), "budget {budget}");
    }
    let o = ideal(&[
        "select",
        "--method",
        "greedy",
        "--embeddings",
        &pool,
        "--budget",
        "2",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = ideal(&[
        "select",
        "--method",
        "ideal",
        "--embeddings",
        &pool,
        "--budget",
        "2",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--graph"));
}

#[test]
fn random_selection_is_reproducible_and_honours_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let pool = circle(dir.path());
    let run = |out: &str, extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ideal"));
        cmd.args([
            "select",
            "--method",
            "random",
            "--embeddings",
            &pool,
            "--budget",
            "4",
            "--out",
            out,
        ]);
        cmd.args(extra);
        cmd.env_remove("IDEAL_SEED");
        if let Some(seed) = env {
            cmd.env("IDEAL_SEED", seed);
        }
        assert!(cmd.status().unwrap().success());
        json(out)["selected"].clone()
    };
    let a = run(&path(dir.path(), "a.json"), &["--seed", "42"], None);
    let b = run(&path(dir.path(), "b.json"), &["--seed", "42"], None);
    let c = run(&path(dir.path(), "c.json"), &[], Some("42"));
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a.as_array().unwrap().len(), 4);
}

#[test]
fn select_ideal_writes_ids_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let pool = circle(dir.path());
    let graph = path(dir.path(), "g.txt");
    assert!(ideal(&[
        "build-graph",
        "--embeddings",
        &pool,
        "--k",
        "3",
        "--out",
        &graph
    ])
    .status
    .success());
    let out = path(dir.path(), "s.json");
    let o = ideal(&[
        "select",
        "--graph",
        &graph,
        "--embeddings",
        &pool,
        "--budget",
        "3",
        "--lazy",
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&out);
    assert_eq!(s["method"], "ideal-lazy");
    assert_eq!(s["selected"].as_array().unwrap().len(), 3);
    assert!(s["selected"][0].as_str().unwrap().starts_with('p'));
    assert_eq!(s["marginal_gains"].as_array().unwrap().len(), 3);
    assert_eq!(s["config"]["reps"], 10);
    assert_eq!(s["config"]["k"], 3);
    let keys: Vec<&String> = s.as_object().unwrap().keys().collect();
    assert_eq!(
        keys,
        [
            "method",
            "budget",
            "selected",
            "marginal_gains",
            "seed",
            "evaluations",
            "wall_time_ms",
            "config",
            "metadata"
        ]
    );
}

#[test]
fn influence_of_everything_is_n() {
    let dir = tempfile::tempdir().unwrap();
    let pool = circle(dir.path());
    let graph = path(dir.path(), "g.txt");
    assert!(ideal(&[
        "build-graph",
        "--embeddings",
        &pool,
        "--k",
        "3",
        "--out",
        &graph
    ])
    .status
    .success());
    let all = path(dir.path(), "all.txt");
    fs::write(&all, (0..12).map(|i| format!("p{i}\n")).collect::<String>()).unwrap();
    let out = path(dir.path(), "inf.json");
    let o = ideal(&[
        "influence",
        "--graph",
        &graph,
        "--embeddings",
        &pool,
        "--subset",
        &all,
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&out);
    assert_eq!(v["estimate"]["mean"], 12.0);
    assert_eq!(v["estimate"]["reps"], 10);

    let empty = path(dir.path(), "empty.txt");
    fs::write(&empty, "\n").unwrap();
    let o = ideal(&["influence", "--graph", &graph, "--subset", &empty]);
    assert_eq!(o.status.code(), Some(2));

    let unknown = path(dir.path(), "unknown.txt");
    fs::write(&unknown, "nobody\n").unwrap();
    let o = ideal(&[
        "influence",
        "--graph",
        &graph,
        "--embeddings",
        &pool,
        "--subset",
        &unknown,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nobody"));
}

#[test]
fn trace_export_lists_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let graph = path(dir.path(), "g.txt");
    ideal::graph::DiffusionGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)])
        .unwrap()
        .save(&graph)
        .unwrap();
    let subset = path(dir.path(), "s.txt");
    fs::write(&subset, "0\n").unwrap();
    let out = path(dir.path(), "t.json");
    assert!(
        ideal(&["trace", "--graph", &graph, "--subset", &subset, "--out", &out])
            .status
            .success()
    );
    let t = json(&out);
    assert_eq!(t["seed_set"], serde_json::json!([0]));
    assert_eq!(t["rounds"][1][0]["vertex"], 2);
    assert_eq!(t["rounds"][1][0]["activated_by"], 1);
}

#[test]
fn retrieve_emits_one_line_per_query() {
    let dir = tempfile::tempdir().unwrap();
    let pool = circle(dir.path());
    let selection = path(dir.path(), "s.json");
    fs::write(&selection, r#"{"method":"random","budget":3,"selected":["p0","p3","p6"],"marginal_gains":[],"seed":0,"evaluations":0,"wall_time_ms":0.0}"#).unwrap();
    let queries = dir.path().join("q.jsonl");
    let p3 = (1.5f64.cos(), 1.5f64.sin());
    write_jsonl(
        &queries,
        &[
            ("q0", vec![p3.0, p3.1, 0.3]),
            ("q1", vec![1.0, 0.0, 0.0]),
            ("q2", vec![0.0, 0.0, 1.0]),
        ],
    );
    let out = path(dir.path(), "r.jsonl");
    let o = ideal(&[
        "retrieve",
        "--embeddings",
        &pool,
        "--selection",
        &selection,
        "--queries",
        queries.to_str().unwrap(),
        "--c",
        "1",
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<Value> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["query_id"], "q0");
    assert_eq!(lines[0]["prompts"], serde_json::json!(["p3"]));
    assert!((lines[0]["similarities"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let o = ideal(&[
        "retrieve",
        "--embeddings",
        &pool,
        "--selection",
        &selection,
        "--queries",
        queries.to_str().unwrap(),
        "--c",
        "9",
        "--out",
        &out,
    ]);
    assert!(o.status.success());
    let first: Value =
        serde_json::from_str(fs::read_to_string(&out).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["prompts"].as_array().unwrap().len(), 3);
}

#[test]
fn auto_annotate_full_manual_set() {
    let dir = tempfile::tempdir().unwrap();
    let pool = circle(dir.path());
    let graph = path(dir.path(), "g.txt");
    assert!(ideal(&[
        "build-graph",
        "--embeddings",
        &pool,
        "--k",
        "2",
        "--out",
        &graph
    ])
    .status
    .success());
    let manual = path(dir.path(), "m.txt");
    fs::write(
        &manual,
        (0..12).map(|i| format!("p{i}\n")).collect::<String>(),
    )
    .unwrap();
    let out = path(dir.path(), "sched.json");
    let o = ideal(&[
        "auto-annotate",
        "--graph",
        &graph,
        "--embeddings",
        &pool,
        "--manual",
        &manual,
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("scheduled 12 of 12"));
    assert_eq!(json(&out)["rounds"], serde_json::json!([]));

    fs::write(&manual, "p0\n").unwrap();
    let o = ideal(&[
        "auto-annotate",
        "--graph",
        &graph,
        "--embeddings",
        &pool,
        "--manual",
        &manual,
        "--out",
        &out,
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("scheduled 12 of 12"));
    assert!(stdout(&o).contains("fallbacks"));
    let keys: Vec<String> = json(&out).as_object().unwrap().keys().cloned().collect();
    assert_eq!(keys, ["manual", "rounds", "config", "metadata"]);
}

#[test]
fn verify_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "v.json");
    let o = ideal(&["verify", "--trials", "20", "--seed", "3", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("overall: pass"));
    let report = json(&out);
    assert_eq!(report["pass"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 4);
    assert_eq!(report["checks"][0]["graphs"].as_array().unwrap().len(), 20);
    // Each graph is replayable from its recorded seed.
    let spec: ideal::theory::GraphSpec =
        serde_json::from_value(report["checks"][0]["spec"].clone()).unwrap();
    let first = &report["checks"][0]["graphs"][0];
    let (g, _) = ideal::theory::random_graph(&spec, first["seed"].as_u64().unwrap()).unwrap();
    assert_eq!(g.n() as u64, first["n"].as_u64().unwrap());
}
