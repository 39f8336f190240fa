use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use skm_core::io::{
    load_cell_values, load_contacts, load_ids, load_observations, load_states, read_json,
};

fn skm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skm"))
        .args(args)
        .env_remove("SKM_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs `simulate` into `dir/name` with extra flags and returns the directory.
fn simulate(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["simulate", "--out", s(&out)];
    args.extend_from_slice(extra);
    let res = skm(&args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    out
}

fn manifest(dir: &Path) -> Value {
    read_json(&dir.join("manifest.json")).unwrap()
}

fn posterior_values(dir: &Path, ids: &Path) -> Vec<f64> {
    let ids = load_ids(ids).unwrap();
    load_cell_values(&dir.join("posterior.jsonl"), &ids)
        .unwrap()
        .iter()
        .map(|v| v.value)
        .collect()
}

#[test]
fn simulated_files_load() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path(), "d", &["--m", "12", "--t", "40", "--seed", "2"]);
    let ids = load_ids(&data.join("ids.jsonl")).unwrap();
    assert_eq!(ids.len(), 12);
    let obs = load_observations(&data.join("observations.jsonl"), &ids, None).unwrap();
    assert_eq!((obs.horizon(), obs.num_individuals()), (40, 12));
    let contacts = load_contacts(&data.join("contacts.jsonl"), Some(&ids), None).unwrap();
    assert_eq!(contacts.graph.horizon(), 40);
    assert_eq!(
        load_states(&data.join("truth.jsonl"), &ids).unwrap().len(),
        40
    );
    let m = manifest(&data);
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seeds"][0], 2);
    assert_eq!(m["outputs"].as_object().unwrap().len(), 5);
}

#[test]
fn identical_seeds_give_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let flags = ["--m", "15", "--t", "30", "--seed", "9"];
    let a = simulate(tmp.path(), "a", &flags);
    let b = simulate(tmp.path(), "b", &flags);
    let c = simulate(tmp.path(), "c", &["--m", "15", "--t", "30", "--seed", "10"]);
    assert_eq!(manifest(&a)["outputs"], manifest(&b)["outputs"]);
    assert_ne!(
        manifest(&a)["outputs"]["truth.jsonl"],
        manifest(&c)["outputs"]["truth.jsonl"]
    );

    for (name, dir) in [("ia", &a), ("ib", &b)] {
        let out = tmp.path().join(name);
        let res = skm(&["infer", "--dir", s(dir), "--out", s(&out), "--seed", "4"]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
    }
    assert_eq!(
        manifest(&tmp.path().join("ia"))["outputs"],
        manifest(&tmp.path().join("ib"))["outputs"]
    );
}

#[test]
fn infection_rate_too_high_for_density_is_a_model_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let res = skm(&[
        "simulate",
        "--m",
        "40",
        "--density",
        "10",
        "--c2",
        "0.3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("hazard"), "{}", stderr(&res));
    let res = skm(&["simulate", "--c1", "1.5", "--out", s(&out)]);
    assert_eq!(code(&res), 2);
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path(), "d", &["--m", "5", "--t", "10"]);
    let out = tmp.path().join("o");
    assert_eq!(
        code(&skm(&[
            "infer",
            "--dir",
            s(&data),
            "--method",
            "magic",
            "--out",
            s(&out)
        ])),
        1
    );
    assert_eq!(code(&skm(&["infer", "--dir", s(&data)])), 1);
    assert_eq!(code(&skm(&["frobnicate"])), 1);
    let res = skm(&[
        "infer",
        "--dir",
        s(&data),
        "--task",
        "smooth",
        "--query-time",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 1);
    let res = skm(&[
        "infer",
        "--dir",
        s(&data),
        "--task",
        "predict",
        "--method",
        "gibbs",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 1);
    assert_eq!(code(&skm(&["--help"])), 0);
}

#[test]
fn corrupt_inputs_are_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path(), "d", &["--m", "5", "--t", "10"]);
    std::fs::write(
        data.join("observations.jsonl"),
        "{\"M\":5,\"T\":10,\"S\":2}\n{\"t\":1,\"m\":0,\"y\":7}\n",
    )
    .unwrap();
    let res = skm(&[
        "infer",
        "--dir",
        s(&data),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&res), 2);
    assert!(
        stderr(&res).contains("observations.jsonl:2"),
        "{}",
        stderr(&res)
    );
    let res = skm(&[
        "infer",
        "--dir",
        s(&tmp.path().join("missing")),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn single_individual_vi_matches_exact_output() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(
        tmp.path(),
        "d",
        &[
            "--m",
            "1",
            "--t",
            "60",
            "--prevalence",
            "0.5",
            "--c3",
            "0.05",
        ],
    );
    let mut runs = Vec::new();
    for method in ["viskm", "exact"] {
        let out = tmp.path().join(method);
        let res = skm(&[
            "infer",
            "--dir",
            s(&data),
            "--method",
            method,
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        runs.push(posterior_values(&out, &data.join("ids.jsonl")));
    }
    assert_eq!(runs[0].len(), 60);
    for (a, b) in runs[0].iter().zip(&runs[1]) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn exact_scores_serve_as_an_oracle_for_small_populations() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(
        tmp.path(),
        "d",
        &[
            "--m",
            "3",
            "--t",
            "25",
            "--density",
            "1",
            "--prevalence",
            "0.4",
        ],
    );
    let mut runs = Vec::new();
    for method in ["exact", "viskm", "pf"] {
        let out = tmp.path().join(method);
        let res = skm(&[
            "infer",
            "--dir",
            s(&data),
            "--method",
            method,
            "--iters",
            "5000",
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        runs.push(posterior_values(&out, &data.join("ids.jsonl")));
    }
    for approx in &runs[1..] {
        let worst = runs[0]
            .iter()
            .zip(approx)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "max deviation {worst}");
    }
}

#[test]
fn exact_inference_beyond_the_cap_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path(), "d", &["--m", "30", "--t", "10"]);
    let res = skm(&[
        "infer",
        "--dir",
        s(&data),
        "--method",
        "exact",
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("exceeds the cap"), "{}", stderr(&res));
}

#[test]
fn non_convergence_is_flagged_but_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path(), "d", &["--m", "20", "--t", "50"]);
    let out = tmp.path().join("o");
    let res = skm(&["infer", "--dir", s(&data), "--iters", "1", "--out", s(&out)]);
    assert_eq!(code(&res), 0);
    assert_eq!(manifest(&out)["diagnostics"]["converged"], false);
}

#[test]
fn every_task_and_evaluation_writes_its_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path(), "d", &["--m", "20", "--t", "60", "--seed", "5"]);
    for task in ["predict", "smooth", "expand"] {
        let out = tmp.path().join(task);
        let res = skm(&["infer", "--dir", s(&data), "--task", task, "--out", s(&out)]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        let ev = tmp.path().join(format!("eval-{task}"));
        let res = skm(&[
            "eval",
            "--scores",
            s(&out.join("scores.jsonl")),
            "--truth",
            s(&data.join("truth.jsonl")),
            "--posterior",
            s(&out.join("posterior.jsonl")),
            "--out",
            s(&ev),
        ]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        let summary: Value = read_json(&ev.join("eval.json")).unwrap();
        let auc = summary["auc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc));
        let roc = std::fs::read_to_string(ev.join("roc.csv")).unwrap();
        assert!(roc.starts_with("threshold,fpr,tpr\n"));
        assert_eq!(
            std::fs::read_to_string(ev.join("counts.csv"))
                .unwrap()
                .lines()
                .count(),
            61
        );
    }
}

#[test]
fn learning_writes_trace_and_flags_empty_data() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path(), "d", &["--m", "10", "--t", "100"]);
    let out = tmp.path().join("learn");
    let res = skm(&[
        "learn",
        "--dir",
        s(&data),
        "--init-c",
        "0.2,0.1,0.01",
        "--max-em-iters",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 5);
    assert!(trace.lines().nth(1).unwrap().starts_with("0,0.2,0.1,0.01"));
    let rates: Value = read_json(&out.join("rates.json")).unwrap();
    assert_eq!(rates["iterations"], 3);
    assert_eq!(manifest(&out)["diagnostics"]["degenerate"], false);

    std::fs::write(
        data.join("observations.jsonl"),
        "{\"M\":10,\"T\":100,\"S\":2}\n",
    )
    .unwrap();
    let res = skm(&[
        "learn",
        "--dir",
        s(&data),
        "--max-em-iters",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(manifest(&out)["diagnostics"]["degenerate"], true);
    assert!(stderr(&res).contains("degenerate"));

    let res = skm(&[
        "learn",
        "--dir",
        s(&data),
        "--init-c",
        "0.2,0.1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 1);
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path(), "d", &["--m", "25", "--t", "40"]);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let res = Command::new(env!("CARGO_BIN_EXE_skm"))
            .args([
                "infer",
                "--dir",
                s(&data),
                "--threads",
                "8",
                "--out",
                s(&out),
            ])
            .env("SKM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        let m = manifest(&out);
        assert_eq!(m["threads"].as_u64().unwrap().to_string(), threads);
        outputs.push(m["outputs"].clone());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bench_writes_one_row_per_size() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench");
    let res = skm(&[
        "bench",
        "--sizes",
        "5,10",
        "--iters",
        "2",
        "--repeats",
        "1",
        "--horizon",
        "20",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let csv = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(
        code(&skm(&["bench", "--sizes", "10,5", "--out", s(&out)])),
        2
    );
}
