use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

use trajpost::pipeline::{
    run_pipeline, stub_generate, stub_generate_with, write_records, RunConfig, StubOptions,
};
use trajpost::{EvalRecord, EvalSummary};

fn write_corpus(dir: &Path, records: &[EvalRecord]) -> std::path::PathBuf {
    let path = dir.join("records.in.jsonl");
    let mut f = fs::File::create(&path).unwrap();
    write_records(&mut f, records).unwrap();
    path
}

fn run(records: &[EvalRecord], tweak: impl FnOnce(&mut RunConfig)) -> (TempDir, EvalSummary) {
    let dir = TempDir::new().unwrap();
    let input = write_corpus(dir.path(), records);
    let mut cfg = RunConfig::new(input, dir.path().join("out"));
    tweak(&mut cfg);
    let out = run_pipeline(&cfg).unwrap();
    assert!(out.load_diagnostics.is_empty());
    (dir, out.summary)
}

fn diagnostics(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join("out/records.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn jittered() -> StubOptions {
    StubOptions {
        length_error_rate: 0.0,
        malformed_rate: 0.0,
        ..StubOptions::default()
    }
}

#[test]
fn clean_corpus_scores_zero_without_refinement() {
    let records = stub_generate_with(60, 4, &StubOptions::clean());
    let (_dir, summary) = run(&records, |c| c.refine = false);
    assert_eq!(summary.ade_5s, Some(0.0));
    assert_eq!(summary.ade_3s, Some(0.0));
    assert_eq!(summary.n_records, 60);
    assert_eq!(summary.n_parse_failures, 0);
    assert_eq!(summary.n_length_failures, 0);
}

#[test]
fn clean_corpus_barely_moves_with_refinement() {
    let records = stub_generate_with(60, 4, &StubOptions::clean());
    let (_dir, summary) = run(&records, |_| {});
    assert_eq!(summary.n_parse_failures + summary.n_length_failures, 0);
    // smooth ground truth is close to a local quadratic everywhere
    assert!(summary.ade_5s.unwrap() < 0.05, "{:?}", summary.ade_5s);
}

#[test]
fn refinement_lowers_smoothness_on_jitter() {
    let records = stub_generate_with(200, 12, &jittered());
    let (_a, on) = run(&records, |_| {});
    let (_b, off) = run(&records, |c| c.refine = false);
    assert!(on.mean_smoothness_post.unwrap() < off.mean_smoothness_post.unwrap());
    assert_eq!(on.mean_smoothness_pre, off.mean_smoothness_pre);
}

#[test]
fn one_malformed_record_is_one_parse_failure() {
    let mut records = stub_generate_with(10, 2, &StubOptions::clean());
    let raw = records[3].raw_text.take().unwrap();
    records[3].raw_text = Some(raw.replace("<TRAJ_END>", ""));
    let (dir, summary) = run(&records, |_| {});
    assert_eq!(summary.n_parse_failures, 1);
    assert_eq!(summary.n_length_failures, 0);
    let diag = &diagnostics(dir.path())[3];
    assert_eq!(diag["status"], "parse_failure");
    assert_eq!(diag["error_kind"], "malformed_structure");
}

#[test]
fn every_record_appears_once_in_input_order() {
    let records = stub_generate(150, 21);
    let (dir, summary) = run(&records, |c| c.workers = 4);
    let diags = diagnostics(dir.path());
    let ids: Vec<&str> = diags.iter().map(|d| d["id"].as_str().unwrap()).collect();
    let want: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, want);

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for d in &diags {
        *counts.entry(d["status"].as_str().unwrap()).or_default() += 1;
    }
    assert_eq!(
        counts.get("parse_failure").copied().unwrap_or(0),
        summary.n_parse_failures
    );
    assert_eq!(
        counts.get("length_failure").copied().unwrap_or(0),
        summary.n_length_failures
    );
    assert_eq!(counts["ok"], summary.n_scored());
}

#[test]
fn summary_json_keys_match_fields() {
    let (dir, summary) = run(&stub_generate(20, 3), |_| {});
    let json: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap())
            .unwrap();
    let mut keys: Vec<&str> = json
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        [
            "ade_3s",
            "ade_5s",
            "mean_smoothness_post",
            "mean_smoothness_pre",
            "n_length_failures",
            "n_parse_failures",
            "n_records",
        ]
    );
    assert_eq!(json["n_records"], 20);
    let text = fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert_eq!(text, summary.to_report_text());
}

#[test]
fn plots_only_for_flagged_records() {
    let records = stub_generate_with(30, 5, &jittered());
    let (dir, _) = run(&records, |c| c.emit_plots = true);
    let flagged = diagnostics(dir.path())
        .iter()
        .filter(|d| {
            d["status"] == "ok"
                && (!d["outliers"].as_array().unwrap().is_empty()
                    || !d["keypoints"].as_array().unwrap().is_empty())
        })
        .count();
    let plots: Vec<_> = fs::read_dir(dir.path().join("out/plots"))
        .unwrap()
        .collect();
    assert_eq!(plots.len(), flagged);
    assert!(flagged > 0);
    for p in plots {
        let body = fs::read_to_string(p.unwrap().path()).unwrap();
        assert!(body.starts_with("<svg"));
    }
}

#[test]
fn missing_input_is_fatal() {
    let dir = TempDir::new().unwrap();
    let cfg = RunConfig::new(dir.path().join("absent.jsonl"), dir.path().join("out"));
    assert!(run_pipeline(&cfg).is_err());
}

#[test]
fn bad_lines_are_skipped_with_diagnostics() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.jsonl");
    fs::write(
        &input,
        "{\"id\":\"a\",\"pred\":[[0,0],[1,0]],\"gt\":[[0,0],[1,0]]}\nnot json\n{\"id\":\"b\"}\n",
    )
    .unwrap();
    let out = run_pipeline(&RunConfig::new(&input, dir.path().join("out"))).unwrap();
    let lines: Vec<usize> = out.load_diagnostics.iter().map(|d| d.line).collect();
    assert_eq!(lines, [2, 3]);
    assert_eq!(out.summary.n_records, 1);
    // a 2-point ground truth cannot be scored against 20 steps
    assert_eq!(out.summary.n_length_failures, 1);
}

fn cli(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_trajpost"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn cli_parse() {
    let text = "<DESC_START>clear road<DESC_END><DECI_START>keep lane<DECI_END>\
                <TRAJ_START>(1.0,0.0),(2.0,0.5)<TRAJ_END>";
    let json: Value = serde_json::from_str(&stdout(&cli(&["parse"], Some(text)))).unwrap();
    assert_eq!(json["description"], "clear road");
    assert_eq!(json["decision"], "keep lane");
    assert_eq!(
        json["trajectory"],
        serde_json::json!([[1.0, 0.0], [2.0, 0.5]])
    );

    let bad = cli(&["parse"], Some("<DESC_START>x<DESC_END>"));
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("malformed_structure"));
}

#[test]
fn cli_refine() {
    let line: Vec<[f64; 2]> = (0..15).map(|i| [i as f64, 0.0]).collect();
    let input = format!(
        "{}\n{{\"id\":\"t\",\"points\":{}}}\n",
        serde_json::to_string(&line).unwrap(),
        serde_json::to_string(&line).unwrap()
    );
    let out = stdout(&cli(&["refine"], Some(&input)));
    let rows: Vec<Value> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].get("id").is_none());
    assert_eq!(rows[1]["id"], "t");
    for row in &rows {
        let pts = row["points"].as_array().unwrap();
        assert_eq!(pts.len(), 20);
        // extrapolated straight line is a fixed point of refinement
        for (i, p) in pts.iter().enumerate() {
            assert!((p[0].as_f64().unwrap() - i as f64).abs() < 1e-9);
            assert!(p[1].as_f64().unwrap().abs() < 1e-12);
        }
        assert_eq!(row["outliers"], serde_json::json!([]));
        assert_eq!(row["windows"].as_array().unwrap().len(), 20);
    }

    let short = stdout(&cli(&["refine", "--target-len", "10"], Some(&input)));
    let first: Value = serde_json::from_str(short.lines().next().unwrap()).unwrap();
    assert_eq!(first["points"].as_array().unwrap().len(), 10);

    let invalid = cli(&["refine", "--min-window", "4"], Some(&input));
    assert!(!invalid.status.success());
}

#[test]
fn cli_prompt() {
    let spec = r#"{"ego_history":[[0,10,0]],"nav":"turn left"}"#;
    let text = stdout(&cli(&["prompt"], Some(spec)));
    assert_eq!(text.matches("<image:").count(), 5);
    assert_eq!(text.matches("t=0.00s v=10.00m/s a=0.00m/s²").count(), 1);
    assert!(text.contains("turn left"));
    assert_eq!(text, stdout(&cli(&["prompt"], Some(spec))));
}

#[test]
fn cli_gen_matches_library() {
    let out = stdout(&cli(&["gen", "--n", "25", "--seed", "9"], None));
    let mut want = Vec::new();
    write_records(&mut want, &stub_generate(25, 9)).unwrap();
    assert_eq!(out.as_bytes(), want.as_slice());
}

#[test]
fn cli_eval_config_file_and_overrides() {
    let dir = TempDir::new().unwrap();
    let input = write_corpus(dir.path(), &stub_generate_with(40, 6, &jittered()));
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "input = {:?}\noutput = {:?}\nworkers = 2\nrefine = false\n",
            input.to_str().unwrap(),
            dir.path().join("from_file").to_str().unwrap()
        ),
    )
    .unwrap();

    let off = stdout(&cli(&["eval", "--config", config.to_str().unwrap()], None));
    assert!(dir.path().join("from_file/summary.json").exists());
    assert!(off.contains("n_records = 40"));

    // flags win over the file; here only the output directory is overridden
    let flagged = dir.path().join("from_flags");
    let again = stdout(&cli(
        &[
            "eval",
            "--config",
            config.to_str().unwrap(),
            "--output",
            flagged.to_str().unwrap(),
        ],
        None,
    ));
    assert_eq!(again, off);
    assert_eq!(
        fs::read(flagged.join("summary.json")).unwrap(),
        fs::read(dir.path().join("from_file/summary.json")).unwrap()
    );

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "wokers = 2\n").unwrap();
    assert!(!cli(&["eval", "--config", bad.to_str().unwrap()], None)
        .status
        .success());
}

#[test]
fn cli_eval_missing_input_fails() {
    let dir = TempDir::new().unwrap();
    let out = cli(
        &[
            "eval",
            "--input",
            dir.path().join("nope.jsonl").to_str().unwrap(),
            "--output",
            dir.path().join("out").to_str().unwrap(),
        ],
        None,
    );
    assert!(!out.status.success());
}
