//! End-to-end runs of the `vgs` binary on the bundled demo environment:
//! filter, collect, train, search, sweep (with resume), flops, and report.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vgs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vgs"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).unwrap().to_path_buf()
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.current_dir(repo_root()).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn filter_separates_kept_and_dropped_with_rules() {
    let dir = tempfile::tempdir().unwrap();
    let kept = dir.path().join("kept.jsonl");
    let dropped = dir.path().join("dropped.jsonl");
    let out = run_ok(vgs().args([
        "filter",
        "--corpus",
        "demo/raw-corpus.jsonl",
        "--out",
        kept.to_str().unwrap(),
        "--dropped",
        dropped.to_str().unwrap(),
    ]));
    let text = stdout(&out);
    assert!(text.contains("kept 2 of 7"), "{text}");
    let kept_lines = std::fs::read_to_string(&kept).unwrap();
    assert_eq!(kept_lines.lines().count(), 2);
    let dropped_lines = std::fs::read_to_string(&dropped).unwrap();
    assert_eq!(dropped_lines.lines().count(), 5);
    for rule in ["boxed_count", "unverifiable_answer", "multiple_choice", "multi_part", "contains_link"]
    {
        assert!(dropped_lines.contains(rule), "missing rule {rule} in {dropped_lines}");
    }
}

#[test]
fn flops_json_emits_the_reference_table() {
    let out = run_ok(vgs().args(["flops", "--json"]));
    let table: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rel = |x: f64, t: f64| (x / t - 1.0).abs();
    assert!(rel(table["generation_1_5b"].as_f64().unwrap(), 49.1e12) < 5e-3);
    assert!(rel(table["generation_7b"].as_f64().unwrap(), 229e12) < 5e-3);
    assert!(rel(table["generation_14b"].as_f64().unwrap(), 459e12) < 5e-3);
    assert!(rel(table["generation_37b_activated"].as_f64().unwrap(), 1212e12) < 5e-3);
    assert_eq!(table["scorer_1_5b_per_generation"].as_f64().unwrap(), 12e9);
    assert_eq!(table["scorer_7b_per_generation"].as_f64().unwrap(), 56e9);
    assert!(rel(table["total_budget_256"].as_f64().unwrap(), 12.6e15) < 5e-3);
    assert!(rel(table["overhead_fraction_1_5b"].as_f64().unwrap(), 2.4e-4) < 0.02);
}

#[test]
fn flops_custom_params() {
    let out = run_ok(vgs().args([
        "flops",
        "--gen-params",
        "7e9",
        "--scorer-params",
        "7e9",
        "--ctx",
        "16384",
        "--block",
        "4096",
        "--budget",
        "128",
        "--json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["generations"][0]["flops"].as_f64().unwrap(), 2.0 * 7e9 * 16384.0);
    assert_eq!(v["scorer_per_generation"].as_f64().unwrap(), 56e9);
}

#[test]
fn search_emits_transcript_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    run_ok(vgs().args([
        "search",
        "--config",
        "demo/config.toml",
        "--budget",
        "16",
        "--width",
        "2",
        "--seed",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["method"], "vgs");
    assert_eq!(summary["budget"], 16);
    assert_eq!(summary["problems"], 8);
    assert!(summary["accuracy"].as_f64().unwrap() > 0.0);
    assert!(summary["config_hash"].as_str().unwrap().len() == 16);
    // Budget accounting is internally consistent: value calls equal sampled
    // blocks plus final responses (8 beams per problem).
    let calls = summary["value_calls"].as_u64().unwrap();
    let blocks: u64 = summary["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["tokens"].as_u64().unwrap())
        .sum();
    assert_eq!(calls, blocks + 8 * 8, "one call per block boundary plus one per final");
    // Transcript lines parse and carry candidates.
    let transcript = std::fs::read_to_string(out_dir.join("transcript.jsonl")).unwrap();
    assert!(!transcript.is_empty());
    for line in transcript.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["candidates"].as_array().unwrap().len() <= 16);
        assert!(!v["selected"].as_array().unwrap().is_empty());
    }
}

#[test]
fn search_rejects_invalid_width_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = vgs()
        .args([
            "search",
            "--config",
            "demo/config.toml",
            "--budget",
            "16",
            "--width",
            "3",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .current_dir(repo_root())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("invalid_config"), "{stderr}");
    assert!(stderr.contains("beam_width"), "{stderr}");
}

#[test]
fn collect_train_search_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let out = run_ok(vgs().args([
        "collect",
        "--config",
        "demo/config.toml",
        "--rollins",
        "4",
        "--cuts",
        "2",
        "--out",
        data_dir.to_str().unwrap(),
    ]));
    let text = stdout(&out);
    assert!(text.contains("8 records per problem"), "{text}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data_dir.join("manifest.json")).unwrap())
            .unwrap();
    let total: u64 =
        manifest["shards"].as_array().unwrap().iter().map(|s| s["records"].as_u64().unwrap()).sum();
    assert_eq!(total, 8 * 8);

    // Re-running is a no-op resume.
    let out = run_ok(vgs().args([
        "collect",
        "--config",
        "demo/config.toml",
        "--rollins",
        "4",
        "--cuts",
        "2",
        "--out",
        data_dir.to_str().unwrap(),
    ]));
    assert!(stdout(&out).contains("(8 resumed)"), "{}", stdout(&out));

    let ckpt = dir.path().join("value.json");
    let curve = dir.path().join("curve.csv");
    run_ok(vgs().args([
        "train",
        "--config",
        "demo/config.toml",
        "--data",
        data_dir.to_str().unwrap(),
        "--kind",
        "value",
        "--epochs",
        "30",
        "--lr",
        "2.0",
        "--batch-size",
        "32",
        "--val-split",
        "10",
        "--out",
        ckpt.to_str().unwrap(),
        "--curve",
        curve.to_str().unwrap(),
    ]));
    assert!(ckpt.exists());
    let curve_text = std::fs::read_to_string(&curve).unwrap();
    assert!(curve_text.lines().count() > 25);

    // Search guided by the trained checkpoint.
    let run_dir = dir.path().join("ckpt-run");
    let config_override = dir.path().join("ckpt-config.toml");
    let base = std::fs::read_to_string(repo_root().join("demo/config.toml")).unwrap();
    let patched = base.replace(
        "[scorer]\nkind = \"oracle\"",
        &format!("[scorer]\nkind = \"checkpoint\"\npath = \"{}\"", ckpt.display()),
    );
    std::fs::write(&config_override, patched).unwrap();
    let out = run_ok(vgs().args([
        "search",
        "--config",
        config_override.to_str().unwrap(),
        "--budget",
        "16",
        "--out",
        run_dir.to_str().unwrap(),
    ]));
    assert!(stdout(&out).contains("accuracy"));

    // Bradley-Terry training on the same shards.
    let bt_ckpt = dir.path().join("bt.json");
    run_ok(vgs().args([
        "train",
        "--config",
        "demo/config.toml",
        "--data",
        data_dir.to_str().unwrap(),
        "--kind",
        "bt",
        "--epochs",
        "20",
        "--lr",
        "1.0",
        "--batch-size",
        "16",
        "--out",
        bt_ckpt.to_str().unwrap(),
    ]));
    let bt: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&bt_ckpt).unwrap()).unwrap();
    assert!(bt["pairs"].as_u64().unwrap() > 0);
}

#[test]
fn sweep_resume_and_report_totals() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_dir = dir.path().join("sweep");
    let out = run_ok(vgs().args([
        "sweep",
        "--config",
        "demo/config.toml",
        "--out",
        sweep_dir.to_str().unwrap(),
        "--workers",
        "2",
    ]));
    let text = stdout(&out);
    // methods: mv/wmv/bon/random/vgs x budgets {4,16,64} x seeds {0,1,2}:
    // 3 baselines x 3 x 3 = 27 plus 2 search methods x 3 x 3 = 18.
    assert!(text.contains("45 cells"), "{text}");
    let csv_text = std::fs::read_to_string(sweep_dir.join("cells.csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 46); // header + 45 rows
    assert!(csv_text.starts_with(
        "method,budget,accuracy_mean,accuracy_std,flops_total,flops_overhead_fraction,tokens_total,value_calls"
    ));

    // Re-run: every cell is resumed, nothing recomputed.
    let out = run_ok(vgs().args([
        "sweep",
        "--config",
        "demo/config.toml",
        "--out",
        sweep_dir.to_str().unwrap(),
    ]));
    assert!(stdout(&out).contains("(45 resumed, 0 failed)"), "{}", stdout(&out));

    let report = dir.path().join("report.csv");
    run_ok(vgs().args([
        "report",
        "--dir",
        sweep_dir.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]));
    let report_text = std::fs::read_to_string(&report).unwrap();
    assert!(report_text.contains("TOTAL"));

    // Report totals equal the sum over cell rows.
    let mut cells = csv::Reader::from_path(sweep_dir.join("cells.csv")).unwrap();
    let mut cell_tokens: u64 = 0;
    for rec in cells.records() {
        let rec = rec.unwrap();
        cell_tokens += rec[6].parse::<u64>().unwrap();
    }
    let mut report_rdr = csv::Reader::from_path(&report).unwrap();
    let mut total_row_tokens = None;
    for rec in report_rdr.records() {
        let rec = rec.unwrap();
        if &rec[0] == "TOTAL" {
            total_row_tokens = Some(rec[8].parse::<u64>().unwrap());
        }
    }
    assert_eq!(total_row_tokens, Some(cell_tokens));

    // At the largest budget, value-guided search beats majority voting on
    // this corpus (the modal answer is wrong by construction).
    let mut vgs_acc = Vec::new();
    let mut mv_acc = Vec::new();
    let mut cells = csv::Reader::from_path(sweep_dir.join("cells.csv")).unwrap();
    for rec in cells.records() {
        let rec = rec.unwrap();
        if &rec[1] == "64" {
            match &rec[0] {
                "vgs" => vgs_acc.push(rec[2].parse::<f64>().unwrap()),
                "mv" => mv_acc.push(rec[2].parse::<f64>().unwrap()),
                _ => {}
            }
        }
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    assert!(mean(&vgs_acc) > mean(&mv_acc), "vgs {vgs_acc:?} vs mv {mv_acc:?}");
}
