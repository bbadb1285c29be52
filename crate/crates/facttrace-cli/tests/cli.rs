//! End-to-end run of the binary: synth -> index -> trace -> baseline -> eval.

use std::path::Path;
use std::process::Command;

fn facttrace(args: &[&str], dir: &Path) -> String {
    let output = Command::new(env!("CARGO_BIN_EXE_facttrace"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "facttrace {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    format!(
        "{}{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    )
}

#[test]
fn full_offline_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    facttrace(
        &[
            "synth", "--out", "data", "--docs", "400", "--topics", "8", "--queries", "12",
            "--seed", "5",
        ],
        root,
    );
    assert!(root.join("data/corpus.jsonl").exists());
    assert!(root.join("data/queries.jsonl").exists());
    assert!(root.join("data/rules.json").exists());

    let out = facttrace(
        &[
            "index",
            "--corpus", "data/corpus.jsonl",
            "--provider", "hash",
            "--dim", "64",
            "--k", "10",
            "--c", "60",
            "--seeds", "1,2",
            "--llm", "scripted:data/rules.json",
            "--out", "idx",
            "--cache",
        ],
        root,
    );
    assert!(out.contains("labeled"));
    assert!(root.join("idx/index-seed1.json").exists());
    assert!(root.join("idx/index-seed2.json").exists());
    assert!(root.join("idx/embed_cache.jsonl").exists());

    let out = facttrace(
        &[
            "trace",
            "--index-dir", "idx",
            "--corpus", "data/corpus.jsonl",
            "--queries", "data/queries.jsonl",
            "--b", "15",
            "--fuzzy-threshold", "80",
            "--llm", "scripted:data/rules.json",
            "--out", "results.jsonl",
        ],
        root,
    );
    assert!(out.contains("traced 12 queries"));
    assert!(out.contains("0 failed"));

    let out = facttrace(
        &[
            "baseline",
            "--method", "bm25",
            "--corpus", "data/corpus.jsonl",
            "--queries", "data/queries.jsonl",
            "--topk", "1,10,25",
            "--keep-top", "50",
            "--out", "ranked.jsonl",
        ],
        root,
    );
    assert!(out.contains("best F1"));

    let out = facttrace(
        &[
            "eval",
            "--results", "results.jsonl",
            "--queries", "data/queries.jsonl",
            "--ranked", "ranked.jsonl",
            "--topk", "1,10,25",
            "--corpus", "data/corpus.jsonl",
            "--out", "report.json",
        ],
        root,
    );
    assert!(out.contains("trace (macro)"));
    assert!(out.contains("upper bound (perfect stage 2)"));
    assert!(root.join("report.json").exists());

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("report.json")).unwrap()).unwrap();
    let f1 = report["macro_avg"]["f1"].as_f64().unwrap();
    assert!(f1 > 0.9, "offline pipeline macro F1 {f1} unexpectedly low");
    assert!(report["ranked_sweep"]["best"]["f1"].as_f64().unwrap() <= f1);

    // Embedding baseline path as well.
    let out = facttrace(
        &[
            "baseline",
            "--method", "embed",
            "--corpus", "data/corpus.jsonl",
            "--queries", "data/queries.jsonl",
            "--provider", "hash",
            "--dim", "64",
            "--out", "ranked_embed.jsonl",
        ],
        root,
    );
    assert!(out.contains("ranked 12 queries"));
}

#[test]
fn synth_supports_padding_and_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    facttrace(
        &[
            "synth", "--out", "data", "--docs", "300", "--topics", "6", "--queries", "10",
            "--seed", "3", "--pad-to", "600", "--shadows", "4", "--perturb",
        ],
        root,
    );
    assert!(root.join("data/queries_perturbed.jsonl").exists());
    let corpus_lines = std::fs::read_to_string(root.join("data/corpus.jsonl")).unwrap();
    assert_eq!(corpus_lines.lines().count(), 600);
}
