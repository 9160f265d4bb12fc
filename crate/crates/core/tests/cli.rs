mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::*;

fn jointtag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointtag"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

fn setup(dir: &Path) {
    let corpus = toy_corpus(6, 2);
    fs::write(dir.join("train.conllu"), to_conllu(&corpus)).unwrap();
    fs::write(dir.join("dev.conllu"), to_conllu(&corpus[..2])).unwrap();
    fs::write(dir.join("vectors.txt"), embeddings_text(&random_embeddings(&[&corpus], 8, 1))).unwrap();
    fs::write(
        dir.join("small.toml"),
        "char_emb_dim = 4\nchar_lstm_dim = 4\nextractor_dim = 6\ndecoder_dim = 6\npos_emb_dim = 3\n",
    )
    .unwrap();
}

fn train_args(dir: &Path, extra: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = vec![
        "train".into(),
        "--train".into(),
        path(dir, "train.conllu"),
        "--dev".into(),
        path(dir, "dev.conllu"),
        "--embeddings".into(),
        path(dir, "vectors.txt"),
        "--out".into(),
        path(dir, "model"),
        "--config".into(),
        path(dir, "small.toml"),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run(args: &[String]) -> Output {
    jointtag(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn one_epoch_writes_one_history_record() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = run(&train_args(dir.path(), &["--max-epochs", "1"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    let record: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(record["epoch"], 1);
    assert_eq!(record["lr"], 0.001);
    assert!(record["dev"]["total"].as_f64().unwrap() > 0.0);

    let history = fs::read_to_string(dir.path().join("model/history.jsonl")).unwrap();
    assert_eq!(history, stdout);
    for name in ["schema.toml", "weights.bin"] {
        assert!(dir.path().join("model").join(name).is_file(), "{name} missing");
    }
}

#[test]
fn unreadable_training_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    fs::remove_file(dir.path().join("train.conllu")).unwrap();
    let out = run(&train_args(dir.path(), &[]));
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("model").exists());
}

#[test]
fn bad_flag_values_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    assert_eq!(run(&train_args(dir.path(), &["--patience", "0"])).status.code(), Some(2));
    assert_eq!(run(&train_args(dir.path(), &["--lambda-feat", "Case"])).status.code(), Some(2));
    assert_eq!(jointtag(&["predict", "--model", "/nonexistent"]).status.code(), Some(2));
    assert_eq!(jointtag(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_scores_and_rejects_misaligned_files() {
    let dir = tempfile::tempdir().unwrap();
    let gold = toy_corpus(3, 4);
    let mut system = gold.clone();
    system[0][0].1 = "WRONG".into();
    fs::write(dir.path().join("gold.conllu"), to_conllu(&gold)).unwrap();
    fs::write(dir.path().join("system.conllu"), to_conllu(&system)).unwrap();
    fs::write(dir.path().join("short.conllu"), to_conllu(&gold[..2])).unwrap();
    let (g, s) = (path(dir.path(), "gold.conllu"), path(dir.path(), "system.conllu"));

    let out = jointtag(&["eval", "--gold", &g, "--pred", &g]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("POS 100.00 UFeats 100.00 Lemma 100.00"));

    let words = gold.iter().map(Vec::len).sum::<usize>() as f64;
    let out = jointtag(&["eval", "--gold", &g, "--pred", &s, "--records"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("pos_accuracy=100.00"));
    assert!(stdout.contains(&format!("lemma_accuracy={:.2}", 100.0 * (words - 1.0) / words)));

    let out = jointtag(&["eval", "--gold", &g, "--pred", &path(dir.path(), "short.conllu")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn predict_uses_embeddings_recorded_in_the_model() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    assert!(run(&train_args(dir.path(), &["--max-epochs", "2"])).status.success());
    fs::write(dir.path().join("input.conllu"), FIDELITY_FIXTURE).unwrap();
    let (model, input, output) = (
        path(dir.path(), "model"),
        path(dir.path(), "input.conllu"),
        path(dir.path(), "output.conllu"),
    );
    let out = jointtag(&["predict", "--model", &model, "--input", &input, "--output", &output]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let predicted = parse_conllu_file(&output);
    assert_eq!(predicted.sentences.len(), 2);

    fs::remove_file(dir.path().join("vectors.txt")).unwrap();
    let out = jointtag(&["predict", "--model", &model, "--input", &input, "--output", &output]);
    assert_eq!(out.status.code(), Some(2));
}

fn parse_conllu_file(p: &str) -> jointtag::conllu::Document {
    jointtag::conllu::parse_conllu(&fs::read_to_string(p).unwrap()).unwrap()
}
