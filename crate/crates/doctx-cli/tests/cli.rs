//! Integration tests driving the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_doctx"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawning doctx");
    assert!(
        out.status.success(),
        "doctx {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str]) -> i32 {
    let out = bin().args(args).output().expect("spawning doctx");
    out.status.code().expect("exit code")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// Byte-compares every regular file in two directories, non-recursively.
fn assert_dirs_identical(a: &Path, b: &Path) {
    let list = |d: &Path| -> Vec<String> {
        let mut names: Vec<String> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
    };
    assert_eq!(list(a), list(b), "{} and {} differ in files", a.display(), b.display());
    for name in list(a) {
        let left = std::fs::read(a.join(&name)).unwrap();
        let right = std::fs::read(b.join(&name)).unwrap();
        assert_eq!(left, right, "{name} differs between runs");
    }
}

fn tiny_gen(out: &Path, seed: &str) {
    run_ok(&[
        "gen-data",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        seed,
        "--set",
        "n_docs=4",
        "--set",
        "n_valid_docs=1",
        "--set",
        "n_test_docs=2",
        "--set",
        "sents_per_doc=6",
    ]);
}

fn tiny_train(data: &Path, out: &Path) {
    run_ok(&[
        "train",
        "--arch",
        "concat",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
        "--set",
        "max_epochs=2",
        "--set",
        "d_model=16",
        "--set",
        "d_ffn=32",
        "--set",
        "n_heads=2",
        "--set",
        "warmup=10",
    ]);
}

#[test]
fn gen_data_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    tiny_gen(&a, "21");
    tiny_gen(&b, "21");
    assert_dirs_identical(&a, &b);
    assert!(read(&a.join("manifest.gen-data.txt")).contains("cfg.n_docs=4"));

    let c = dir.path().join("c");
    tiny_gen(&c, "22");
    assert_ne!(
        std::fs::read(a.join("train.docs.tsv")).unwrap(),
        std::fs::read(c.join("train.docs.tsv")).unwrap(),
        "different seeds draw different corpora"
    );
}

#[test]
fn config_files_layer_under_set_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.cfg");
    std::fs::write(&cfg, "# comment\nn_docs=5\nn_test_docs=2\n\nn_valid_docs=1\nsents_per_doc=5\n")
        .unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "gen-data",
        "--out",
        out.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "n_docs=3",
    ]);
    let manifest = read(&out.join("manifest.gen-data.txt"));
    assert!(manifest.contains("cfg.n_docs=3"), "--set wins over the file");
    assert!(manifest.contains("cfg.n_test_docs=2"), "file wins over the default");
    assert!(manifest.contains("input.config.0.sha256="));
}

#[test]
fn usage_errors_exit_two_and_data_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out_s = out.to_str().unwrap();

    assert_eq!(exit_code(&["gen-data", "--out", out_s, "--set", "bogus=3"]), 2);
    assert_eq!(exit_code(&["gen-data", "--out", out_s, "--set", "no_equals"]), 2);
    assert_eq!(exit_code(&["gen-data"]), 2, "missing required flag");
    assert_eq!(
        exit_code(&["train", "--arch", "bogus", "--data", out_s, "--out", out_s]),
        2,
        "clap rejects unknown arch values"
    );
    assert_eq!(exit_code(&["no-such-command"]), 2);

    assert_eq!(
        exit_code(&["train", "--arch", "concat", "--data", "/nonexistent", "--out", out_s]),
        1,
        "missing data directory is a data error"
    );
    assert_eq!(
        exit_code(&["gen-data", "--out", out_s, "--set", "n_docs=0"]),
        1,
        "invalid generator config is a data error"
    );
    assert_eq!(exit_code(&["report", "--results", "/nonexistent", "--out", out_s]), 1);
}

#[test]
fn train_translate_smoke_with_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_gen(&data, "31");
    let model = dir.path().join("model");
    tiny_train(&data, &model);
    assert!(model.join("model.ckpt").exists());
    assert!(read(&model.join("train.summary.txt")).contains("arch=concat_2to2"));
    assert!(read(&model.join("manifest.train.txt")).contains("cfg.max_epochs=2"));

    let ckpt = model.join("model.ckpt");
    let t1 = dir.path().join("t1");
    let t2 = dir.path().join("t2");
    for t in [&t1, &t2] {
        run_ok(&[
            "translate",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            t.to_str().unwrap(),
            "--k",
            "2",
            "--beam",
            "2",
            "--context-mode",
            "random",
            "--seed",
            "9",
        ]);
    }
    assert_dirs_identical(&t1, &t2);
    let text = read(&t1.join("translations.tsv"));
    assert!(!text.is_empty());
    for line in text.lines() {
        assert_eq!(line.split('\t').count(), 3, "doc_id TAB index TAB tokens: `{line}`");
    }

    assert_eq!(
        exit_code(&[
            "translate",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            dir.path().join("t3").to_str().unwrap(),
            "--k",
            "99",
        ]),
        1,
        "k beyond the checkpoint's max_context"
    );
    assert_eq!(
        exit_code(&[
            "translate",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            dir.path().join("t4").to_str().unwrap(),
            "--star",
        ]),
        1,
        "--star needs a sentence checkpoint"
    );
}

#[test]
fn report_consumes_files_alone_and_flags_dominated_points() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results");
    // Spec'd example: A=(50,2) dominated by B=(60,3).
    for (name, f1, ante) in [("model_a", "50.000000", "2.000000"), ("model_b", "60.000000", "3.000000")]
    {
        let d = results.join(name);
        std::fs::create_dir_all(&d).unwrap();
        std::fs::write(
            d.join("evaluate.tsv"),
            format!("bleu\tx.k5\t10.000000\nf1.pronoun\tx.k5\t{f1}\n"),
        )
        .unwrap();
        std::fs::write(
            d.join("attribution.summary.txt"),
            format!("examples=4\nmean.antecedent_pct={ante}\n"),
        )
        .unwrap();
    }
    let out1 = dir.path().join("r1");
    let out2 = dir.path().join("r2");
    run_ok(&["report", "--results", results.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    run_ok(&["report", "--results", results.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert_dirs_identical(&out1, &out2);

    let pareto = read(&out1.join("pareto.tsv"));
    let lines: Vec<&str> = pareto.lines().collect();
    assert_eq!(lines[0], "#model\tf1_pronoun\tantecedent_pct\tstatus");
    assert_eq!(lines[1], "model_a\t50.000000\t2.000000\tdominated");
    assert_eq!(lines[2], "model_b\t60.000000\t3.000000\tnon_dominated");

    let report = read(&out1.join("report.tsv"));
    assert!(report.contains("model_a\tevaluate\tf1.pronoun\tx.k5\t50.000000"));
    assert!(report.contains("model_b\tattribute\tmean.antecedent_pct\t-\t3.000000"));

    // Single model: trivially non-dominated.
    let solo = dir.path().join("solo");
    std::fs::create_dir_all(solo.join("only")).unwrap();
    std::fs::write(solo.join("only/evaluate.tsv"), "f1.pronoun\tx.k5\t12.500000\n").unwrap();
    std::fs::write(solo.join("only/attribution.summary.txt"), "mean.antecedent_pct=7.000000\n")
        .unwrap();
    let out3 = dir.path().join("r3");
    run_ok(&["report", "--results", solo.to_str().unwrap(), "--out", out3.to_str().unwrap()]);
    assert!(read(&out3.join("pareto.tsv")).contains("only\t12.500000\t7.000000\tnon_dominated"));
}

#[test]
fn perturb_at_k_zero_has_identical_correct_and_random_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_gen(&data, "41");
    let model = dir.path().join("model");
    tiny_train(&data, &model);
    let out = dir.path().join("pt");
    run_ok(&[
        "perturb",
        "--checkpoint",
        model.join("model.ckpt").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--k",
        "0",
        "--beam",
        "2",
    ]);
    let table = read(&out.join("perturb.tsv"));
    let row: Vec<&str> = table.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[1], row[2], "bleu correct == bleu random at k=0");
    assert_eq!(row[4], "0.000000", "cxmi correct is zero at k=0");
    assert_eq!(row[5], "0.000000", "cxmi random is zero at k=0");
}

#[test]
fn helper_dirs_equal_detects_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    std::fs::write(a.join("f"), "same").unwrap();
    std::fs::write(b.join("f"), "same").unwrap();
    assert_dirs_identical(&a, &b);
    let result = std::panic::catch_unwind(|| {
        let a: PathBuf = a.clone();
        let b: PathBuf = b.clone();
        std::fs::write(b.join("f"), "diff").unwrap();
        assert_dirs_identical(&a, &b);
    });
    assert!(result.is_err());
}
