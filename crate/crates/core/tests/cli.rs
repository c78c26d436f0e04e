use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mkpoe::comparison::{read_comparisons, write_comparisons};
use mkpoe::embedding::read_coordinates;
use mkpoe::synth::{generate_comparisons, plant_contradictions, Taxonomy};
use mkpoe::{Comparison, EmbeddingModel, KernelMatrix};

fn mkpoe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mkpoe"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = mkpoe(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn report_value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {report}"))
        .to_string()
}

fn square() -> Vec<Comparison> {
    let sides = [(0, 1), (1, 2), (2, 3), (0, 3)];
    let diagonals = [(0, 2), (1, 3)];
    sides
        .iter()
        .flat_map(|&(i, j)| diagonals.iter().map(move |&(k, l)| Comparison::new(i, j, k, l)))
        .collect()
}

#[test]
fn clean_input_passes_graph_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let tax = Taxonomy::default_tree();
    let comps = generate_comparisons(&tax, &tax.items(3), 4, 300);
    write_comparisons(dir.path().join("c.txt"), &comps).unwrap();
    let stats = ok(
        dir.path(),
        &["graph", "c.txt", "--prune-contradictions", "--max-acyclic", "1", "--reduce", "--stats", "-o", "out.txt"],
    );
    for key in ["removed_duplicates", "removed_contradictions", "removed_cycles", "removed_redundant"] {
        assert_eq!(report_value(&stats, key), "0");
    }
    assert_eq!(read_comparisons(dir.path().join("out.txt")).unwrap(), comps);
}

#[test]
fn planted_contradictions_are_removed_twice() {
    let dir = tempfile::tempdir().unwrap();
    let tax = Taxonomy::default_tree();
    let comps = generate_comparisons(&tax, &tax.items(3), 5, 300);
    let planted = plant_contradictions(&comps, 17, 6);
    write_comparisons(dir.path().join("c.txt"), &planted).unwrap();
    let stats = ok(dir.path(), &["graph", "c.txt", "--prune-contradictions", "--stats", "-o", "out.txt"]);
    assert_eq!(report_value(&stats, "removed_contradictions"), "34");
    assert_eq!(report_value(&stats, "input"), planted.len().to_string());
}

#[test]
fn cyclic_reduce_without_acyclic_stage_fails() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), "0 1 0 2\n0 2 0 3\n0 3 0 1\n").unwrap();
    let out = mkpoe(dir.path(), &["graph", "c.txt", "--reduce", "-o", "out.txt"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("->"), "no witness in {err}");
    // breaking cycles first makes it succeed
    ok(dir.path(), &["graph", "c.txt", "--max-acyclic", "3", "--reduce", "-o", "out.txt"]);
}

#[test]
fn oracle_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_comparisons(dir.path().join("sq.txt"), &square()).unwrap();
    ok(dir.path(), &["oracle", "-c", "sq.txt", "-n", "4", "-o", "x.txt"]);
    assert_eq!(read_coordinates(dir.path().join("x.txt")).unwrap().shape(), (4, 3));
    let report = ok(dir.path(), &["eval", "--coords", "x.txt", "-c", "sq.txt"]);
    assert_eq!(report_value(&report, "gauc"), "1.0000000000000000e0");
    assert_eq!(report_value(&report, "comparisons"), "8");

    let reversed: Vec<Comparison> = square().iter().map(Comparison::reversed).collect();
    write_comparisons(dir.path().join("rev.txt"), &reversed).unwrap();
    let report = ok(dir.path(), &["eval", "--coords", "x.txt", "-c", "rev.txt", "-o", "r.txt"]);
    assert!(report.is_empty());
    let report = fs::read_to_string(dir.path().join("r.txt")).unwrap();
    assert_eq!(report_value(&report, "gauc"), "0.0000000000000000e0");

    fs::write(dir.path().join("cyc.txt"), "0 1 2 3\n2 3 0 1\n").unwrap();
    assert_eq!(mkpoe(dir.path(), &["oracle", "-c", "cyc.txt", "-n", "4", "-o", "y.txt"]).status.code(), Some(1));
}

#[test]
fn train_embed_eval_with_identity_kernel() {
    let dir = tempfile::tempdir().unwrap();
    write_comparisons(dir.path().join("sq.txt"), &square()).unwrap();
    ok(dir.path(), &["train", "--identity-kernel", "4", "-c", "sq.txt", "--beta", "100", "-o", "m.txt", "--trace", "t.csv"]);
    let model = EmbeddingModel::load(dir.path().join("m.txt")).unwrap();
    assert_eq!(model.n, 4);
    assert_eq!(model.provenance.kernels, vec!["identity:4".to_string()]);
    assert!(fs::read_to_string(dir.path().join("t.csv")).unwrap().starts_with("iteration,objective"));

    KernelMatrix::identity(4).write(dir.path().join("id.txt")).unwrap();
    ok(dir.path(), &["embed", "-m", "m.txt", "-k", "id.txt", "-o", "x.txt"]);
    let x = read_coordinates(dir.path().join("x.txt")).unwrap();
    assert_eq!(x, model.embed_train(&[KernelMatrix::identity(4)]).unwrap());
    let report = ok(dir.path(), &["eval", "--model", "m.txt", "-k", "id.txt", "-c", "sq.txt"]);
    assert_eq!(report_value(&report, "gauc"), "1.0000000000000000e0");

    // out-of-sample column file: the training items themselves
    fs::write(dir.path().join("cols.txt"), "1 0 0 0\n0 0 1 0\n").unwrap();
    ok(dir.path(), &["embed", "-m", "m.txt", "--columns", "cols.txt", "-o", "y.txt"]);
    let y = read_coordinates(dir.path().join("y.txt")).unwrap();
    assert_eq!(y.row(0), x.row(0));
    assert_eq!(y.row(1), x.row(2));

    let missing = mkpoe(dir.path(), &["embed", "-m", "m.txt", "-k", "nope.txt", "-o", "z.txt"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    write_comparisons(dir.path().join("sq.txt"), &square()).unwrap();
    fs::write(dir.path().join("hp.cfg"), "# settings\nbeta=5\nmax_iter=7\nstep0=0.5\n").unwrap();
    ok(
        dir.path(),
        &["train", "--identity-kernel", "4", "-c", "sq.txt", "--config", "hp.cfg", "--beta", "50", "-o", "m.txt"],
    );
    let hp = EmbeddingModel::load(dir.path().join("m.txt")).unwrap().provenance.hyperparams.unwrap();
    assert_eq!((hp.beta, hp.max_iter, hp.step0), (50.0, 7, 0.5));

    fs::write(dir.path().join("bad.cfg"), "beta=lots\n").unwrap();
    let out = mkpoe(dir.path(), &["train", "--identity-kernel", "4", "-c", "sq.txt", "--config", "bad.cfg", "-o", "m.txt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn divergence_exits_with_two_and_keeps_trace() {
    let dir = tempfile::tempdir().unwrap();
    write_comparisons(dir.path().join("sq.txt"), &square()).unwrap();
    let out = mkpoe(
        dir.path(),
        &["train", "--identity-kernel", "4", "-c", "sq.txt", "--beta", "1e7", "--step0", "100", "-o", "m.txt", "--trace", "t.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
    assert!(dir.path().join("t.csv").exists());
    assert!(!dir.path().join("m.txt").exists());
}

#[test]
fn synth_is_deterministic_and_clean() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec!["synth", "--per-class", "4", "--budget", "400", "--noise-kernels", "2", "--seed", "9", "--out", out]
    };
    ok(dir.path(), &args("a"));
    ok(dir.path(), &args("b"));
    let files = ["comparisons.txt", "kernel-0.txt", "kernel-1.txt", "kernel-2.txt", "kernel-3.txt", "labels.txt", "train.txt", "test.txt"];
    for f in files {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    assert!(!dir.path().join("a/kernel-4.txt").exists());
    let stats = ok(
        dir.path(),
        &["graph", "a/comparisons.txt", "--prune-contradictions", "--max-acyclic", "0", "--reduce", "--stats", "-o", "c.txt"],
    );
    assert_eq!(report_value(&stats, "input"), report_value(&stats, "after_reduction"));
    let labels = fs::read_to_string(dir.path().join("a/labels.txt")).unwrap();
    assert_eq!(labels.lines().count(), 40);
}

#[test]
fn cross_validated_training_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--per-class", "3", "--budget", "300", "--noise-kernels", "0", "--kernels", "0.5", "--out", "ds"]);
    let out = ok(
        dir.path(),
        &["train", "-k", "ds/kernel-0.txt", "-c", "ds/comparisons.txt", "--cv", "0.1,100:3", "--step0", "0.01", "--max-iter", "50", "-o", "m.txt"],
    );
    let best = report_value(&out, "best_beta");
    assert!(best == "0.1" || best == "100", "{out}");
    assert!(out.contains("beta,mean_gauc"));
    let hp = EmbeddingModel::load(dir.path().join("m.txt")).unwrap().provenance.hyperparams.unwrap();
    assert_eq!(hp.beta.to_string(), best);
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(dir.path(), &["--help"]);
    for cmd in ["graph", "train", "embed", "eval", "synth", "oracle"] {
        assert!(help.contains(cmd));
    }
    assert!(ok(dir.path(), &["train", "--help"]).contains("--identity-kernel"));
    assert_eq!(mkpoe(dir.path(), &["train"]).status.code(), Some(1));
    assert_eq!(mkpoe(dir.path(), &["frobnicate"]).status.code(), Some(1));
}
