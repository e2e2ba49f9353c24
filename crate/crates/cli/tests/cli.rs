use std::path::Path;
use std::process::{Command, Output};

use lscd_core::eval::{DUREL_TSV, SUREL_TSV};

fn lscd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lscd")).args(args).output().expect("spawn lscd")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path) {
    let out = lscd(&["synth", "--targets", "8", "--tokens", "20000", "--seed", "3", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_config(dir: &Path, extra: &str) -> String {
    let text = format!(
        "corpus_a = {0}/corpus_a.txt\ncorpus_b = {0}/corpus_b.txt\ntargets = {0}/targets.txt\ngold = {0}/gold.tsv\n\
         space = ppmi\nalign = ci\nmeasure = cd\nwindow = 5\nwindow_mode = fixed\n{extra}",
        dir.display()
    );
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn dump_gold_prints_embedded_fixtures() {
    assert_eq!(stdout(&lscd(&["dump-gold", "durel"])), DUREL_TSV);
    assert_eq!(stdout(&lscd(&["dump-gold", "surel"])), SUREL_TSV);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let cfg = write_config(dir.path(), "");
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let out_dir = dir.path().join(name);
        let out = lscd(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("Spearman rho"));
        outputs.push(out_dir);
    }
    for file in ["scores.tsv", "report.tsv", "config.txt"] {
        let a = std::fs::read(outputs[0].join(file)).unwrap();
        let b = std::fs::read(outputs[1].join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn randomized_runs_with_iterations_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let cfg = write_config(dir.path(), "space = sgns\nalign = op\ndim = 10\nepochs = 1\nk = 2\n");
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let out_dir = dir.path().join(name);
        let out = lscd(&["run", "--config", &cfg, "--iterations", "2", "--seed", "5", "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(out_dir);
    }
    for file in ["scores.tsv", "report.tsv", "config.txt", "procrustes.txt"] {
        assert_eq!(
            std::fs::read(outputs[0].join(file)).unwrap(),
            std::fs::read(outputs[1].join(file)).unwrap(),
            "{file} differs"
        );
    }
    let report = std::fs::read_to_string(outputs[0].join("report.tsv")).unwrap();
    assert!(report.contains("iterations\t2"));
}

#[test]
fn overrides_apply_in_order_and_config_dumps() {
    let out = lscd(&[
        "validate",
        "--set",
        "space=svd",
        "--set",
        "align=op+",
        "--set",
        "seed=1",
        "--seed",
        "9",
        "--set",
        "corpus_a=a.txt",
        "--set",
        "corpus_b=b.txt",
        "--set",
        "targets=t.txt",
        "--dump-config",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("space = svd"), "{text}");
    assert!(text.contains("align = op+"), "{text}");
    assert!(text.contains("seed = 9"), "{text}");
    assert!(text.contains("ok svd/op+/cd config "), "{text}");
}

#[test]
fn exit_codes_follow_error_kinds() {
    // incompatible combination: configuration error
    let out = lscd(&["validate", "--set", "space=ppmi", "--set", "align=op"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ppmi"));

    // unknown key and usage errors are configuration errors too
    assert_eq!(lscd(&["validate", "--set", "colour=blue"]).status.code(), Some(1));
    assert_eq!(lscd(&["run", "--no-such-flag"]).status.code(), Some(1));

    // missing corpus: data error
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    let out = lscd(&[
        "run",
        "--set",
        "space=ppmi",
        "--set",
        "align=ci",
        "--set",
        &format!("corpus_a={}", missing.display()),
        "--set",
        &format!("corpus_b={}", missing.display()),
        "--set",
        &format!("targets={}", missing.display()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shuffle_writes_control_corpora() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let cfg = write_config(dir.path(), "control = shuffle\n");
    let out_dir = dir.path().join("control");
    let out = lscd(&["shuffle", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tokens = |p: &Path| std::fs::read_to_string(p).unwrap().split_whitespace().count();
    let before = tokens(&dir.path().join("corpus_a.txt")) + tokens(&dir.path().join("corpus_b.txt"));
    let after = tokens(&out_dir.join("corpus_a.txt")) + tokens(&out_dir.join("corpus_b.txt"));
    assert_eq!(before, after);
}
