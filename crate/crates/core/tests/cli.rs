use std::path::Path;

use walkclip::cli::main_with_args;
use walkclip::datamodel::{dataset_to_string, parse_dataset};
use walkclip::evaluation::{evaluate, SwdConfig};
use walkclip::pipeline::parse_predictions;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("walkclip").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec![
        "synth",
        "--out",
        p(&out),
        "--n",
        "120",
        "--dims",
        "4,4,4",
        "--seed",
        "3",
    ];
    args.extend_from_slice(extra);
    assert_eq!(run(&args), 0);
    out
}

#[test]
fn synth_is_deterministic_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.txt", &[]);
    let b = synth(dir.path(), "b.txt", &[]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(dir.path().join("a.txt.provenance").exists());
    assert_eq!(run(&["validate", p(&a)]), 0);
    assert_eq!(parse_dataset(&a).unwrap().len(), 120);
    let c = synth(dir.path(), "c.txt", &["--augment-copies", "2"]);
    assert_eq!(parse_dataset(&c).unwrap().len(), 360);
}

#[test]
fn validate_reports_invalid_files() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "dims=1,1,1\nr1|g1|44.9|-93.3|0.1|0.2|0.3|105\n").unwrap();
    assert_eq!(run(&["validate", p(&bad)]), 1);
    let leak = dir.path().join("leak.txt");
    std::fs::write(
        &leak,
        "dims=1,1,1\nr1|g1|44.9|-93.3|0.1|0.2|0.3|50\nr2|g1|44.8|-93.3|0.1|0.2|0.3|50\n",
    )
    .unwrap();
    assert_eq!(run(&["validate", p(&leak)]), 1);
    assert_eq!(run(&["validate", p(&dir.path().join("missing.txt"))]), 2);
}

#[test]
fn safe_leaves_pdfm_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let src = synth(dir.path(), "d.txt", &[]);
    let o1 = dir.path().join("s1.txt");
    let o2 = dir.path().join("s2.txt");
    assert_eq!(run(&["safe", p(&src), "--out", p(&o1)]), 0);
    assert_eq!(run(&["safe", p(&src), "--out", p(&o2)]), 0);
    assert_eq!(std::fs::read(&o1).unwrap(), std::fs::read(&o2).unwrap());
    let before = parse_dataset(&src).unwrap();
    let after = parse_dataset(&o1).unwrap();
    assert_ne!(dataset_to_string(&before), dataset_to_string(&after));
    for (a, b) in before.records().iter().zip(after.records()) {
        assert_eq!(a.pdfm_emb, b.pdfm_emb);
        assert_eq!(a.walk_score, b.walk_score);
    }
    assert_eq!(
        run(&["safe", p(&src), "--out", p(&o1), "--metric", "manhattan"]),
        2
    );
}

#[test]
fn split_and_pretrain_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let src = synth(dir.path(), "d.txt", &["--augment-copies", "1"]);
    let plan = dir.path().join("plan.txt");
    assert_eq!(
        run(&["split", p(&src), "--out", p(&plan), "--seed", "2"]),
        0
    );
    assert!(std::fs::read_to_string(&plan).unwrap().contains("|test"));
    let head = dir.path().join("head.txt");
    assert_eq!(
        run(&[
            "pretrain",
            "--synth-pairs",
            "64",
            "--synth-dim",
            "8",
            "--out",
            p(&head)
        ]),
        0
    );
    assert!(head.exists());
}

fn write_config(dir: &Path, dataset: &Path, out: &Path) -> std::path::PathBuf {
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "dataset = {:?}\noutput_dir = {:?}\nseed = 1\n\n[train]\nepochs = 4\nbatch_size = 16\nhidden_layers = [8]\n",
            p(dataset),
            p(out)
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn run_is_deterministic_and_eval_scores_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let src = synth(dir.path(), "d.txt", &[]);
    let cfg = write_config(dir.path(), &src, &dir.path().join("out"));
    let o1 = dir.path().join("out");
    let o2 = dir.path().join("first");
    assert_eq!(run(&["run", "--config", p(&cfg)]), 0);
    std::fs::rename(&o1, &o2).unwrap();
    assert_eq!(run(&["run", "--config", p(&cfg)]), 0);
    for f in [
        "report.txt",
        "metrics.txt",
        "split.txt",
        "predictions_vision+pdfm+safe.txt",
        "model_pdfm.ckpt",
    ] {
        assert_eq!(
            std::fs::read(o1.join(f)).unwrap(),
            std::fs::read(o2.join(f)).unwrap(),
            "{f}"
        );
    }
    let manifest = std::fs::read_to_string(o1.join("manifest.txt")).unwrap();
    assert!(manifest.contains("report.txt|"));
    let report = std::fs::read_to_string(o1.join("report.txt")).unwrap();
    assert_eq!(report.matches("grid_fits=40").count(), 6);

    let preds = o1.join("predictions_pdfm.txt");
    assert_eq!(run(&["eval", p(&preds)]), 0);
    let parsed = parse_predictions(&std::fs::read_to_string(&preds).unwrap()).unwrap();
    let geo: Vec<_> = parsed.iter().map(|(_, g)| *g).collect();
    let r = evaluate(
        &geo,
        SwdConfig {
            n_proj: 128,
            seed: 1,
        },
    )
    .unwrap();
    let metrics = std::fs::read_to_string(o1.join("metrics.txt")).unwrap();
    assert!(metrics.contains(&r.to_kv()));
}

#[test]
fn run_flag_overrides_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let src = synth(dir.path(), "d.txt", &[]);
    let cfg = write_config(dir.path(), &src, &dir.path().join("out"));
    let args = [
        "run",
        "--config",
        p(&cfg),
        "--no-grid",
        "--epochs",
        "2",
        "--safe-scope",
        "transductive",
    ];
    assert_eq!(run(&args), 0);
    let report = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("grid_fits=5"));
    assert!(report.contains("safe_scope=transductive"));
    assert_eq!(
        run(&["run", "--config", p(&cfg), "--safe-scope", "sideways"]),
        2
    );
    assert_eq!(
        run(&["run", "--dataset", p(&dir.path().join("none.txt"))]),
        2
    );
    assert_eq!(run(&["bogus"]), 2);
}
