use std::fs;
use std::path::Path;

use mgcn::cli::run;
use mgcn::training::checkpoint::load_checkpoint;

fn mgcn(args: &[&str]) -> i32 {
    run(std::iter::once("mgcn").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn metrics_block(report: &str) -> String {
    report.lines().skip_while(|l| *l != "[metrics]").take_while(|l| *l != "[history]").collect::<Vec<_>>().join("\n")
}

#[test]
fn gen_synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        assert_eq!(
            mgcn(&[
                "gen-synth",
                "--nodes",
                "15",
                "--slots",
                "5",
                "--density",
                "0.3",
                "--seed",
                "7",
                "--out",
                path(out)
            ]),
            0
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn train_then_eval_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.txt");
    let ckpt = dir.path().join("m.ckpt");
    let report = dir.path().join("train.txt");
    let eval_report = dir.path().join("eval.txt");
    assert_eq!(
        mgcn(&["gen-synth", "--nodes", "16", "--slots", "7", "--density", "0.3", "--seed", "1", "--out", path(&data)]),
        0
    );
    let code = mgcn(&[
        "train",
        "--data",
        path(&data),
        "--transform",
        "ensemble",
        "--embedding-dim",
        "4",
        "--max-epochs",
        "60",
        "--checkpoint",
        path(&ckpt),
        "--report",
        path(&report),
    ]);
    assert_eq!(code, 0);
    let ck = load_checkpoint(&ckpt).unwrap();
    assert_eq!((ck.n_nodes, ck.n_slots), (16, 7));
    // seven slots: the haar branch works on a padded length of eight
    let haar = ck.params.branches.iter().find(|b| b.kind.name() == "haar").unwrap();
    assert_eq!(haar.layers[0].dims(), [4, 4, 8]);

    assert_eq!(
        mgcn(&[
            "eval",
            "--data",
            path(&data),
            "--checkpoint",
            path(&ckpt),
            "--kappa",
            "0.5",
            "--report",
            path(&eval_report)
        ]),
        0
    );
    let trained = fs::read_to_string(&report).unwrap();
    let evaluated = fs::read_to_string(&eval_report).unwrap();
    assert!(metrics_block(&trained).contains("test,"));
    assert_eq!(metrics_block(&trained), metrics_block(&evaluated));
}

#[test]
fn eval_rejects_mismatched_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.txt");
    let other = dir.path().join("o.txt");
    let ckpt = dir.path().join("m.ckpt");
    assert_eq!(mgcn(&["gen-synth", "--nodes", "12", "--slots", "4", "--density", "0.4", "--out", path(&data)]), 0);
    assert_eq!(mgcn(&["gen-synth", "--nodes", "13", "--slots", "4", "--density", "0.4", "--out", path(&other)]), 0);
    let report = dir.path().join("r.txt");
    assert_eq!(
        mgcn(&[
            "train",
            "--data",
            path(&data),
            "--transform",
            "dct",
            "--max-epochs",
            "5",
            "--checkpoint",
            path(&ckpt),
            "--report",
            path(&report)
        ]),
        0
    );
    assert_eq!(mgcn(&["eval", "--data", path(&other), "--checkpoint", path(&ckpt)]), 1);
}

#[test]
fn transform_matrix_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(mgcn(&["transform-matrix", "--kind", "dct", "--size", "4", "--out-dir", out]), 0);
    let dct = fs::read_to_string(dir.path().join("dct_4.csv")).unwrap();
    assert_eq!(dct.lines().count(), 4);
    assert!(dct.lines().next().unwrap().starts_with("0.5,0.5"));

    assert_eq!(mgcn(&["transform-matrix", "--kind", "dft", "--size", "2", "--out-dir", out]), 0);
    let real = fs::read_to_string(dir.path().join("dft_2_real.csv")).unwrap();
    let imag = fs::read_to_string(dir.path().join("dft_2_imag.csv")).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let parsed: Vec<f64> = real.split([',', '\n']).filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()).collect();
    for (got, want) in parsed.iter().zip([r, r, r, -r]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert!(imag.split([',', '\n']).filter(|s| !s.is_empty()).all(|s| s.parse::<f64>().unwrap().abs() < 1e-15));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.txt");
    assert_eq!(mgcn(&["gen-synth", "--nodes", "10", "--slots", "0", "--out", path(&out)]), 2);
    assert_eq!(mgcn(&["no-such-command"]), 2);
    assert_eq!(mgcn(&["transform-matrix", "--kind", "haar", "--size", "3", "--out-dir", path(dir.path())]), 1);
    assert_eq!(mgcn(&["train", "--data", path(&dir.path().join("missing.txt"))]), 1);
    assert_eq!(mgcn(&["grad-check", "--transform", "haar", "--slots", "3"]), 0);
}
