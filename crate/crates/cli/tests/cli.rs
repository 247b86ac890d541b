use std::path::Path;
use std::process::{Command, Output};

fn lmnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmnet")).args(args).output().expect("failed to run lmnet")
}

fn ok(args: &[&str]) -> String {
    let out = lmnet(args);
    assert!(out.status.success(), "lmnet {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

/// Planted K-label directed data: train and test splits from the same weights.
fn synth_splits(dir: &Path, k: usize, n_train: usize, n_test: usize) -> (String, String) {
    let (train, test) = (p(dir, "train.svm"), p(dir, "test.svm"));
    let (k, ntr, nte) = (k.to_string(), n_train.to_string(), n_test.to_string());
    let common = ["synth", "--model", "sbn", "--k", &k, "--d", "4", "--weight-scale", "3", "--weight-seed", "9"];
    ok(&[&common[..], &["--n", &ntr, "--seed", "1", "--out", &train]].concat());
    ok(&[&common[..], &["--n", &nte, "--seed", "2", "--out", &test]].concat());
    (train, test)
}

fn train_model(dir: &Path, data: &str, k: usize, extra: &[&str]) -> String {
    let model = p(dir, "model.txt");
    let k = k.to_string();
    let log = p(dir, "train.log");
    let base = [
        "train",
        "--data",
        data,
        "--out",
        &model,
        "--num-labels",
        &k,
        "--num-features",
        "4",
        "--lambda",
        "0.01",
        "--log",
        &log,
    ];
    ok(&[&base[..], extra].concat());
    model
}

#[test]
fn bb_and_exhaustive_agree_on_objective() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synth_splits(dir.path(), 10, 300, 60);
    let model = train_model(dir.path(), &train, 10, &[]);
    let bb = ok(&["predict", "--model-file", &model, "--data", &test, "--infer", "bb"]);
    let ex = ok(&["predict", "--model-file", &model, "--data", &test, "--infer", "exhaustive"]);
    let loss = |line: &str| line.split_whitespace().find_map(|t| t.strip_prefix("loss=")).unwrap().to_string();
    let (bb, ex): (Vec<&str>, Vec<&str>) = (bb.lines().collect(), ex.lines().collect());
    assert_eq!(bb.len(), 60);
    for (a, b) in bb.iter().zip(&ex) {
        assert_eq!(loss(a), loss(b));
        assert!(a.ends_with("status=proven_optimal"));
        assert_eq!(a.split_whitespace().take(10).filter(|t| *t == "+1" || *t == "-1").count(), 10);
    }
    let log = std::fs::read_to_string(p(dir.path(), "train.log")).unwrap();
    assert!(log.contains("subproblem,epochs,max_pg,gap,converged"));
    assert!(log.contains("final_gap="));
}

#[test]
fn eval_of_identical_files_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let (_, test) = synth_splits(dir.path(), 3, 5, 20);
    let out = ok(&["eval", "--pred", &test, "--truth", &test, "--format", "kv"]);
    assert_eq!(out.trim(), "E=1.0,H=0.0,Fsam=1.0,Fmac=1.0,Fmic=1.0");
    let csv = ok(&["eval", "--pred", &test, "--truth", &test]);
    assert_eq!(csv.lines().next(), Some("E,H,Fsam,Fmac,Fmic"));
}

#[test]
fn eval_reads_prediction_files() {
    let dir = tempfile::tempdir().unwrap();
    let pred = p(dir.path(), "pred.txt");
    let truth = p(dir.path(), "truth.svm");
    std::fs::write(
        &pred,
        "+1 -1 +1 loss=0 states=3 status=proven_optimal\n+1 -1 -1 loss=1.5 states=9 status=budget_exceeded\n",
    )
    .unwrap();
    std::fs::write(&truth, "1,3\n3\n").unwrap();
    let out = ok(&["eval", "--pred", &pred, "--truth", &truth, "--format", "kv"]);
    assert!(out.starts_with("E=0.5,H=0.3333333333333333,Fsam=0.5,Fmac=0.77777"), "{out}");
}

#[test]
fn cutoff_sweep_meets_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synth_splits(dir.path(), 8, 400, 400);
    let model = train_model(dir.path(), &train, 8, &[]);
    let out = ok(&["bench", "--model-file", &model, "--data", &test, "--S-list", "1,2,4,8"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("S,fraction_optimal,mean_states,max_states,mean_loss,bound"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    for w in rows.windows(2) {
        assert!(w[1][1] >= w[0][1]);
    }
    for r in &rows {
        let sigma = (r[5] * (1.0 - r[5]) / 400.0).sqrt();
        assert!(r[1] >= r[5] - 3.0 * sigma, "{r:?}");
    }
    // deterministic output
    assert_eq!(out, ok(&["bench", "--model-file", &model, "--data", &test, "--S-list", "1,2,4,8"]));
}

#[test]
fn size_sweep_mode() {
    let out = ok(&["bench", "--k-list", "3,5", "--n-train", "100", "--n-test", "20", "--d", "3"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0],
        "K,trained_mean_states,random_mean_states,exhaustive_states,trained_mean_loss,random_mean_loss"
    );
    assert!(lines[1].starts_with("3,"));
    assert!(lines[2].starts_with("5,"));
    assert_eq!(lines[2].split(',').nth(3), Some("32"));
}

#[test]
fn training_is_deterministic_and_models_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synth_splits(dir.path(), 4, 200, 30);
    let model = train_model(dir.path(), &train, 4, &["--order", "fscore", "--graph", "chain", "--scale"]);
    let first = std::fs::read(&model).unwrap();
    train_model(dir.path(), &train, 4, &["--order", "fscore", "--graph", "chain", "--scale"]);
    assert_eq!(first, std::fs::read(&model).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("lmnet-model 1\nkind directed\n"));
    assert!(text.contains("scale minmax"));
    let preds = ok(&["predict", "--model-file", &model, "--data", &test]);
    assert_eq!(preds.lines().count(), 30);
}

#[test]
fn incompatible_requests_fail() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synth_splits(dir.path(), 3, 50, 10);
    let model = train_model(dir.path(), &train, 3, &["--model", "lmbm", "--eta0", "1"]);
    let out = lmnet(&["predict", "--model-file", &model, "--data", &test, "--infer", "bb"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("directed"));
    let icm = ok(&["predict", "--model-file", &model, "--data", &test, "--infer", "icm"]);
    assert_eq!(icm.lines().count(), 10);
    assert!(!lmnet(&["train", "--bogus"]).status.success());
    assert!(!lmnet(&["frobnicate"]).status.success());
    let bad = p(dir.path(), "bad.txt");
    std::fs::write(&bad, "lmnet-model 7\n").unwrap();
    let out = lmnet(&["predict", "--model-file", &bad, "--data", &test]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}
