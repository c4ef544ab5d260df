mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{desk_args, read, synth_dataset, twenty_records};
use transnets::checkpoint::{load_checkpoint, save_checkpoint};
use transnets::commands::{
    evaluate_cmd, open, similar, train, train_experiment, EvaluateArgs, ModelArgs, SimilarArgs, CHECKPOINT_FILE,
    CONFIG_FILE, LOG_FILE, SUMMARY_FILE,
};
use transnets::experiment::ExperimentConfig;
use transnets::report::parse_log;
use transnets::ErrorCode;
use transnets_core::eval::target_representation;
use transnets_core::models::Architecture;
use transnets_core::nn::{Activation, Tensor};
use transnets_core::training::fit_length;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transnets"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr_line(o: &Output) -> String {
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert_eq!(err.lines().count(), 1, "expected one stderr line, got {err:?}");
    err.trim_end().to_string()
}

#[test]
fn failures_exit_nonzero_with_one_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.jsonl");
    fs::write(&input, twenty_records()).unwrap();
    let out = dir.path().join("d");
    let o = bin(&[
        "prepare",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(!o.status.success());
    assert!(stderr_line(&o).starts_with("error: unknown-format: "));

    let o = bin(&["prepare", "--out", "x"]);
    assert!(!o.status.success());
    assert!(stderr_line(&o).starts_with("error: usage: "));

    let o = bin(&["evaluate", "--checkpoint", "/nonexistent/ck", "--data", "/nonexistent"]);
    assert!(!o.status.success());
    assert!(stderr_line(&o).starts_with("error: io: "));
}

#[test]
fn prepare_and_synth_succeed_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("s.jsonl");
    let o = bin(&[
        "synth",
        "--out",
        raw.to_str().unwrap(),
        "--users",
        "20",
        "--items",
        "10",
        "--reviews",
        "100",
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(read(&raw).lines().count(), 100);
    let data = dir.path().join("data");
    let o = bin(&[
        "prepare",
        "--input",
        raw.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("#Users\t#Items\t#Ratings & Reviews\n20\t10\t100"));
}

#[test]
fn config_problems_are_listed_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = desk_args(&dir.path().join("missing"), &dir.path().join("out"), "transnet", 1);
    args.keep_prob = Some(0.0);
    args.batch_size = Some(0);
    let e = train(&args).unwrap_err();
    assert_eq!(e.code, ErrorCode::Config);
    for needle in ["keep_prob", "batch_size", "data directory"] {
        assert!(e.message.contains(needle), "{needle} missing from {}", e.message);
    }
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let e = train(&desk_args(dir.path(), &dir.path().join("o"), "svm", 1)).unwrap_err();
    assert_eq!(e.code, ErrorCode::Config);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("exp.json");
    fs::write(
        &file,
        r#"{"model": "deepconn", "lr": 0.01, "dims": {"layers": 5}, "data": "a", "out": "b"}"#,
    )
    .unwrap();
    let args = transnets::commands::TrainArgs {
        config: Some(file),
        desk: true,
        model: Some("deepconn-revab".into()),
        layers: Some("2".into()),
        ..Default::default()
    };
    let c = &args.configs().unwrap()[0];
    assert_eq!(c.train.model.as_str(), "deepconn-revab");
    assert_eq!((c.train.lr, c.train.dims.layers), (0.01, 2));
    assert_eq!(c.data, Path::new("a"));
    assert!(c.train.model.excludes_joint_review());
}

#[test]
fn train_writes_checkpoint_log_config_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), 30, 15, 240, 1);
    let out = dir.path().join("run");
    let mut args = desk_args(&data, &out, "transnet", 3);
    args.layers = Some("2".into());
    train(&args).unwrap();
    let config = ExperimentConfig::load(&out.join(CONFIG_FILE)).unwrap();
    assert_eq!(config.train.dims.layers, 2);
    let log = parse_log(&read(&out.join(LOG_FILE))).unwrap();
    assert!(!log.is_empty());
    assert!(log.iter().all(|p| p.loss_t.is_some() && p.loss_trans.is_some()));
    let ck = load_checkpoint(&out.join(CHECKPOINT_FILE)).unwrap();
    match &ck.model.arch {
        Architecture::TransNet(t) => assert_eq!(t.source.transform.layers.len(), 2),
        other => panic!("unexpected architecture {other:?}"),
    }
    let summary = read(&out.join(SUMMARY_FILE));
    assert!(
        summary.contains(&format!("best_val_mse\t{}", ck.best_val_mse)),
        "{summary}"
    );
}

#[test]
fn layer_sweep_writes_one_log_per_depth() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), 30, 15, 240, 2);
    let out = dir.path().join("sweep");
    let mut args = desk_args(&data, &out, "transnet", 1);
    args.layers = Some("1..3".into());
    let text = train(&args).unwrap();
    assert_eq!(text.lines().count(), 4, "{text}");
    for l in 1..=3 {
        let c = ExperimentConfig::load(&out.join(format!("L{l}")).join(CONFIG_FILE)).unwrap();
        assert_eq!(c.train.dims.layers, l);
        assert!(out.join(format!("L{l}")).join(LOG_FILE).is_file());
    }
    assert_eq!(read(&out.join("sweep.tsv")), text);
}

#[test]
fn identical_configs_give_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), 30, 15, 240, 3);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train(&desk_args(&data, &a, "transnet-ext", 2)).unwrap();
    train(&desk_args(&data, &b, "transnet-ext", 2)).unwrap();
    assert_eq!(fs::read(a.join(LOG_FILE)).unwrap(), fs::read(b.join(LOG_FILE)).unwrap());
    assert_eq!(
        fs::read(a.join(CHECKPOINT_FILE)).unwrap(),
        fs::read(b.join(CHECKPOINT_FILE)).unwrap()
    );
}

#[test]
fn evaluate_refuses_a_mismatched_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), 30, 15, 240, 5);
    let out = dir.path().join("run");
    train(&desk_args(&data, &out, "deepconn", 1)).unwrap();
    let mut other = ExperimentConfig::load(&out.join(CONFIG_FILE)).unwrap();
    other.train.lr *= 2.0;
    let other_path = dir.path().join("other.json");
    fs::write(&other_path, other.to_json()).unwrap();
    let model = |config: &Path| ModelArgs {
        checkpoint: out.join(CHECKPOINT_FILE),
        data: None,
        config: Some(config.to_path_buf()),
    };
    let e = evaluate_cmd(&EvaluateArgs {
        model: model(&other_path),
        split: "test".into(),
        out: None,
    })
    .unwrap_err();
    assert_eq!(e.code, ErrorCode::DigestMismatch);
    let ok = evaluate_cmd(&EvaluateArgs {
        model: model(&out.join(CONFIG_FILE)),
        split: "test".into(),
        out: Some(dir.path().join("reports")),
    })
    .unwrap();
    assert_eq!(read(&dir.path().join("reports").join("eval_test.tsv")), ok);

    let o = bin(&[
        "evaluate",
        "--checkpoint",
        out.join(CHECKPOINT_FILE).to_str().unwrap(),
        "--config",
        other_path.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr_line(&o).starts_with("error: digest-mismatch: "));
}

#[test]
fn overfit_toy_model_fits_its_training_split() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), 20, 10, 120, 6);
    let out = dir.path().join("run");
    let mut args = desk_args(&data, &out, "deepconn", 60);
    args.keep_prob = Some(1.0);
    args.batch_size = Some(8);
    args.lr = Some(0.01);
    args.eval_every = Some(100_000);
    train(&args).unwrap();
    let text = evaluate_cmd(&EvaluateArgs {
        model: ModelArgs {
            checkpoint: out.join(CHECKPOINT_FILE),
            data: Some(data),
            config: None,
        },
        split: "train".into(),
        out: None,
    })
    .unwrap();
    let mse: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split('\t')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(mse < 0.05, "train MSE {mse}");
}

#[test]
fn similar_ranks_a_planted_encoding_first() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), 30, 15, 240, 7);
    let out = dir.path().join("run");
    let mut args = desk_args(&data, &out, "transnet", 1);
    args.layers = Some("1".into());
    let mut configs = args.configs().unwrap();
    configs[0].train.dims.transform_activation = Activation::Identity;
    train_experiment(&configs[0]).unwrap();
    let ck_path = out.join(CHECKPOINT_FILE);
    let model_args = ModelArgs {
        checkpoint: ck_path.clone(),
        data: Some(data),
        config: None,
    };

    // pick a query whose item has reviews by at least two other users
    let loaded = open(&model_args).unwrap();
    let split = &loaded.dataset.split;
    let (user, item, planted) = split
        .train
        .iter()
        .find_map(|q| {
            let others: Vec<usize> = (0..split.train.len())
                .filter(|&j| split.train[j].item_id == q.item_id && split.train[j].user_id != q.user_id)
                .collect();
            (others.len() >= 2).then(|| (q.user_id.clone(), q.item_id.clone(), others[1]))
        })
        .expect("an item with several reviewers");
    let planted_id = split.train_ids[planted];

    // zero transform weights make z_L equal the bias; set it to the
    // planted review's target encoding
    let mut ck = loaded.checkpoint;
    let tokens = &loaded.index.reviews()[planted].tokens;
    let x = target_representation(&ck.model, &ck.table, &fit_length(tokens, ck.config.dims.seq_len)).unwrap();
    let Architecture::TransNet(t) = ck.model.arch.clone() else {
        panic!("transnet")
    };
    let (g, b) = t.source.transform.layers[0];
    let gs = ck.model.store.value(g).shape().to_vec();
    ck.model.store.get_mut(g).value = Tensor::zeros(&gs);
    ck.model.store.get_mut(b).value = x;
    save_checkpoint(&ck_path, &ck).unwrap();

    let text = similar(&SimilarArgs {
        model: model_args,
        user,
        item,
        k: 5,
        out: None,
    })
    .unwrap();
    let first: Vec<&str> = text.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[1], planted_id.to_string());
    assert!(first[2].parse::<f64>().unwrap() < 1e-9, "{text}");
}

#[test]
fn embedding_file_vectors_reach_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), 30, 15, 240, 8);
    let vectors = dir.path().join("vec.txt");
    let row: Vec<String> = (0..16).map(|i| format!("{}", i as f64 / 64.0)).collect();
    fs::write(
        &vectors,
        format!("stars {}\nnot-in-vocab {}\n", row.join(" "), row.join(" ")),
    )
    .unwrap();
    let out = dir.path().join("run");
    let mut args = desk_args(&data, &out, "deepconn", 1);
    args.embeddings = Some(vectors.to_str().unwrap().into());
    train(&args).unwrap();
    let ck = load_checkpoint(&out.join(CHECKPOINT_FILE)).unwrap();
    let expected: Vec<f64> = (0..16).map(|i| i as f64 / 64.0).collect();
    assert_eq!(ck.table.row(ck.vocab.id("stars")), expected.as_slice());

    args.embed_dim = Some(8);
    let e = train(&args).unwrap_err();
    assert_eq!(e.code, ErrorCode::Config);
}

#[test]
fn gradcheck_reports_every_case_below_tolerance() {
    let text = transnets::commands::gradcheck(&transnets::commands::GradcheckArgs { configs: 2, seed: 9 }).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 14, "{text}");
    for r in rows {
        assert_eq!(r[5], "pass", "{r:?}");
        assert!(r[4].parse::<f64>().unwrap() < 1e-4);
    }
}
