use std::fs;
use std::path::Path;
use std::process::Command;

use divnet::cli::main_with_args;
use divnet::commands::{
    ABLATION_FILE, CONFIG_FILE, DIAGNOSTICS_FILE, MODEL_FILE, ORACLE_FILE, SWEEP_FILE, TEST_FILE,
    TRAIN_FILE, TRAIN_REPORT_FILE,
};
use divnet::error::{EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
use divnet::format::{load_dataset, load_model, save_model};
use divnet::report::{parse_csv, ABLATION_HEADER, ORACLE_HEADER, SWEEP_HEADER};
use divnet::ExperimentConfig;
use divnet_core::{Model, ModelConfig, Trained};
use tempfile::TempDir;

const SMALL: &str = r#"
[data]
generator = "multimodal"
n_train = 48
n_test = 24

[model]
encoder_widths = [8]
decoder_widths = [8]

[train]
n_controls = 3
epochs = 5
batch_size = 16
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("experiment.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> i32 {
    let mut all = vec!["divnet"];
    all.extend_from_slice(args);
    main_with_args(all)
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    parse_csv(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_data_writes_configured_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("d");
    assert_eq!(run(&["--config", &cfg, "--out", out.to_str().unwrap(), "gen-data"]), EXIT_OK);
    assert_eq!(load_dataset(&out.join(TRAIN_FILE)).unwrap().len(), 48);
    assert_eq!(load_dataset(&out.join(TEST_FILE)).unwrap().len(), 24);
}

#[test]
fn reruns_write_identical_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = tmp.path().join(name);
            let o = out.to_str().unwrap();
            assert_eq!(run(&["--config", &cfg, "--out", o, "gen-data"]), EXIT_OK);
            assert_eq!(run(&["--config", &cfg, "--out", o, "train", "--data", o]), EXIT_OK);
            let ev = out.join("eval");
            let model = out.join(MODEL_FILE);
            assert_eq!(
                run(&["--out", ev.to_str().unwrap(), "eval", "--model", model.to_str().unwrap(), "--data", o]),
                EXIT_OK
            );
            out
        })
        .collect();
    for f in [TRAIN_FILE, TEST_FILE, MODEL_FILE, TRAIN_REPORT_FILE, CONFIG_FILE] {
        assert_eq!(fs::read(runs[0].join(f)).unwrap(), fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
    for f in [ORACLE_FILE, DIAGNOSTICS_FILE] {
        assert_eq!(
            fs::read(runs[0].join("eval").join(f)).unwrap(),
            fs::read(runs[1].join("eval").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn eval_rows_match_slot_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let o = tmp.path().to_str().unwrap();
    assert_eq!(run(&["--config", &cfg, "--out", o, "train"]), EXIT_OK);
    assert_eq!(run(&["--config", &cfg, "--out", o, "gen-data"]), EXIT_OK);
    let model = tmp.path().join(MODEL_FILE);
    let ev = tmp.path().join("eval");
    assert_eq!(
        run(&["--out", ev.to_str().unwrap(), "eval", "--model", model.to_str().unwrap(), "--data", o]),
        EXIT_OK
    );
    let (h, rows) = csv_rows(&ev.join(ORACLE_FILE));
    assert_eq!(h.join(","), ORACLE_HEADER);
    assert_eq!(rows.len(), 3);
    let ks: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ks, ["1", "2", "3"]);
    assert_eq!(rows[0][5], "diversenet:without-replacement");
}

#[test]
fn exact_predictions_score_zero_at_full_draw() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
[data]
generator = "multimodal"
n_train = 20
n_test = 10
modes = ["const(0.5)", "const(-0.5)", "const(0.25)"]

[model]
encoder_widths = [4]
decoder_widths = []

[train]
n_controls = 3
"#;
    let cfg_path = write_config(tmp.path(), text);
    let o = tmp.path().join("data");
    assert_eq!(run(&["--config", &cfg_path, "--out", o.to_str().unwrap(), "gen-data"]), EXIT_OK);

    // zero every weight except the control rows of the output layer
    let cfg = ExperimentConfig::parse(text).unwrap();
    let mc: ModelConfig = cfg.model_config(1, 1).unwrap();
    let mut model = Model::init(ModelConfig {
        control_dim: 3,
        ..mc
    })
    .unwrap();
    for t in model.parameters_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let w = model.parameters_mut().nth(2).unwrap();
    assert_eq!(w.shape(), &[7, 1]);
    w.data_mut()[4..7].copy_from_slice(&[0.5, -0.5, 0.25]);
    let mdir = tmp.path().join("model");
    fs::create_dir_all(&mdir).unwrap();
    save_model(&Trained::Single(model), &mdir.join(MODEL_FILE)).unwrap();
    fs::write(mdir.join(CONFIG_FILE), cfg.to_toml()).unwrap();

    let ev = tmp.path().join("eval");
    let code = run(&[
        "--out",
        ev.to_str().unwrap(),
        "eval",
        "--model",
        mdir.join(MODEL_FILE).to_str().unwrap(),
        "--data",
        o.join(TRAIN_FILE).to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let (_, rows) = csv_rows(&ev.join(ORACLE_FILE));
    assert_eq!(rows.last().unwrap()[1].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn treenet_writes_ensemble_model() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("n_controls = 3", "n_controls = 3\nmethod = \"treenet\""));
    let o = tmp.path().to_str().unwrap();
    assert_eq!(run(&["--config", &cfg, "--out", o, "train"]), EXIT_OK);
    match load_model(&tmp.path().join(MODEL_FILE)).unwrap() {
        Trained::Treenet(t) => assert_eq!(t.n_members(), 3),
        other => panic!("expected a treenet, got {other:?}"),
    }
    let bytes = fs::read(tmp.path().join(MODEL_FILE)).unwrap();
    assert!(bytes.starts_with(b"DIVNET01"));
}

#[test]
fn sweep_and_ablation_row_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let s = tmp.path().join("sweep");
    assert_eq!(run(&["--config", &cfg, "--out", s.to_str().unwrap(), "sweep-beta", "--betas", "1"]), EXIT_OK);
    let (h, rows) = csv_rows(&s.join(SWEEP_FILE));
    assert_eq!(h.join(","), SWEEP_HEADER);
    assert_eq!(rows.len(), 1);

    let s = tmp.path().join("sweep3");
    assert_eq!(
        run(&["--config", &cfg, "--out", s.to_str().unwrap(), "--jobs", "2", "sweep-beta", "--betas", "0,1,2"]),
        EXIT_OK
    );
    assert_eq!(csv_rows(&s.join(SWEEP_FILE)).1.len(), 3);

    let a = tmp.path().join("ablate");
    assert_eq!(run(&["--config", &cfg, "--out", a.to_str().unwrap(), "ablate"]), EXIT_OK);
    let (h, rows) = csv_rows(&a.join(ABLATION_FILE));
    assert_eq!(h.join(","), ABLATION_HEADER);
    assert_eq!(rows.len(), 8);
    let flags: Vec<(String, String, String)> =
        rows.iter().map(|r| (r[0].clone(), r[1].clone(), r[2].clone())).collect();
    for m in ["diversenet", "treenet"] {
        for c in ["on", "off"] {
            for p in ["on", "off"] {
                assert!(flags.contains(&(m.into(), c.into(), p.into())), "{m} {c} {p}");
            }
        }
    }
    assert!(rows.iter().all(|r| (r[1] == "on") == (r[3] != "0")));
}

#[test]
fn unknown_key_and_missing_field_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    let bad = write_config(tmp.path(), "[train]\nbogus = 1\n");
    assert_eq!(run(&["--config", &bad, "--out", o, "gen-data"]), EXIT_USAGE);

    let err = ExperimentConfig::parse("[data]\nn_train = 10\n").unwrap_err();
    assert!(err.message.contains("generator"), "{}", err.message);
    let missing = write_config(tmp.path(), "[data]\nn_train = 10\n");
    assert_eq!(run(&["--config", &missing, "--out", o, "gen-data"]), EXIT_USAGE);

    assert_eq!(run(&["--out", o, "eval", "--model", "/nonexistent/model.bin", "--data", o]), EXIT_USAGE);
    assert_eq!(run(&["no-such-command"]), EXIT_USAGE);
}

#[test]
fn dimension_mismatch_in_eval_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let o = tmp.path().join("m");
    assert_eq!(run(&["--config", &cfg, "--out", o.to_str().unwrap(), "train"]), EXIT_OK);
    let occ = write_config(
        tmp.path(),
        "[data]\ngenerator = \"occluded\"\nn_train = 10\nn_test = 10\nk_neighbors = 2\n",
    );
    let d = tmp.path().join("occ");
    assert_eq!(run(&["--config", &occ, "--out", d.to_str().unwrap(), "gen-data"]), EXIT_OK);
    let code = run(&[
        "--out",
        tmp.path().join("e").to_str().unwrap(),
        "eval",
        "--model",
        o.join(MODEL_FILE).to_str().unwrap(),
        "--data",
        d.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn binary_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let bin = env!("CARGO_BIN_EXE_divnet");
    let diverge = write_config(
        tmp.path(),
        &SMALL.replace("batch_size = 16", "batch_size = 16\noptimizer = \"sgd\"\nlearning_rate = 1e300"),
    );
    let out = tmp.path().join("o");
    let st = Command::new(bin)
        .args(["--config", &diverge, "--out", out.to_str().unwrap(), "train"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(EXIT_NUMERICAL));
    assert!(st.stdout.is_empty());
    assert!(!st.stderr.is_empty());

    let good = write_config(tmp.path(), SMALL);
    let st = Command::new(bin)
        .args(["--config", &good, "--out", out.to_str().unwrap(), "grad-check"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(EXIT_OK));

    let st = Command::new(bin).args(["train", "--bogus"]).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_USAGE));
}
