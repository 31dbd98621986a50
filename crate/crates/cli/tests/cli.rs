use std::path::Path;
use std::process::{Command, Output};

fn uavloc(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_uavloc")).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(
        &p,
        "[episode]\nn_spots = 12\nn_meas = 6\nrevolutions = 3\n\n[dataset]\nhorizon = 4\n\n\
         [learning]\nlstm_hidden = 4\nfilters1 = 2\nfilters2 = 3\nkernel = 4\nfc1 = 12\nfc2 = 8\n\n[learning.train]\nepochs = 2\n",
    )
    .unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    uavloc(&["simulate", "--config", &cfg, "--seed", "42", "--out", "a"], dir.path());
    uavloc(&["simulate", "--config", &cfg, "--seed", "42", "--out", "b"], dir.path());
    let a = std::fs::read(dir.path().join("a/summary.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/summary.json")).unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let revs = v["revolutions"].as_array().unwrap();
    assert_eq!(revs.len(), 3);
    for key in ["mean_error", "si", "rho", "center"] {
        assert!(revs[0].get(key).is_some(), "{key}");
    }
    assert!(v["config_hash"].as_str().unwrap().len() == 64);
    let trace = std::fs::read_to_string(dir.path().join("a/controller_trace.csv")).unwrap();
    assert!(trace.starts_with("revolution,x_c,y_c,rho,mean_error,integral_error\n"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    uavloc(&["simulate", "--config", &cfg, "--revolutions", "2", "--estimator", "multilat-baseline", "--out", "o"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(v["revolutions"].as_array().unwrap().len(), 2);
}

#[test]
fn dataset_training_and_cnn_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    uavloc(&["generate-dataset", "--config", &cfg, "--samples", "9", "--out", "m"], dir.path());
    assert!(dir.path().join("m/dataset.bin.meta").exists());
    uavloc(&["train-cnn", "--config", &cfg, "--out", "m"], dir.path());
    uavloc(&["train-lstm", "--config", &cfg, "--out", "m"], dir.path());
    for f in ["cnn.bin", "cnn.bin.meta", "lstm.bin", "lstm.bin.meta"] {
        assert!(dir.path().join("m").join(f).exists(), "{f}");
    }
    let curve = std::fs::read_to_string(dir.path().join("m/cnn_curve.csv")).unwrap();
    assert!(curve.starts_with("epoch,train_loss,val_loss\n"));
    assert_eq!(curve.lines().count(), 4);
    let with_models = dir.path().join("models.toml");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("[learning]\n", "[learning]\ncnn_model = \"m/cnn.bin\"\nlstm_model = \"m/lstm.bin\"\n");
    std::fs::write(&with_models, text).unwrap();
    let wm = with_models.to_string_lossy().into_owned();
    uavloc(&["simulate", "--config", &wm, "--estimator", "cnn", "--predictor", "lstm", "--out", "s"], dir.path());
    assert!(dir.path().join("s/summary.json").exists());
}

#[test]
fn missing_model_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_uavloc"))
        .args(["simulate", "--estimator", "cnn", "--out", "x"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("CNN"));
}

#[test]
fn range_and_protocol_demos() {
    let dir = tempfile::tempdir().unwrap();
    uavloc(&["range-demo", "--trials", "3", "--out", "r"], dir.path());
    let csv = std::fs::read_to_string(dir.path().join("r/range_demo.csv")).unwrap();
    assert!(csv.starts_with("true_delay,estimated_delay,K,snr_db\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 4 * 3);
    let out = uavloc(&["protocol-demo", "--out", "p"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("DL SIB "));
    assert!(lines[5].starts_with("UL IDENTITY_RESPONSE imsi="));
    assert_eq!(std::fs::read_to_string(dir.path().join("p/transcript.txt")).unwrap(), text);
}

#[test]
fn evaluate_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    uavloc(&["evaluate", "--config", &cfg, "--episodes", "1", "--estimator", "multilat-baseline", "--revolutions", "1", "--out", "e"], dir.path());
    let csv = std::fs::read_to_string(dir.path().join("e/eval.csv")).unwrap();
    assert!(csv.starts_with("scenario,value,episode,estimator,mean_error,si,final_rho\n"));
    assert_eq!(csv.lines().count(), 1 + 14);
}
