use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_modopt");

fn modopt(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const SMALL_SYNTH: &str = r#"{"trading_days": 30, "dte_set": [30, 90]}"#;
const QUICK_TRAIN: &str = r#"{"max_epochs": 3, "batch_size": 64}"#;

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

/// Generates a small dataset under `dir/data` and returns a config reading it.
fn small_dataset(dir: &Path) -> String {
    let gen = write_config(dir, "gen.json", &format!(r#"{{"seed": 5, "data": {{"synthetic": {SMALL_SYNTH}}}}}"#));
    let o = modopt(&["generate", "--config", &gen, "--out-dir", "data"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    write_config(
        dir,
        "run.json",
        &format!(r#"{{"seed": 7, "data": {{"dir": "data"}}, "train": {QUICK_TRAIN}, "output_dir": "out"}}"#),
    )
}

#[test]
fn price_prints_six_decimals() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["--spot", "100", "--strike", "100", "--rate", "0.05", "--vol", "0.2", "--dte", "365"];
    let run = |model: &str, q: &str, extra: &[&str]| {
        let mut a = vec!["price", "--model", model, "--div-yield", q];
        a.extend_from_slice(&base);
        a.extend_from_slice(extra);
        modopt(&a, tmp.path())
    };
    let bs = run("bs", "0", &[]);
    assert_eq!(code(&bs), 0);
    assert_eq!(stdout(&bs).trim(), "10.450584");
    // no dividends: the quadratic approximation returns the European value
    assert_eq!(stdout(&run("baw", "0", &[])), stdout(&bs));
    let bop100 = stdout(&run("bop", "0.03", &["--steps", "100"]));
    let bop_default = stdout(&run("bop", "0.03", &[]));
    assert_eq!(bop100, bop_default);
    assert_ne!(bop100, stdout(&run("bop", "0.03", &["--steps", "101"])));
    let digits = bop100.trim().split('.').nth(1).unwrap();
    assert_eq!(digits.len(), 6);
}

#[test]
fn price_usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = modopt(
        &["price", "--model", "bop", "--spot", "100", "--rate", "0.05", "--div-yield", "0", "--vol", "0.2", "--dte", "30"],
        tmp.path(),
    );
    assert_eq!(code(&missing), 2);
    let negative = modopt(
        &[
            "price", "--model", "bs", "--spot", "100", "--strike", "-5", "--rate", "0.05", "--div-yield", "0", "--vol",
            "0.2", "--dte", "30",
        ],
        tmp.path(),
    );
    assert_eq!(code(&negative), 2);
    assert!(String::from_utf8_lossy(&negative.stderr).contains("strike"));
}

#[test]
fn generate_is_reproducible_and_counts_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "gen.json", &format!(r#"{{"data": {{"synthetic": {SMALL_SYNTH}}}}}"#));
    for out in ["a", "b"] {
        assert_eq!(code(&modopt(&["generate", "--config", &cfg, "--seed", "3", "--out-dir", out], tmp.path())), 0);
    }
    for f in ["chain.csv", "macro.csv", "dividends.csv", "rates.csv", "underlying.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    for (key, file) in [
        ("chain", "chain.csv"),
        ("macro", "macro.csv"),
        ("dividends", "dividends.csv"),
        ("rates", "rates.csv"),
        ("underlying", "underlying.csv"),
    ] {
        let lines = fs::read_to_string(tmp.path().join("a").join(file)).unwrap().lines().count();
        assert_eq!(manifest["rows"][key].as_u64().unwrap() as usize, lines - 1, "{key}");
    }
    assert_eq!(manifest["rows"]["chain"], 30 * 9 * 2);
}

#[test]
fn default_generate_writes_11250_quotes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&modopt(&["generate", "--seed", "42", "--out-dir", "d"], tmp.path())), 0);
    let lines = fs::read_to_string(tmp.path().join("d/chain.csv")).unwrap().lines().count();
    assert_eq!(lines - 1, 11250);
}

#[test]
fn missing_seed_data_or_unknown_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&modopt(&["generate", "--out-dir", "x"], tmp.path())), 2);
    let no_data = write_config(tmp.path(), "nodata.json", r#"{"seed": 1, "data": {"dir": "missing"}, "output_dir": "o"}"#);
    let o = modopt(&["train", "--config", &no_data, "--arch", "mnn", "--paper-best"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing"));
    let unknown = write_config(tmp.path(), "bad.json", r#"{"seed": 1, "epochs": 3}"#);
    assert_eq!(code(&modopt(&["generate", "--config", &unknown, "--out-dir", "o"], tmp.path())), 2);
    let no_choice = write_config(tmp.path(), "ok.json", r#"{"seed": 1, "output_dir": "o"}"#);
    assert_eq!(code(&modopt(&["train", "--config", &no_choice, "--arch", "fnn"], tmp.path())), 2);
}

#[test]
fn features_train_tune_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let run = small_dataset(dir);

    let o = modopt(&["features", "--config", &run], dir);
    assert_eq!(code(&o), 0);
    let header = fs::read_to_string(dir.join("out/features.csv")).unwrap();
    assert!(header.starts_with("underlying_last,strike,"));

    for arch in ["mnn", "fnn"] {
        let o = modopt(&["train", "--config", &run, "--arch", arch, "--paper-best"], dir);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let history = fs::read_to_string(dir.join(format!("out/{arch}_history.csv"))).unwrap();
        let mut lines = history.lines();
        assert_eq!(lines.next(), Some("epoch,train_mse,val_mse"));
        assert_eq!(lines.count(), 3);
    }
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/mnn_model.json")).unwrap()).unwrap();
    assert_eq!(model["spec"]["arch"], "mnn");
    assert_eq!(model["spec"]["branches"][0]["layers"][0]["units"], 128);

    let o = modopt(&["tune", "--config", &run, "--arch", "fnn", "--budget", "1", "--out-dir", "tune"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("fnn_best_spec.json"));
    let log = fs::read_to_string(dir.join("tune/fnn_trials.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let o = modopt(
        &["train", "--config", &run, "--arch", "fnn", "--spec", "tune/fnn_best_spec.json", "--out-dir", "tuned"],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let wrong = modopt(&["train", "--config", &run, "--arch", "mnn", "--spec", "tune/fnn_best_spec.json"], dir);
    assert_eq!(code(&wrong), 2);
    let grid = modopt(
        &["tune", "--config", &run, "--arch", "fnn", "--budget", "5000", "--strategy", "grid", "--out-dir", "g"],
        dir,
    );
    assert_eq!(code(&grid), 1);

    let o = modopt(
        &["evaluate", "--config", &run, "--mnn-model", "out/mnn_model.json", "--fnn-model", "out/fnn_model.json"],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/eval_report.json")).unwrap()).unwrap();
    let models = report["models"].as_object().unwrap();
    assert_eq!(models.len(), 4);
    let mut last = 0;
    for (name, key) in [("MNN", "mnn"), ("B-AW", "baw"), ("BOP", "bop"), ("FNN", "fnn")] {
        let line = table.lines().find(|l| l.split_whitespace().next() == Some(name)).unwrap();
        let pos = table.find(line).unwrap();
        assert!(pos > last);
        last = pos;
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols[1], format!("{:.4}", report["models"][key]["rmse"].as_f64().unwrap()));
        assert_eq!(cols[2], format!("{:.4}", report["models"][key]["nrmse"].as_f64().unwrap()));
    }
    let missing_model = modopt(
        &["evaluate", "--config", &run, "--mnn-model", "nope.json", "--fnn-model", "out/fnn_model.json"],
        dir,
    );
    assert_eq!(code(&missing_model), 2);
}

#[test]
fn train_and_tune_reruns_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let run = small_dataset(dir);
    for out in ["r1", "r2"] {
        assert_eq!(code(&modopt(&["train", "--config", &run, "--arch", "fnn", "--paper-best", "--out-dir", out], dir)), 0);
        assert_eq!(
            code(&modopt(&["tune", "--config", &run, "--arch", "fnn", "--budget", "2", "--out-dir", out], dir)),
            0
        );
    }
    for f in ["fnn_model.json", "fnn_history.csv", "fnn_best_spec.json"] {
        assert_eq!(fs::read(dir.join("r1").join(f)).unwrap(), fs::read(dir.join("r2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn noise_free_evaluation_has_zero_lattice_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let run = write_config(
        dir,
        "nf.json",
        &format!(
            r#"{{"seed": 2, "data": {{"synthetic": {{"trading_days": 30, "dte_set": [30, 90], "premium_vix": 0, "premium_pcr": 0, "noise_scale": 0}}}}, "train": {QUICK_TRAIN}, "output_dir": "out"}}"#
        ),
    );
    for arch in ["mnn", "fnn"] {
        assert_eq!(code(&modopt(&["train", "--config", &run, "--arch", arch, "--paper-best"], dir)), 0);
    }
    let o = modopt(
        &["evaluate", "--config", &run, "--mnn-model", "out/mnn_model.json", "--fnn-model", "out/fnn_model.json"],
        dir,
    );
    assert_eq!(code(&o), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/eval_report.json")).unwrap()).unwrap();
    assert_eq!(report["models"]["bop"]["rmse"].as_f64().unwrap(), 0.0);
    assert_eq!(report["dataset"], "synthetic");
}
