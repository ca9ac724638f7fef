use hrbench_core::bench::{cmd_bench, parse_config_text, BenchConfig, DataSource, CONFIG_KEYS};
use hrbench_core::dataset::SynthProfile;
use hrbench_core::models::ModelKind;
use hrbench_core::Error;
use std::path::Path;
use std::process::Command;

fn small(out: &Path, models: &str) -> BenchConfig {
    let mut cfg = BenchConfig::default();
    let text = format!(
        "data=synthetic:ar1:seed=7:length=400\nmodels={models}\nepochs=2\nplots=false\ncheckpoints=false\nout={}\n",
        out.display()
    );
    cfg.apply(&parse_config_text(&text).unwrap()).unwrap();
    cfg
}

#[test]
fn single_model_run_reports_one_model() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = cmd_bench(&small(dir.path(), "sarima")).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    assert_eq!(outcome.report.models(), vec![ModelKind::Sarima]);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.lines().nth(1).unwrap().starts_with("SARIMA,synthetic_ar1_7,"));
    assert!(dir.path().join("report.txt").exists());
    assert!(dir.path().join("outliers_synthetic_ar1_7.csv").exists());
}

#[test]
fn neural_run_writes_logs_checkpoints_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), "tsmixer,naive");
    cfg.plots = true;
    cfg.checkpoints = true;
    let outcome = cmd_bench(&cfg).unwrap();
    assert!(outcome.failures.is_empty());
    let log = std::fs::read_to_string(dir.path().join("trainlog_tsmixer_synthetic_ar1_7.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 5 * 2);
    for k in 0..5 {
        assert!(dir.path().join(format!("checkpoints/tsmixer_synthetic_ar1_7_fold{k}.ckpt")).exists());
    }
    for name in ["series", "prophet", "compare"] {
        let svg = std::fs::read_to_string(dir.path().join(format!("plots/{name}_synthetic_ar1_7.svg"))).unwrap();
        roxmltree::Document::parse(&svg).unwrap();
    }
}

#[test]
fn unknown_model_lists_valid_names() {
    let err = ModelKind::parse_list("sarima,gpt").unwrap_err();
    match err {
        Error::Config(msg) => {
            for k in ModelKind::ALL {
                assert!(msg.contains(k.id()), "{msg}");
            }
            assert!(msg.contains("gpt"));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn unknown_setting_lists_valid_keys() {
    let err = BenchConfig::default().set("epoch", "3").unwrap_err();
    let msg = err.to_string();
    assert!(CONFIG_KEYS.iter().all(|k| msg.contains(k)), "{msg}");
}

#[test]
fn data_sources_parse() {
    assert_eq!(
        "synthetic:ar1:seed=7".parse::<DataSource>().unwrap(),
        DataSource::Synthetic { profile: SynthProfile::Ar1 { phi: 0.7 }, seed: 7, length: 1800 }
    );
    assert!(matches!("file:/tmp/x.csv".parse::<DataSource>().unwrap(), DataSource::File(_)));
    assert!("synthetic:nope:seed=1".parse::<DataSource>().is_err());
    assert!("ftp:x".parse::<DataSource>().is_err());
}

#[test]
fn paper_protocol_is_overridable_in_the_same_layer() {
    let mut cfg = BenchConfig::default();
    cfg.apply(&parse_config_text("epochs=7\npaper-protocol=true\n").unwrap()).unwrap();
    assert_eq!(cfg.train.epochs, 7);
    assert_eq!(cfg.train.window_stride, 1);
}

#[test]
fn empty_model_list_is_rejected() {
    let cfg = BenchConfig { models: Vec::new(), ..BenchConfig::default() };
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
}

fn hrbench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hrbench"))
}

#[test]
fn cli_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let from_file = dir.path().join("from-file");
    let from_flag = dir.path().join("from-flag");
    let conf = dir.path().join("bench.conf");
    std::fs::write(
        &conf,
        format!(
            "# desk run\ndata=synthetic:ar1:seed=7:length=400\nmodels=sarima\nplots=false\nout={}\n",
            from_file.display()
        ),
    )
    .unwrap();
    let out = hrbench()
        .args(["bench", "--config"])
        .arg(&conf)
        .args(["--models", "naive,mean", "--out"])
        .arg(&from_flag)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!from_file.exists());
    let csv = std::fs::read_to_string(from_flag.join("report.csv")).unwrap();
    assert!(csv.contains("Naive,") && csv.contains("Mean,") && !csv.contains("SARIMA"));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("Metric"));
}

#[test]
fn cli_reports_errors_with_exit_code_two() {
    let out = hrbench().args(["bench", "--models", "gpt", "--out", "/nonexistent/x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("valid names") && err.contains("itransformer"), "{err}");
}

#[test]
fn cli_plot_commands_write_svg() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.svg");
    let prophet = dir.path().join("prophet.svg");
    let compare = dir.path().join("compare.svg");
    let input = dir.path().join("preds.csv");
    std::fs::write(&input, "true,LSTM,TCN\n70,70.5,69\n71,71.2,70\n72,71.9,72.5\n").unwrap();
    let data = ["--data", "synthetic:trend_shift:seed=2:length=300"];
    for (cmd, out) in [("plot-series", &series), ("plot-prophet", &prophet)] {
        let st = hrbench().arg(cmd).args(data).arg("--out").arg(out).status().unwrap();
        assert!(st.success(), "{cmd}");
    }
    let st = hrbench().args(["plot-compare", "--input"]).arg(&input).arg("--out").arg(&compare).status().unwrap();
    assert!(st.success());
    for p in [&series, &prophet, &compare] {
        roxmltree::Document::parse(&std::fs::read_to_string(p).unwrap()).unwrap();
    }
    let doc_text = std::fs::read_to_string(&compare).unwrap();
    assert_eq!(doc_text.matches(r#"class="legend-entry""#).count(), 3);
}

#[test]
fn cli_outliers_to_stdout() {
    let out = hrbench().args(["outliers", "--data", "synthetic:ar1:seed=3:length=200"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().lines().next().unwrap().contains("index"));
}
