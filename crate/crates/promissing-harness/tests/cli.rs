//! End-to-end CLI tests. Every invocation goes through `run_cli` in
//! process, so exit codes and artifacts are checked without spawning the
//! binary.

use std::fs;
use std::path::PathBuf;

use promissing_harness::cli::run_cli;
use promissing_harness::results::ResultTable;

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("promissing-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> i32 {
    run_cli(std::iter::once("promissing").chain(args.iter().copied()))
}

#[test]
fn corrupt_rerun_is_bit_identical() {
    let dir = temp_dir("corrupt-determinism");
    let data = dir.join("data.csv");
    assert_eq!(
        run(&[
            "simulate", "--kind", "xor", "--n", "300", "--seed", "9",
            "--out", data.to_str().unwrap(),
        ]),
        0
    );

    let out_a = dir.join("a.csv");
    let out_b = dir.join("b.csv");
    for out in [&out_a, &out_b] {
        assert_eq!(
            run(&[
                "corrupt", "--in", data.to_str().unwrap(),
                "--mechanism", "mnar", "--fraction", "0.5", "--seed", "17",
                "--out", out.to_str().unwrap(),
            ]),
            0
        );
    }
    let bytes_a = fs::read(&out_a).unwrap();
    let bytes_b = fs::read(&out_b).unwrap();
    assert_eq!(bytes_a, bytes_b);
    let text = String::from_utf8(bytes_a).unwrap();
    let empty_cells = text
        .lines()
        .skip(1)
        .flat_map(|line| line.split(','))
        .filter(|cell| cell.is_empty())
        .count();
    assert_eq!(empty_cells, 150);
}

#[test]
fn xor_run_writes_results_and_plot() {
    let dir = temp_dir("xor-run");
    assert_eq!(
        run(&[
            "--out-dir", dir.to_str().unwrap(),
            "xor", "--mechanism", "mnar", "--fraction", "0.5",
            "--method", "mean,promissing", "--reps", "1",
            "--epochs", "5", "--n", "150",
        ]),
        0
    );
    let results = dir.join("xor-results.csv");
    let table = ResultTable::load(&results).unwrap();
    assert!(!table.rows().is_empty());
    let plot = dir.join("xor-results-plot-mnar-0.5.csv");
    let text = fs::read_to_string(&plot).unwrap();
    assert!(text.starts_with("curve,x,y,y_std"));
}

#[test]
fn parse_and_dispatch_exit_codes() {
    let dir = temp_dir("exit-codes");

    // Unknown flag is a parse error.
    assert_eq!(run(&["xor", "--bogus-flag"]), 1);
    // Help and version print and succeed.
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["--version"]), 0);

    // A config entry that fails to parse is a usage error.
    let bad = dir.join("bad.cfg");
    fs::write(&bad, "epochs = not_a_number\n").unwrap();
    assert_eq!(run(&["--config", bad.to_str().unwrap(), "xor"]), 1);

    // A missing input file is a runtime failure.
    let gone = dir.join("missing.csv");
    assert_eq!(
        run(&[
            "corrupt", "--in", gone.to_str().unwrap(),
            "--mechanism", "mcar", "--fraction", "0.5",
        ]),
        2
    );
}

#[test]
fn impute_rejects_categorical_columns() {
    let dir = temp_dir("impute-categorical");
    let data = dir.join("cats.csv");
    fs::write(&data, "color,size,label\nred,1.0,0\nblue,,1\nred,3.0,0\nblue,2.0,1\n").unwrap();
    fs::write(
        dir.join("cats.schema"),
        "color=categorical\nsize=continuous\nlabel=binary\ntarget=label\n",
    )
    .unwrap();
    assert_eq!(
        run(&["impute", "--in", data.to_str().unwrap(), "--method", "mean"]),
        1
    );
    // Pruning methods are not imputers regardless of schema.
    let plain = dir.join("plain.csv");
    fs::write(&plain, "x,label\n1.0,0\n,1\n2.0,0\n3.0,1\n").unwrap();
    fs::write(dir.join("plain.schema"), "x=continuous\nlabel=binary\ntarget=label\n").unwrap();
    assert_eq!(
        run(&["impute", "--in", plain.to_str().unwrap(), "--method", "promissing"]),
        1
    );
}

#[test]
fn corrupt_on_partial_input_requires_feature_name() {
    let dir = temp_dir("corrupt-partial");
    let data = dir.join("partial.csv");
    fs::write(&data, "x1,x2,label\n1.0,,0\n2.0,1.0,1\n3.0,0.5,0\n4.0,0.25,1\n").unwrap();
    fs::write(
        dir.join("partial.schema"),
        "x1=continuous\nx2=continuous\nlabel=binary\ntarget=label\n",
    )
    .unwrap();
    // Without --feature the mutual-information ranking would need fully
    // observed columns, so this must be refused as a usage error.
    assert_eq!(
        run(&[
            "corrupt", "--in", data.to_str().unwrap(),
            "--mechanism", "mcar", "--fraction", "0.5",
        ]),
        1
    );
    let out = dir.join("out.csv");
    assert_eq!(
        run(&[
            "corrupt", "--in", data.to_str().unwrap(),
            "--mechanism", "mcar", "--fraction", "0.5",
            "--feature", "x1", "--out", out.to_str().unwrap(),
        ]),
        0
    );
    assert!(out.exists());
}

#[test]
fn train_predict_explain_export_pipeline() {
    let dir = temp_dir("pipeline");
    let data = dir.join("xor.csv");
    assert_eq!(
        run(&[
            "simulate", "--kind", "xor", "--n", "120", "--seed", "3",
            "--out", data.to_str().unwrap(),
        ]),
        0
    );

    let model = dir.join("model.net");
    assert_eq!(
        run(&[
            "train", "--in", data.to_str().unwrap(),
            "--first-layer", "m_promissing", "--preset", "xor",
            "--epochs", "5", "--out", model.to_str().unwrap(),
        ]),
        0
    );

    let preds = dir.join("preds.csv");
    assert_eq!(
        run(&[
            "predict", "--model", model.to_str().unwrap(),
            "--in", data.to_str().unwrap(), "--out", preds.to_str().unwrap(),
        ]),
        0
    );
    let pred_text = fs::read_to_string(&preds).unwrap();
    assert!(pred_text.starts_with("prediction\n"));
    assert_eq!(pred_text.lines().count(), 121);

    // One observed cell, one missing: the missing feature must be skipped.
    let row = dir.join("row.csv");
    fs::write(&row, "0.5,\n").unwrap();
    let attributions = dir.join("attr.csv");
    assert_eq!(
        run(&[
            "explain", "--model", model.to_str().unwrap(),
            "--row", row.to_str().unwrap(), "--unit", "feature",
            "--out", attributions.to_str().unwrap(),
        ]),
        0
    );
    let attr_text = fs::read_to_string(&attributions).unwrap();
    assert!(attr_text.starts_with("# base prediction:"));
    assert!(attr_text.contains("m1[1],0.0,true"));

    let neutral = dir.join("neutralizers.csv");
    assert_eq!(
        run(&[
            "export-neutralizers", "--model", model.to_str().unwrap(),
            "--out", neutral.to_str().unwrap(),
        ]),
        0
    );
    let n_text = fs::read_to_string(&neutral).unwrap();
    assert!(n_text.starts_with("neuron,feature,value"));
    // 4 hidden units x 2 features.
    assert_eq!(n_text.lines().count(), 9);
}
