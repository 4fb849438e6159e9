use std::fs;
use std::path::Path;

use alcs::baselines::Method;
use alcs::harness::{
    aggregate, explain_cmd, load_snapshot, read_aggregate_csv, read_run_csv, render_svg,
    run_experiment, AggregateRow, ExperimentSpec, HarnessError, Series,
};
use alcs::trainer::TrainConfig;
use alcs::GridPos;

fn spec(out: &Path, method: Method, n_runs: usize, trim: usize) -> ExperimentSpec {
    ExperimentSpec {
        task: "Coffee".into(),
        method,
        n_runs,
        trim,
        base_seed: 5,
        out: out.to_path_buf(),
        train: TrainConfig {
            max_env_steps: Some(3000),
            episodes: u64::MAX,
            eval_every: 500,
            eval_episodes: 3,
            ..TrainConfig::default()
        },
        ..ExperimentSpec::default()
    }
}

/// Every file under `dir`, relative path and contents, sorted.
fn tree_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

#[test]
fn reruns_write_identical_artifacts() {
    for method in Method::ALL {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&spec(a.path(), method, 3, 1)).unwrap();
        run_experiment(&spec(b.path(), method, 3, 1)).unwrap();
        // The experiment file records its own output directory.
        let strip = |files: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
            files
                .into_iter()
                .filter(|(p, _)| p != "experiment.toml")
                .collect()
        };
        let (fa, fb) = (strip(tree_of(a.path())), strip(tree_of(b.path())));
        assert_eq!(fa.len(), fb.len(), "{method}");
        for ((pa, ca), (pb, cb)) in fa.iter().zip(&fb) {
            assert_eq!(pa, pb);
            assert!(ca == cb, "{method}: {pa} differs between reruns");
        }
    }
}

#[test]
fn layout_of_written_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), Method::Alcs, 3, 1);
    let bundle = run_experiment(&s).unwrap();
    for seed in 5..8 {
        assert_eq!(
            read_run_csv(&s.run_csv(seed)).unwrap(),
            bundle.runs[(seed - 5) as usize]
        );
        for file in ["meta.toml", "q_low.tsv", "q_high.tsv", "tree.txt"] {
            assert!(s.snapshot_dir(seed).join(file).is_file(), "{file}");
        }
    }
    assert_eq!(
        read_aggregate_csv(&s.aggregate_csv()).unwrap(),
        bundle.aggregate
    );
    let back = ExperimentSpec::from_toml_str(
        &fs::read_to_string(dir.path().join("experiment.toml")).unwrap(),
    )
    .unwrap();
    assert_eq!(back, s);
}

#[test]
fn single_untrimmed_run_aggregates_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_experiment(&spec(dir.path(), Method::FlatQ, 1, 0)).unwrap();
    let run = &bundle.runs[0];
    assert_eq!(bundle.aggregate.len(), run.rows.len());
    for (agg, row) in bundle.aggregate.iter().zip(&run.rows) {
        assert_eq!(agg.env_steps, row.env_steps);
        assert_eq!(
            (agg.mean, agg.lower, agg.upper),
            (row.eval_return, row.eval_return, row.eval_return)
        );
    }
    assert_eq!(aggregate(&bundle.runs, 0).unwrap(), bundle.aggregate);
}

#[test]
fn too_few_runs_for_trim_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&spec(dir.path(), Method::Alcs, 4, 2)).unwrap_err();
    assert!(err.is_usage(), "{err}");
}

#[test]
fn snapshots_load_and_explain() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(dir.path(), Method::Alcs, 1, 0);
    s.task = "CoffeeMail".into();
    s.train.max_env_steps = Some(20_000);
    run_experiment(&s).unwrap();
    let snap = s.snapshot_dir(5);
    let loaded = load_snapshot(&snap).unwrap();
    assert_eq!(loaded.meta.task, "CoffeeMail");
    assert_eq!(loaded.meta.env_steps, 20_000);
    assert!(!loaded.tree.is_empty());

    let text = explain_cmd(&snap, "CoffeeMail", GridPos { x: 3, y: 7 }, "").unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert_eq!(lines[0], "history: ∅");
    assert!(lines[1].starts_with("current: "));
    assert!(lines[2].starts_with("plan: "));
    assert_eq!(
        text,
        explain_cmd(&snap, "coffeemail", GridPos { x: 3, y: 7 }, "").unwrap()
    );

    for (task, cell, seq) in [
        ("Coffee", GridPos { x: 3, y: 7 }, ""),
        ("CoffeeMail", GridPos { x: 0, y: 0 }, ""),
        ("CoffeeMail", GridPos { x: 3, y: 7 }, "x"),
    ] {
        let err = explain_cmd(&snap, task, cell, seq).unwrap_err();
        assert!(err.is_usage(), "{err}");
    }
    let missing = explain_cmd(
        &dir.path().join("nowhere"),
        "CoffeeMail",
        GridPos { x: 3, y: 7 },
        "",
    );
    assert!(matches!(missing, Err(HarnessError::Usage(_))));
}

#[test]
fn baseline_snapshots_cannot_be_explained() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), Method::Her, 1, 0);
    run_experiment(&s).unwrap();
    assert!(s.snapshot_dir(5).join("q_low.tsv").is_file());
    let err = explain_cmd(&s.snapshot_dir(5), "Coffee", GridPos { x: 3, y: 7 }, "").unwrap_err();
    assert!(err.is_usage());
}

#[test]
fn plot_matches_golden_file() {
    let row = |env_steps, mean, lower, upper| AggregateRow {
        env_steps,
        mean,
        lower,
        upper,
    };
    let series = [
        Series {
            label: "alcs".into(),
            rows: vec![
                row(1000, 0.0, 0.0, 0.0),
                row(2000, 0.5, 0.2, 0.9),
                row(3000, 1.0, 1.0, 1.0),
            ],
        },
        Series {
            label: "flat <q>".into(),
            rows: vec![
                row(1000, 0.0, 0.0, 0.0),
                row(2000, 0.1, 0.0, 0.3),
                row(3000, 0.25, 0.0, 0.5),
            ],
        },
    ];
    let svg = render_svg(&series).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/plot.svg");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &svg).unwrap();
    }
    assert_eq!(svg, fs::read_to_string(golden).unwrap());
}
