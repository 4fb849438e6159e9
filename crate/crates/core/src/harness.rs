//! Multi-seed experiments and their artifacts: per-run learning curves,
//! table and tree snapshots, trimmed aggregates, SVG plots, explanations
//! from saved snapshots and a sign test for comparing methods.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Agent;
use crate::baselines::{train_method, BaselineConfig, Method, Trained};
use crate::env::{build_env, builtin_task, Action, GridPos, LayoutError, TaskSpec};
use crate::highlevel::{HighLevelMode, HighTable};
use crate::interpret::{explain, RecordTree};
use crate::lowlevel::LowTable;
use crate::rng::{stream, stream_rng};
use crate::subtask::{Subtask, Vocabulary};
use crate::trainer::{ConfigError, LogRow, RunLog, TrainConfig, TrainError};

/// Environment variable capping the worker pool.
pub const THREADS_VAR: &str = "ALCS_LAB_THREADS";

pub const RUN_HEADER: &str = "env_steps,eval_return,episode";
pub const AGGREGATE_HEADER: &str = "env_steps,mean,lower,upper";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("run with seed {seed} failed: {source}")]
    Run { seed: u64, source: TrainError },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl HarnessError {
    /// Whether the error stems from bad input rather than a failed run.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarnessError::Usage(_)
                | HarnessError::Aggregate(_)
                | HarnessError::Config(_)
                | HarnessError::Layout(_)
                | HarnessError::Format { .. }
        ) || matches!(self, HarnessError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// A shipped task by name, or a task file when `task` names one.
pub fn load_task(task: &str) -> Result<TaskSpec, HarnessError> {
    let path = Path::new(task);
    if path.extension().is_some_and(|e| e == "toml") {
        let text = read_file(path)?;
        return TaskSpec::from_toml_str(&text).map_err(HarnessError::from);
    }
    Ok(builtin_task(task)?)
}

/// Worker count from [`THREADS_VAR`], or `None` for the rayon default.
pub fn worker_threads() -> Result<Option<usize>, HarnessError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(HarnessError::Usage(format!(
                "{THREADS_VAR} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// A multi-seed experiment, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Shipped task name or path to a task file.
    pub task: String,
    pub method: Method,
    pub n_runs: usize,
    /// Runs dropped from each end at every evaluation point.
    pub trim: usize,
    /// Run `i` uses seed `base_seed + i`.
    pub base_seed: u64,
    pub out: PathBuf,
    pub train: TrainConfig,
    pub baseline: BaselineConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            task: "Coffee".into(),
            method: Method::Alcs,
            n_runs: 20,
            trim: 2,
            base_seed: 0,
            out: PathBuf::from("out"),
            train: TrainConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Usage(format!("experiment spec: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment specs always serialize")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_runs <= 2 * self.trim {
            return Err(AggregateError::TooFewRuns {
                runs: self.n_runs,
                trim: self.trim,
            }
            .into());
        }
        self.train.validate()?;
        self.baseline.validate()?;
        Ok(())
    }

    pub fn run_csv(&self, seed: u64) -> PathBuf {
        self.out.join("runs").join(format!("seed-{seed}.csv"))
    }

    pub fn snapshot_dir(&self, seed: u64) -> PathBuf {
        self.out.join("snapshots").join(format!("seed-{seed}"))
    }

    pub fn aggregate_csv(&self) -> PathBuf {
        self.out.join("aggregate.csv")
    }
}

/// Learning curves of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveBundle {
    pub label: String,
    pub runs: Vec<RunLog>,
    pub aggregate: Vec<AggregateRow>,
}

/// Runs every seed of `spec` on a worker pool and writes all artifacts
/// under `spec.out`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<CurveBundle, HarnessError> {
    spec.validate()?;
    let task = load_task(&spec.task)?;
    let env = build_env(task, 0)?;
    write_file(&spec.out.join("experiment.toml"), &spec.to_toml_string())?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_threads()? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| HarnessError::Usage(format!("worker pool: {e}")))?;
    let seeds: Vec<u64> = (0..spec.n_runs as u64)
        .map(|i| spec.base_seed + i)
        .collect();
    let results: Vec<Result<RunLog, HarnessError>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let config = TrainConfig {
                    seed,
                    ..spec.train.clone()
                };
                let trained = train_method(&env, spec.method, &config, &spec.baseline)
                    .map_err(|source| HarnessError::Run { seed, source })?;
                write_file(&spec.run_csv(seed), &run_csv_string(trained.log()))?;
                let meta = SnapshotMeta::new(spec, &env, &config, &trained);
                write_snapshot(&spec.snapshot_dir(seed), &meta, &trained, env.vocabulary())?;
                Ok(trained.log().clone())
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let aggregate = aggregate(&runs, spec.trim)?;
    write_file(&spec.aggregate_csv(), &aggregate_csv_string(&aggregate))?;
    Ok(CurveBundle {
        label: spec.method.name().to_string(),
        runs,
        aggregate,
    })
}

pub fn run_csv_string(log: &RunLog) -> String {
    let mut out = format!("{RUN_HEADER}\n");
    for r in &log.rows {
        let _ = writeln!(out, "{},{},{}", r.env_steps, r.eval_return, r.episode);
    }
    out
}

pub fn read_run_csv(path: &Path) -> Result<RunLog, HarnessError> {
    let rows = read_records(path, RUN_HEADER)?;
    let rows = rows
        .into_iter()
        .map(|(line, fields)| {
            let bad = |what: &str| format_err(path, format!("line {line}: bad {what}"));
            Ok(LogRow {
                env_steps: fields[0].parse().map_err(|_| bad("env_steps"))?,
                eval_return: fields[1].parse().map_err(|_| bad("eval_return"))?,
                episode: fields[2].parse().map_err(|_| bad("episode"))?,
            })
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(RunLog { rows })
}

/// Records of a CSV file with the given header, with their line numbers.
fn read_records(path: &Path, header: &str) -> Result<Vec<(u64, Vec<String>)>, HarnessError> {
    let text = read_file(path)?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| format_err(path, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(format_err(
            path,
            format!("expected header {header:?}, found {found:?}"),
        ));
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| format_err(path, e.to_string()))?;
            let line = r.position().map_or(0, |p| p.line());
            Ok((line, r.iter().map(str::to_string).collect()))
        })
        .collect()
}

/// One aggregated evaluation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateRow {
    pub env_steps: u64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("nothing to aggregate")]
    Empty,
    #[error("{runs} runs cannot lose {trim} from each end")]
    TooFewRuns { runs: usize, trim: usize },
    #[error("run {run} is not on the evaluation grid of run 0 (point {index})")]
    GridMismatch { run: usize, index: usize },
}

/// At each evaluation point, sorts the run values, drops `trim` from each
/// end and reports the mean, minimum and maximum of the rest.
pub fn aggregate(runs: &[RunLog], trim: usize) -> Result<Vec<AggregateRow>, AggregateError> {
    let first = runs.first().ok_or(AggregateError::Empty)?;
    if runs.len() <= 2 * trim {
        return Err(AggregateError::TooFewRuns {
            runs: runs.len(),
            trim,
        });
    }
    for (run, log) in runs.iter().enumerate() {
        let index = log
            .rows
            .iter()
            .zip(&first.rows)
            .position(|(a, b)| a.env_steps != b.env_steps)
            .or((log.rows.len() != first.rows.len()).then(|| log.rows.len().min(first.rows.len())));
        if let Some(index) = index {
            return Err(AggregateError::GridMismatch { run, index });
        }
    }
    let mut values = Vec::with_capacity(runs.len());
    Ok(first
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            values.clear();
            values.extend(runs.iter().map(|r| r.rows[i].eval_return));
            values.sort_by(f64::total_cmp);
            let kept = &values[trim..values.len() - trim];
            AggregateRow {
                env_steps: row.env_steps,
                mean: kept.iter().sum::<f64>() / kept.len() as f64,
                lower: kept[0],
                upper: kept[kept.len() - 1],
            }
        })
        .collect())
}

pub fn aggregate_csv_string(rows: &[AggregateRow]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.env_steps, r.mean, r.lower, r.upper);
    }
    out
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>, HarnessError> {
    read_records(path, AGGREGATE_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let num = |i: usize| {
                f[i].parse::<f64>()
                    .map_err(|_| format_err(path, format!("line {line}: bad number {:?}", f[i])))
            };
            Ok(AggregateRow {
                env_steps: f[0]
                    .parse()
                    .map_err(|_| format_err(path, format!("line {line}: bad env_steps")))?,
                mean: num(1)?,
                lower: num(2)?,
                upper: num(3)?,
            })
        })
        .collect()
}

/// Recomputes an aggregate from per-run CSV files.
pub fn aggregate_files(paths: &[PathBuf], trim: usize) -> Result<Vec<AggregateRow>, HarnessError> {
    let runs = paths
        .iter()
        .map(|p| read_run_csv(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(&runs, trim)?)
}

/// One labeled aggregate curve of a plot.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub rows: Vec<AggregateRow>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Eval return against environment steps: the trimmed mean as a line over a
/// shaded band between the bounds, one color per series.
pub fn render_svg(series: &[Series]) -> Result<String, HarnessError> {
    if series.is_empty() || series.iter().all(|s| s.rows.is_empty()) {
        return Err(HarnessError::Usage("nothing to plot".into()));
    }
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 150.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 50.0;
    let rows = || series.iter().flat_map(|s| &s.rows);
    let x_max = rows().map(|r| r.env_steps).max().unwrap_or(1).max(1) as f64;
    let y_min = rows().map(|r| r.lower).fold(0.0, f64::min);
    let y_max = rows().map(|r| r.upper).fold(1.0, f64::max);
    let px = |steps: u64| LEFT + steps as f64 / x_max * (W - LEFT - RIGHT);
    let py = |v: f64| H - BOTTOM - (v - y_min) / (y_max - y_min) * (H - TOP - BOTTOM);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.2},{y1:.2}V{y0:.2}H{x1:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let steps = (x_max * i as f64 / 4.0).round() as u64;
        let x = px(steps);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{steps}</text>"#,
            y0 + 18.0
        );
        let v = y_min + (y_max - y_min) * i as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y + 4.0,
            (v * 100.0).round() / 100.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">environment steps</text>"#,
        (x0 + x1) / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">eval return</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !s.rows.is_empty() {
            let mut band = String::new();
            for r in &s.rows {
                let _ = write!(band, "{:.2},{:.2} ", px(r.env_steps), py(r.upper));
            }
            for r in s.rows.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", px(r.env_steps), py(r.lower));
            }
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.trim_end()
            );
            let line: Vec<String> = s
                .rows
                .iter()
                .map(|r| format!("{:.2},{:.2}", px(r.env_steps), py(r.mean)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                line.join(" ")
            );
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = W - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape_xml(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn plot(series: &[Series], path: &Path) -> Result<(), HarnessError> {
    write_file(path, &render_svg(series)?)
}

/// What a snapshot directory was produced by.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    pub task: String,
    pub method: Method,
    pub seed: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub step_cap: usize,
    pub vocabulary: Vec<String>,
    pub no_sequence: bool,
    pub no_assumed_choice: bool,
}

impl SnapshotMeta {
    fn new(
        spec: &ExperimentSpec,
        env: &crate::env::LabeledGridEnv,
        config: &TrainConfig,
        trained: &Trained,
    ) -> Self {
        let (episodes, mode) = match trained {
            Trained::Alcs(o) => (o.episodes, o.agent.mode()),
            Trained::FlatQ(o) => (o.episodes, config.high_level_mode()),
            Trained::Hrl(o) => (o.episodes, config.high_level_mode()),
            Trained::Her(o) => (o.episodes, config.high_level_mode()),
        };
        SnapshotMeta {
            task: env.spec().name().to_string(),
            method: spec.method,
            seed: config.seed,
            env_steps: trained.env_steps(),
            episodes,
            step_cap: config.step_cap.unwrap_or(env.step_cap()),
            vocabulary: env.vocabulary().names().to_vec(),
            no_sequence: !mode.use_sequence,
            no_assumed_choice: !mode.assumed_choice,
        }
    }

    pub fn mode(&self) -> HighLevelMode {
        HighLevelMode {
            use_sequence: !self.no_sequence,
            assumed_choice: !self.no_assumed_choice,
        }
    }
}

/// Writes `meta.toml` and the learned tables of `trained` into `dir`.
pub fn write_snapshot(
    dir: &Path,
    meta: &SnapshotMeta,
    trained: &Trained,
    vocabulary: &Vocabulary,
) -> Result<(), HarnessError> {
    let meta_text = toml::to_string(meta).expect("snapshot metadata always serializes");
    write_file(&dir.join("meta.toml"), &meta_text)?;
    match trained {
        Trained::Alcs(o) => {
            write_file(
                &dir.join("q_low.tsv"),
                &o.agent.q_low.to_snapshot::<Action>(),
            )?;
            write_file(
                &dir.join("q_high.tsv"),
                &o.agent.q_high.to_snapshot::<Subtask>(),
            )?;
            write_file(&dir.join("tree.txt"), &o.tree.to_text(vocabulary))?;
        }
        Trained::FlatQ(o) => write_file(&dir.join("q_flat.tsv"), &o.q.to_snapshot::<Action>())?,
        Trained::Hrl(o) => {
            write_file(
                &dir.join("q_options.tsv"),
                &o.q_options.to_snapshot::<Subtask>(),
            )?;
            write_file(&dir.join("q_low.tsv"), &o.q_low.to_snapshot::<Action>())?;
        }
        Trained::Her(o) => write_file(&dir.join("q_low.tsv"), &o.q_low.to_snapshot::<Action>())?,
    }
    Ok(())
}

/// An ALCS policy and record tree read back from a snapshot directory.
pub struct LoadedSnapshot {
    pub meta: SnapshotMeta,
    pub agent: Agent,
    pub tree: RecordTree,
}

pub fn load_snapshot(dir: &Path) -> Result<LoadedSnapshot, HarnessError> {
    let meta_path = dir.join("meta.toml");
    if !meta_path.is_file() {
        return Err(HarnessError::Usage(format!(
            "no snapshot at {} (missing meta.toml)",
            dir.display()
        )));
    }
    let meta: SnapshotMeta = toml::from_str(&read_file(&meta_path)?)
        .map_err(|e| format_err(&meta_path, e.to_string()))?;
    if meta.method != Method::Alcs && meta.method != Method::Interrupting {
        return Err(HarnessError::Usage(format!(
            "snapshot in {} was trained with {}, which has no record tree",
            dir.display(),
            meta.method
        )));
    }
    let vocabulary =
        Vocabulary::new(meta.vocabulary.iter().cloned()).map_err(|e| format_err(&meta_path, e))?;
    let table = |name: &str| -> Result<(PathBuf, String), HarnessError> {
        let path = dir.join(name);
        let text = read_file(&path)?;
        Ok((path, text))
    };
    let (path, text) = table("q_low.tsv")?;
    let q_low = LowTable::from_snapshot::<Action>(Action::ALL.len(), &text)
        .map_err(|e| format_err(&path, e.to_string()))?;
    let (path, text) = table("q_high.tsv")?;
    let q_high = HighTable::from_snapshot::<Subtask>(vocabulary.len(), &text)
        .map_err(|e| format_err(&path, e.to_string()))?;
    let (path, text) = table("tree.txt")?;
    let tree =
        RecordTree::from_text(&text, &vocabulary).map_err(|e| format_err(&path, e.to_string()))?;
    let agent = Agent::from_tables(vocabulary, meta.mode(), q_low, q_high);
    Ok(LoadedSnapshot { meta, agent, tree })
}

/// The three-part explanation for `state` with `seq` achieved, from a saved
/// snapshot of `task`. Ties are broken by a fixed seed.
pub fn explain_cmd(
    snapshot: &Path,
    task: &str,
    state: GridPos,
    seq: &str,
) -> Result<String, HarnessError> {
    let loaded = load_snapshot(snapshot)?;
    if !loaded.meta.task.eq_ignore_ascii_case(task) {
        return Err(HarnessError::Usage(format!(
            "snapshot is for task {}, not {task}",
            loaded.meta.task
        )));
    }
    let layout = load_task(task)?.layout().clone();
    if !layout.in_bounds(state) || layout.is_wall(state) {
        return Err(HarnessError::Usage(format!(
            "{state} is not an open cell of {task}"
        )));
    }
    let vocabulary = loaded.agent.vocabulary();
    let seq = vocabulary.parse_seq(seq).map_err(HarnessError::Usage)?;
    let mut rng = stream_rng(0, stream::EXPLAIN);
    let explanation = explain(
        &loaded.tree,
        &loaded.agent,
        state,
        &seq,
        &mut rng,
        loaded.meta.step_cap,
    );
    Ok(explanation.render(vocabulary))
}

/// Outcome of a one-sided sign test across paired seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignTest {
    /// Seeds where the first method reached the threshold strictly earlier.
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// `P(X ≥ wins)` for `X ~ Binomial(wins + losses, 1/2)`.
    pub p_value: f64,
}

impl SignTest {
    pub fn significant(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Compares first-reach step counts seed by seed; `None` means the
/// threshold was never reached and loses to any count.
pub fn sign_test(first: &[Option<u64>], second: &[Option<u64>]) -> SignTest {
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (a, b) in first.iter().zip(second) {
        let a = a.unwrap_or(u64::MAX);
        let b = b.unwrap_or(u64::MAX);
        match a.cmp(&b) {
            std::cmp::Ordering::Less => wins += 1,
            std::cmp::Ordering::Greater => losses += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let n = wins + losses;
    let p_value = (wins..=n).map(|k| binomial(n, k)).sum::<f64>() / 2f64.powi(n as i32);
    SignTest {
        wins,
        losses,
        ties,
        p_value,
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
