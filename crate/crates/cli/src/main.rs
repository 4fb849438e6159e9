use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alcs::baselines::{BaselineConfig, Method};
use alcs::env::{builtin_task, builtin_task_names, GridPos};
use alcs::harness::{
    aggregate_csv_string, aggregate_files, explain_cmd, plot, read_aggregate_csv, run_experiment,
    ExperimentSpec, HarnessError, Series,
};
use alcs::trainer::TrainConfig;
use clap::{Args, Parser, Subcommand};

/// Train and inspect subtask-composing agents and their baselines.
#[derive(Parser, Debug)]
#[command(name = "alcs-lab", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run seed (the first seed of an experiment).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, or output file for aggregate and plot.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Shipped task name or path to a task file.
    #[arg(long, global = true)]
    task: Option<String>,
    /// alcs, flat_q, hrl, interrupting or her.
    #[arg(long, global = true)]
    method: Option<Method>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one run and write its curve and snapshot.
    Train {
        /// Experiment file supplying defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train every seed of an experiment file.
    RunExperiment {
        spec: PathBuf,
        #[arg(long)]
        n_runs: Option<usize>,
        #[arg(long)]
        trim: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Trimmed aggregate of per-run CSV files.
    Aggregate {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value_t = 2)]
        trim: usize,
    },
    /// SVG of aggregate CSV files, each given as PATH or LABEL=PATH.
    Plot {
        #[arg(required = true)]
        curves: Vec<String>,
    },
    /// Explain the high-level choice at a cell from a saved snapshot.
    Explain {
        /// Snapshot directory of one run.
        #[arg(long)]
        snapshot: PathBuf,
        /// Cell as x,y.
        #[arg(long)]
        state: GridPos,
        /// Achieved subtasks, comma-separated.
        #[arg(long, default_value = "")]
        seq: String,
    },
    /// Print the shipped tasks.
    ListTasks,
}

/// Command-line replacements for experiment-file settings.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    max_env_steps: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    step_cap: Option<usize>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    no_multi_experience: bool,
    #[arg(long)]
    no_sequence: bool,
    #[arg(long)]
    no_assumed_choice: bool,
    #[arg(long)]
    option_timeout: Option<usize>,
    #[arg(long)]
    relabel_count: Option<usize>,
}

impl Overrides {
    fn apply(&self, train: &mut TrainConfig, baseline: &mut BaselineConfig) {
        fn set<T: Copy>(slot: &mut T, value: Option<T>) {
            if let Some(v) = value {
                *slot = v;
            }
        }
        set(&mut train.episodes, self.episodes);
        if self.max_env_steps.is_some() {
            train.max_env_steps = self.max_env_steps;
        }
        set(&mut train.alpha, self.alpha);
        set(&mut train.beta, self.beta);
        set(&mut train.gamma, self.gamma);
        set(&mut train.epsilon, self.epsilon);
        if self.step_cap.is_some() {
            train.step_cap = self.step_cap;
        }
        set(&mut train.eval_every, self.eval_every);
        set(&mut train.eval_episodes, self.eval_episodes);
        train.no_multi_experience |= self.no_multi_experience;
        train.no_sequence |= self.no_sequence;
        train.no_assumed_choice |= self.no_assumed_choice;
        set(&mut baseline.option_timeout, self.option_timeout);
        set(&mut baseline.relabel_count, self.relabel_count);
    }
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Run(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_spec(path: &Path) -> Result<ExperimentSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(ExperimentSpec::from_toml_str(&text)?)
}

fn apply_common(spec: &mut ExperimentSpec, common: &Common) {
    if let Some(seed) = common.seed {
        spec.base_seed = seed;
    }
    if let Some(out) = &common.out {
        spec.out = out.clone();
    }
    if let Some(task) = &common.task {
        spec.task = task.clone();
    }
    if let Some(method) = common.method {
        spec.method = method;
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = cli.common;
    match cli.command {
        Command::Train { config, overrides } => {
            let mut spec = match config {
                Some(path) => read_spec(&path)?,
                None => ExperimentSpec::default(),
            };
            apply_common(&mut spec, &common);
            overrides.apply(&mut spec.train, &mut spec.baseline);
            spec.n_runs = 1;
            spec.trim = 0;
            let bundle = run_experiment(&spec)?;
            let log = &bundle.runs[0];
            let last = log.rows.last().map_or(0.0, |r| r.eval_return);
            println!(
                "{} on {} seed {}: final eval return {last}",
                spec.method, spec.task, spec.base_seed
            );
            println!("curve: {}", spec.run_csv(spec.base_seed).display());
            println!("snapshot: {}", spec.snapshot_dir(spec.base_seed).display());
        }
        Command::RunExperiment {
            spec: path,
            n_runs,
            trim,
            overrides,
        } => {
            let mut spec = read_spec(&path)?;
            apply_common(&mut spec, &common);
            overrides.apply(&mut spec.train, &mut spec.baseline);
            if let Some(n) = n_runs {
                spec.n_runs = n;
            }
            if let Some(t) = trim {
                spec.trim = t;
            }
            let bundle = run_experiment(&spec)?;
            let last = bundle.aggregate.last().map_or(0.0, |r| r.mean);
            println!(
                "{} runs of {} on {}: final trimmed mean {last}",
                bundle.runs.len(),
                spec.method,
                spec.task
            );
            println!("aggregate: {}", spec.aggregate_csv().display());
        }
        Command::Aggregate { runs, trim } => {
            let rows = aggregate_files(&runs, trim)?;
            let text = aggregate_csv_string(&rows);
            match &common.out {
                Some(path) => std::fs::write(path, text)
                    .map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
        }
        Command::Plot { curves } => {
            let out = common
                .out
                .ok_or_else(|| Failure::Usage("plot needs --out FILE.svg".into()))?;
            let series = curves
                .iter()
                .map(|arg| {
                    let (label, path) = match arg.split_once('=') {
                        Some((label, path)) => (label.to_string(), PathBuf::from(path)),
                        None => (default_label(Path::new(arg)), PathBuf::from(arg)),
                    };
                    Ok(Series {
                        label,
                        rows: read_aggregate_csv(&path)?,
                    })
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            plot(&series, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Explain {
            snapshot,
            state,
            seq,
        } => {
            let task = common
                .task
                .ok_or_else(|| Failure::Usage("explain needs --task".into()))?;
            print!("{}", explain_cmd(&snapshot, &task, state, &seq)?);
        }
        Command::ListTasks => {
            for name in builtin_task_names() {
                let spec = builtin_task(name).map_err(|e| Failure::Run(e.to_string()))?;
                println!(
                    "{name}\t{}\tstep_cap={}\t{}",
                    spec.domain(),
                    spec.step_cap(),
                    spec.vocabulary().names().join(",")
                );
            }
        }
    }
    Ok(())
}

/// The file stem, or the directory name for files named `aggregate.csv`.
fn default_label(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
    if stem == "aggregate" {
        if let Some(dir) = path
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|s| s.to_str())
        {
            return dir.to_string();
        }
    }
    stem.to_string()
}
