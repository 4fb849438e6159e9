//! The full ALCS training loop with its ablation switches, plus greedy
//! evaluation and the step-budget bookkeeping shared with the baselines.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Agent;
use crate::env::{build_env, Action, EnvError, GridPos, LabeledGridEnv, LayoutError};
use crate::highlevel::{finalize_episode_with, EpisodeBuffer, HighExperience, HighLevelMode};
use crate::interpret::RecordTree;
use crate::lowlevel::{generate_low_experiences_into, select_action, update_q_l};
use crate::qtable::QError;
use crate::rng::{stream, stream_rng};
use crate::subtask::{Subtask, SubtaskSeq};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Maximum number of training episodes.
    pub episodes: u64,
    /// Low-level learning rate.
    pub alpha: f64,
    /// High-level learning rate.
    pub beta: f64,
    pub gamma: f64,
    /// Low-level exploration rate.
    pub epsilon: f64,
    /// Replaces the task's step cap when set.
    pub step_cap: Option<usize>,
    pub seed: u64,
    /// Environment steps between greedy evaluations.
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Training stops once this many environment steps were taken.
    pub max_env_steps: Option<u64>,
    /// Update `Q_l` only for the subtask being pursued.
    pub no_multi_experience: bool,
    /// Drop the achieved sequence from `Q_h` keys.
    pub no_sequence: bool,
    /// Store the chosen subtask and commit every step, without relabeling.
    pub no_assumed_choice: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 1000,
            alpha: 0.1,
            beta: 0.1,
            gamma: 0.9,
            epsilon: 0.2,
            step_cap: None,
            seed: 0,
            eval_every: 1000,
            eval_episodes: 20,
            max_env_steps: None,
            no_multi_experience: false,
            no_sequence: false,
            no_assumed_choice: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{name} = {value} is outside (0, 1]")]
    LearningRate { name: &'static str, value: f64 },
    #[error("gamma = {0} is outside [0, 1)")]
    Discount(f64),
    #[error("epsilon = {0} is outside [0, 1]")]
    Exploration(f64),
    #[error("eval_every must be positive")]
    ZeroEvalEvery,
    #[error("step_cap must be positive")]
    ZeroStepCap,
    #[error("option_timeout must be positive")]
    ZeroOptionTimeout,
    #[error("relabel_count must be positive")]
    ZeroRelabelCount,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(ConfigError::LearningRate { name, value });
            }
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ConfigError::Discount(self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(ConfigError::Exploration(self.epsilon));
        }
        if self.eval_every == 0 {
            return Err(ConfigError::ZeroEvalEvery);
        }
        if self.step_cap == Some(0) {
            return Err(ConfigError::ZeroStepCap);
        }
        Ok(())
    }

    pub fn high_level_mode(&self) -> HighLevelMode {
        HighLevelMode {
            use_sequence: !self.no_sequence,
            assumed_choice: !self.no_assumed_choice,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Table(#[from] QError),
}

/// One evaluation point of a learning curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    /// Training environment steps taken so far.
    pub env_steps: u64,
    /// Mean undiscounted greedy return.
    pub eval_return: f64,
    /// Index of the training episode in progress.
    pub episode: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

impl RunLog {
    /// First logged step count at which the eval return reached `threshold`.
    pub fn first_reaching(&self, threshold: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.eval_return >= threshold)
            .map(|r| r.env_steps)
    }
}

/// Everything observable about one training step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub episode: u64,
    pub t: usize,
    pub s: GridPos,
    /// Achieved sequence at the start of the step.
    pub seq: SubtaskSeq,
    pub p_chosen: Subtask,
    pub action: Action,
    pub s_next: GridPos,
    pub reward: f64,
    pub label: Option<Subtask>,
    pub terminal: bool,
}

/// Hooks into a training run. All methods default to doing nothing.
pub trait TrainObserver {
    fn on_step(&mut self, _step: &StepRecord) {}
    fn on_high_update(&mut self, _experience: &HighExperience, _target: f64) {}
    fn on_eval(&mut self, _row: &LogRow) {}
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

/// Counts training steps, runs evaluations on schedule, and enforces the
/// step budget.
pub(crate) struct EvalClock {
    eval_every: u64,
    eval_episodes: usize,
    max_env_steps: Option<u64>,
    env_steps: u64,
    rng: ChaCha8Rng,
    log: RunLog,
}

pub(crate) struct Tick {
    pub row: Option<LogRow>,
    pub exhausted: bool,
}

impl EvalClock {
    pub(crate) fn new(config: &TrainConfig) -> Self {
        EvalClock {
            eval_every: config.eval_every,
            eval_episodes: config.eval_episodes,
            max_env_steps: config.max_env_steps,
            env_steps: 0,
            rng: stream_rng(config.seed, stream::EVAL),
            log: RunLog::default(),
        }
    }

    pub(crate) fn exhausted(&self) -> bool {
        self.max_env_steps.is_some_and(|max| self.env_steps >= max)
    }

    pub(crate) fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// Counts one environment step and evaluates with `eval` when due.
    pub(crate) fn tick(
        &mut self,
        episode: u64,
        eval: impl FnOnce(usize, &mut ChaCha8Rng) -> f64,
    ) -> Tick {
        self.env_steps += 1;
        let row = self.env_steps.is_multiple_of(self.eval_every).then(|| {
            let row = LogRow {
                env_steps: self.env_steps,
                eval_return: eval(self.eval_episodes, &mut self.rng),
                episode,
            };
            self.log.rows.push(row);
            row
        });
        Tick {
            row,
            exhausted: self.exhausted(),
        }
    }

    pub(crate) fn into_log(self) -> RunLog {
        self.log
    }
}

/// The environment a run trains on: a copy of `env` with the configured
/// step cap.
pub(crate) fn prepare_env(
    env: &LabeledGridEnv,
    step_cap: Option<usize>,
) -> Result<LabeledGridEnv, LayoutError> {
    match step_cap {
        None => Ok(env.clone()),
        Some(cap) => build_env(env.spec().clone().with_step_cap(cap), env.seed()),
    }
}

/// A frozen policy that can be rolled out by [`evaluate`].
pub trait GreedyPolicy {
    fn start_episode(&mut self) {}
    fn act(&mut self, s: GridPos, seq: &SubtaskSeq, rng: &mut ChaCha8Rng) -> Action;
    fn observe(&mut self, _label: Option<Subtask>) {}
}

struct AlcsPolicy<'a> {
    agent: &'a Agent,
    incumbent: Option<Subtask>,
}

impl GreedyPolicy for AlcsPolicy<'_> {
    fn start_episode(&mut self) {
        self.incumbent = None;
    }

    fn act(&mut self, s: GridPos, seq: &SubtaskSeq, rng: &mut ChaCha8Rng) -> Action {
        let p = self.agent.choose_subtask(s, seq, self.incumbent, rng);
        self.incumbent = Some(p);
        self.agent.greedy_action(s, p, rng)
    }
}

/// Mean undiscounted return of `policy` over `episodes` rollouts on a copy
/// of `env`. Nothing is learned.
pub fn evaluate<P: GreedyPolicy + ?Sized>(
    env: &LabeledGridEnv,
    policy: &mut P,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    if episodes == 0 {
        return 0.0;
    }
    let mut env = env.clone();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut s = env.reset();
        let mut seq = SubtaskSeq::empty();
        policy.start_episode();
        loop {
            let a = policy.act(s, &seq, rng);
            let out = env.step(a).expect("environment was reset");
            total += out.reward;
            policy.observe(out.raw_label);
            if let Some(p) = out.raw_label {
                seq = seq.extended(p);
            }
            s = out.next_state;
            if out.terminal {
                break;
            }
        }
    }
    total / episodes as f64
}

/// Greedy ALCS rollouts (ε = 0) with ties broken by `rng`.
pub fn evaluate_agent(
    env: &LabeledGridEnv,
    agent: &Agent,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    evaluate(
        env,
        &mut AlcsPolicy {
            agent,
            incumbent: None,
        },
        episodes,
        rng,
    )
}

pub struct TrainOutput {
    pub agent: Agent,
    pub tree: RecordTree,
    pub log: RunLog,
    pub env_steps: u64,
    pub episodes: u64,
}

pub fn train(env: &LabeledGridEnv, config: &TrainConfig) -> Result<TrainOutput, TrainError> {
    train_with_observer(env, config, &mut NoObserver)
}

/// Runs ALCS on `env` until `config.episodes` episodes or the step budget
/// are used up. Deterministic in `config`.
pub fn train_with_observer<O: TrainObserver + ?Sized>(
    env: &LabeledGridEnv,
    config: &TrainConfig,
    observer: &mut O,
) -> Result<TrainOutput, TrainError> {
    config.validate()?;
    let mut env = prepare_env(env, config.step_cap)?;
    let eval_env = env.clone();
    let mode = config.high_level_mode();
    let mut agent = Agent::new(env.vocabulary().clone(), mode);
    let subtasks = agent.subtasks().to_vec();
    let mut tree = RecordTree::new();
    let mut buffer = EpisodeBuffer::new(mode);
    let mut explore = stream_rng(config.seed, stream::EXPLORE);
    let mut low_ties = stream_rng(config.seed, stream::LOW_TIES);
    let mut high_ties = stream_rng(config.seed, stream::HIGH_TIES);
    let mut clock = EvalClock::new(config);
    let mut low_batch = Vec::with_capacity(subtasks.len());
    let mut episodes = 0;

    while episodes < config.episodes && !clock.exhausted() {
        let episode = episodes;
        episodes += 1;
        let mut s = env.reset();
        let mut label_s = env.label(s)?;
        let mut seq = SubtaskSeq::empty();
        let mut t = 0;
        let mut incumbent = None;
        loop {
            let p = agent.choose_subtask(s, &seq, incumbent, &mut high_ties);
            incumbent = Some(p);
            let a = select_action(
                &agent.q_low,
                s,
                p,
                config.epsilon,
                &mut explore,
                &mut low_ties,
            );
            let out = env.step(a)?;
            let label = out.raw_label;

            low_batch.clear();
            let targets: &[Subtask] = if config.no_multi_experience {
                std::slice::from_ref(&p)
            } else {
                &subtasks
            };
            generate_low_experiences_into(
                &mut low_batch,
                s,
                a,
                out.next_state,
                label_s,
                label,
                targets,
            );
            update_q_l(&mut agent.q_low, &low_batch, config.alpha, config.gamma)?;

            if let Some(q) = label {
                tree.record_achievement(&seq, q, out.reward);
            }
            let seq_next = buffer.record_step(s, &seq, p, out.next_state, out.reward, label);
            observer.on_step(&StepRecord {
                episode,
                t,
                s,
                seq,
                p_chosen: p,
                action: a,
                s_next: out.next_state,
                reward: out.reward,
                label,
                terminal: out.terminal,
            });
            let tick = clock.tick(episode, |n, rng| evaluate_agent(&eval_env, &agent, n, rng));
            if let Some(row) = tick.row {
                observer.on_eval(&row);
            }

            s = out.next_state;
            label_s = label;
            seq = seq_next;
            t += 1;
            if out.terminal || tick.exhausted {
                break;
            }
        }
        finalize_episode_with(
            &mut agent.q_high,
            &mut buffer,
            &subtasks,
            config.beta,
            config.gamma,
            |e, target| observer.on_high_update(e, target),
        )?;
    }

    Ok(TrainOutput {
        agent,
        tree,
        env_steps: clock.env_steps(),
        log: clock.into_log(),
        episodes,
    })
}

/// Uniform draw used by baselines that pick among subtasks.
pub(crate) fn uniform<T: Copy, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> T {
    items[rng.random_range(0..items.len())]
}
