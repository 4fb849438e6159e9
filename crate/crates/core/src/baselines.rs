//! Comparison methods: flat Q-learning, options with and without
//! interruption, and goal-conditioned learning with achieved-goal
//! relabeling.
//!
//! All of them draw from the same seeded streams, count steps with the same
//! clock and are evaluated greedily on the same schedule as ALCS.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, GridPos, LabeledGridEnv, Mdp};
use crate::lowlevel::{
    generate_low_experiences_into, greedy_action, new_low_table, select_action, update_q_l,
    LowExperience, LowTable,
};
use crate::qtable::QTable;
use crate::rng::{stream, stream_rng};
use crate::subtask::{Subtask, SubtaskSeq};
use crate::trainer::{
    evaluate, prepare_env, train, uniform, ConfigError, EvalClock, GreedyPolicy, RunLog,
    TrainConfig, TrainError, TrainOutput,
};

/// A learning method the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Alcs,
    FlatQ,
    Hrl,
    Interrupting,
    Her,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Alcs,
        Method::FlatQ,
        Method::Hrl,
        Method::Interrupting,
        Method::Her,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Alcs => "alcs",
            Method::FlatQ => "flat_q",
            Method::Hrl => "hrl",
            Method::Interrupting => "interrupting",
            Method::Her => "her",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                format!(
                    "unknown method {s:?} (expected one of {})",
                    known.join(", ")
                )
            })
    }
}

/// Settings only some baselines read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Steps after which an option that has not reached its subtask ends.
    pub option_timeout: usize,
    /// Most achieved goals relabeled per episode.
    pub relabel_count: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            option_timeout: 100,
            relabel_count: 4,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.option_timeout == 0 {
            return Err(ConfigError::ZeroOptionTimeout);
        }
        if self.relabel_count == 0 {
            return Err(ConfigError::ZeroRelabelCount);
        }
        Ok(())
    }
}

/// `Q(s, a)` over raw cells.
pub type FlatTable = QTable<GridPos>;

/// `Q(s, option)` over raw cells, one column per subtask.
pub type OptionTable = QTable<GridPos>;

pub struct FlatOutput {
    pub q: FlatTable,
    pub log: RunLog,
    pub env_steps: u64,
    pub episodes: u64,
}

pub struct HrlOutput {
    pub q_options: OptionTable,
    pub q_low: LowTable,
    pub log: RunLog,
    pub env_steps: u64,
    pub episodes: u64,
}

pub struct HerOutput {
    /// Goal-conditioned `Q(s, goal, a)`.
    pub q_low: LowTable,
    pub log: RunLog,
    pub env_steps: u64,
    pub episodes: u64,
}

/// The result of any method.
pub enum Trained {
    Alcs(TrainOutput),
    FlatQ(FlatOutput),
    Hrl(HrlOutput),
    Her(HerOutput),
}

impl Trained {
    pub fn log(&self) -> &RunLog {
        match self {
            Trained::Alcs(o) => &o.log,
            Trained::FlatQ(o) => &o.log,
            Trained::Hrl(o) => &o.log,
            Trained::Her(o) => &o.log,
        }
    }

    pub fn env_steps(&self) -> u64 {
        match self {
            Trained::Alcs(o) => o.env_steps,
            Trained::FlatQ(o) => o.env_steps,
            Trained::Hrl(o) => o.env_steps,
            Trained::Her(o) => o.env_steps,
        }
    }
}

/// Runs `method` on `env`.
pub fn train_method(
    env: &LabeledGridEnv,
    method: Method,
    config: &TrainConfig,
    extra: &BaselineConfig,
) -> Result<Trained, TrainError> {
    Ok(match method {
        Method::Alcs => Trained::Alcs(train(env, config)?),
        Method::FlatQ => Trained::FlatQ(train_flat_q(env, config)?),
        Method::Hrl => Trained::Hrl(train_hrl(env, config, extra)?),
        Method::Interrupting => Trained::Alcs(train_interrupting(env, config)?),
        Method::Her => Trained::Her(train_her(env, config, extra)?),
    })
}

/// Flat Q-learning on the task's step-capped environment.
pub fn train_flat_q(env: &LabeledGridEnv, config: &TrainConfig) -> Result<FlatOutput, TrainError> {
    config.validate()?;
    let env = prepare_env(env, config.step_cap)?;
    train_flat_q_mdp(&env, config)
}

/// One-step ε-greedy Q-learning on cell states. Only the reward-level view
/// of `env` is used, so labels are out of reach.
pub fn train_flat_q_mdp<E: Mdp + Clone>(
    env: &E,
    config: &TrainConfig,
) -> Result<FlatOutput, TrainError> {
    config.validate()?;
    let eval_env = env.clone();
    let mut env = env.clone();
    let mut q = FlatTable::new(Action::ALL.len());
    let mut explore = stream_rng(config.seed, stream::EXPLORE);
    let mut ties = stream_rng(config.seed, stream::LOW_TIES);
    let mut clock = EvalClock::new(config);
    let mut episodes = 0;

    while episodes < config.episodes && !clock.exhausted() {
        let episode = episodes;
        episodes += 1;
        let mut s = env.reset();
        loop {
            let a = if explore.random::<f64>() < config.epsilon {
                uniform(&Action::ALL, &mut explore)
            } else {
                q.argmax_over(&s, &Action::ALL, &mut ties)?
            };
            let out = env.transition(a)?;
            let target = if out.terminal {
                out.reward
            } else {
                out.reward + config.gamma * q.max_over(&out.next_state, &Action::ALL)?
            };
            q.td_set(&s, a, target, config.alpha)?;
            let tick = clock.tick(episode, |n, rng| evaluate_flat(&eval_env, &q, n, rng));
            s = out.next_state;
            if out.terminal || tick.exhausted {
                break;
            }
        }
    }

    Ok(FlatOutput {
        q,
        env_steps: clock.env_steps(),
        log: clock.into_log(),
        episodes,
    })
}

/// Mean undiscounted greedy return of a flat table.
pub fn evaluate_flat<E: Mdp + Clone>(
    env: &E,
    q: &FlatTable,
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
        loop {
            let a = q
                .argmax_over(&s, &Action::ALL, rng)
                .expect("action columns match the table");
            let out = env.transition(a).expect("environment was reset");
            total += out.reward;
            s = out.next_state;
            if out.terminal {
                break;
            }
        }
    }
    total / episodes as f64
}

/// An option in progress.
struct RunningOption {
    p: Subtask,
    start: GridPos,
    steps: usize,
    /// Discounted reward collected since `start`.
    reward: f64,
}

/// Options over subtasks with SMDP updates at option boundaries.
///
/// An option ends when its own subtask's label fires, after
/// `option_timeout` steps, or with the episode. The low level is the ALCS
/// low level, trained on every subtask from every step.
pub fn train_hrl(
    env: &LabeledGridEnv,
    config: &TrainConfig,
    extra: &BaselineConfig,
) -> Result<HrlOutput, TrainError> {
    config.validate()?;
    extra.validate()?;
    let mut env = prepare_env(env, config.step_cap)?;
    let eval_env = env.clone();
    let subtasks = env.vocabulary().subtasks();
    let mut q_options = OptionTable::new(subtasks.len());
    let mut q_low = new_low_table();
    let mut explore = stream_rng(config.seed, stream::EXPLORE);
    let mut low_ties = stream_rng(config.seed, stream::LOW_TIES);
    let mut high_ties = stream_rng(config.seed, stream::HIGH_TIES);
    let mut clock = EvalClock::new(config);
    let mut batch = Vec::with_capacity(subtasks.len());
    let mut episodes = 0;

    while episodes < config.episodes && !clock.exhausted() {
        let episode = episodes;
        episodes += 1;
        let mut s = env.reset();
        let mut label_s = env.label(s)?;
        let mut running: Option<RunningOption> = None;
        loop {
            let option = match running.as_mut() {
                Some(o) => o,
                None => {
                    let p = if explore.random::<f64>() < config.epsilon {
                        uniform(&subtasks, &mut explore)
                    } else {
                        q_options.argmax_over(&s, &subtasks, &mut high_ties)?
                    };
                    running.insert(RunningOption {
                        p,
                        start: s,
                        steps: 0,
                        reward: 0.0,
                    })
                }
            };
            let p = option.p;
            let a = select_action(&q_low, s, p, config.epsilon, &mut explore, &mut low_ties);
            let out = env.step(a)?;
            batch.clear();
            generate_low_experiences_into(
                &mut batch,
                s,
                a,
                out.next_state,
                label_s,
                out.raw_label,
                &subtasks,
            );
            update_q_l(&mut q_low, &batch, config.alpha, config.gamma)?;

            option.reward += config.gamma.powi(option.steps as i32) * out.reward;
            option.steps += 1;
            if out.raw_label == Some(p) || option.steps >= extra.option_timeout || out.terminal {
                let bootstrap = if out.terminal {
                    0.0
                } else {
                    config.gamma.powi(option.steps as i32)
                        * q_options.max_over(&out.next_state, &subtasks)?
                };
                q_options.td_set(&option.start, p, option.reward + bootstrap, config.beta)?;
                running = None;
            }

            let tick = clock.tick(episode, |n, rng| {
                let mut policy =
                    HrlPolicy::new(&q_options, &q_low, &subtasks, extra.option_timeout);
                evaluate(&eval_env, &mut policy, n, rng)
            });
            s = out.next_state;
            label_s = out.raw_label;
            if out.terminal || tick.exhausted {
                break;
            }
        }
    }

    Ok(HrlOutput {
        q_options,
        q_low,
        env_steps: clock.env_steps(),
        log: clock.into_log(),
        episodes,
    })
}

/// Greedy options with the same termination rule as in training.
pub struct HrlPolicy<'a> {
    q_options: &'a OptionTable,
    q_low: &'a LowTable,
    subtasks: &'a [Subtask],
    timeout: usize,
    current: Option<(Subtask, usize)>,
}

impl<'a> HrlPolicy<'a> {
    pub fn new(
        q_options: &'a OptionTable,
        q_low: &'a LowTable,
        subtasks: &'a [Subtask],
        timeout: usize,
    ) -> Self {
        HrlPolicy {
            q_options,
            q_low,
            subtasks,
            timeout,
            current: None,
        }
    }
}

impl GreedyPolicy for HrlPolicy<'_> {
    fn start_episode(&mut self) {
        self.current = None;
    }

    fn act(&mut self, s: GridPos, _seq: &SubtaskSeq, rng: &mut ChaCha8Rng) -> Action {
        let (p, steps) = match self.current {
            Some(c) => c,
            None => {
                let p = self
                    .q_options
                    .argmax_over(&s, self.subtasks, rng)
                    .expect("option columns match the table");
                (p, 0)
            }
        };
        self.current = Some((p, steps + 1));
        greedy_action(self.q_low, s, p, rng)
    }

    fn observe(&mut self, label: Option<Subtask>) {
        if let Some((p, steps)) = self.current {
            if label == Some(p) || steps >= self.timeout {
                self.current = None;
            }
        }
    }
}

/// Options interrupted every step: ALCS with Markov high-level keys and
/// without relabeling by the achieved subtask.
pub fn train_interrupting(
    env: &LabeledGridEnv,
    config: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    let config = TrainConfig {
        no_sequence: true,
        no_assumed_choice: true,
        ..config.clone()
    };
    train(env, &config)
}

/// A transition kept for relabeling.
#[derive(Clone, Copy)]
struct Stored {
    s: GridPos,
    a: Action,
    s_next: GridPos,
    label_s: Option<Subtask>,
    label: Option<Subtask>,
}

/// Goal-conditioned Q-learning with achieved-goal relabeling.
///
/// The behavior goal is drawn uniformly from the subtasks not yet achieved
/// this episode, and redrawn once it is reached; with nothing left, learning
/// stops for the rest of the episode. When some other subtask is
/// achieved, the steps since the previous achievement are replayed with it
/// as the goal, at most `relabel_count` times per episode.
pub fn train_her(
    env: &LabeledGridEnv,
    config: &TrainConfig,
    extra: &BaselineConfig,
) -> Result<HerOutput, TrainError> {
    config.validate()?;
    extra.validate()?;
    let mut env = prepare_env(env, config.step_cap)?;
    let eval_env = env.clone();
    let subtasks = env.vocabulary().subtasks();
    let mut q_low = new_low_table();
    let mut explore = stream_rng(config.seed, stream::EXPLORE);
    let mut ties = stream_rng(config.seed, stream::LOW_TIES);
    let mut goals = stream_rng(config.seed, stream::GOALS);
    let mut clock = EvalClock::new(config);
    let mut segment: Vec<Stored> = Vec::new();
    let mut batch: Vec<LowExperience> = Vec::new();
    let mut episodes = 0;

    while episodes < config.episodes && !clock.exhausted() {
        let episode = episodes;
        episodes += 1;
        let mut seq = SubtaskSeq::empty();
        let mut goal = next_goal(&subtasks, &seq, &mut goals);
        let mut s = env.reset();
        let mut label_s = env.label(s)?;
        let mut relabeled = 0;
        segment.clear();
        loop {
            let a = select_action(&q_low, s, goal, config.epsilon, &mut explore, &mut ties);
            let out = env.step(a)?;
            // Once every subtask was achieved the goal is spent.
            if !seq.contains(goal) {
                batch.clear();
                generate_low_experiences_into(
                    &mut batch,
                    s,
                    a,
                    out.next_state,
                    label_s,
                    out.raw_label,
                    &[goal],
                );
                update_q_l(&mut q_low, &batch, config.alpha, config.gamma)?;
            }

            segment.push(Stored {
                s,
                a,
                s_next: out.next_state,
                label_s,
                label: out.raw_label,
            });
            if let Some(q) = out.raw_label {
                if q != goal && relabeled < extra.relabel_count {
                    relabeled += 1;
                    batch.clear();
                    for t in &segment {
                        generate_low_experiences_into(
                            &mut batch,
                            t.s,
                            t.a,
                            t.s_next,
                            t.label_s,
                            t.label,
                            &[q],
                        );
                    }
                    update_q_l(&mut q_low, &batch, config.alpha, config.gamma)?;
                }
                segment.clear();
                seq = seq.extended(q);
                if q == goal {
                    goal = next_goal(&subtasks, &seq, &mut goals);
                }
            }

            let tick = clock.tick(episode, |n, rng| {
                evaluate(&eval_env, &mut HerPolicy::new(&q_low, &subtasks), n, rng)
            });
            s = out.next_state;
            label_s = out.raw_label;
            if out.terminal || tick.exhausted {
                break;
            }
        }
    }

    Ok(HerOutput {
        q_low,
        env_steps: clock.env_steps(),
        log: clock.into_log(),
        episodes,
    })
}

/// A uniform draw from the subtasks missing from `achieved`, or from all of
/// them once everything was achieved.
fn next_goal<R: Rng + ?Sized>(subtasks: &[Subtask], achieved: &SubtaskSeq, rng: &mut R) -> Subtask {
    let open: Vec<Subtask> = subtasks
        .iter()
        .copied()
        .filter(|&p| !achieved.contains(p))
        .collect();
    if open.is_empty() {
        uniform(subtasks, rng)
    } else {
        uniform(&open, rng)
    }
}

/// Greedy pursuit of uniformly drawn goals, redrawn as they are reached.
/// The last goal is kept once nothing is left to achieve.
pub struct HerPolicy<'a> {
    q_low: &'a LowTable,
    subtasks: &'a [Subtask],
    goal: Option<Subtask>,
}

impl<'a> HerPolicy<'a> {
    pub fn new(q_low: &'a LowTable, subtasks: &'a [Subtask]) -> Self {
        HerPolicy {
            q_low,
            subtasks,
            goal: None,
        }
    }
}

impl GreedyPolicy for HerPolicy<'_> {
    fn start_episode(&mut self) {
        self.goal = None;
    }

    fn act(&mut self, s: GridPos, seq: &SubtaskSeq, rng: &mut ChaCha8Rng) -> Action {
        let spent = |g: Subtask| seq.contains(g) && self.subtasks.iter().any(|&p| !seq.contains(p));
        let goal = match self.goal {
            Some(g) if !spent(g) => g,
            _ => next_goal(self.subtasks, seq, rng),
        };
        self.goal = Some(goal);
        greedy_action(self.q_low, s, goal, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_env, builtin_task, EnvError, Transition};
    use crate::highlevel::{EpisodeBuffer, HighExperience, HighLevelMode};
    use crate::lowlevel::subtask_reward;
    use crate::trainer::{train_with_observer, StepRecord, TrainObserver};

    fn task(name: &str) -> LabeledGridEnv {
        build_env(builtin_task(name).unwrap(), 0).unwrap()
    }

    fn quick(seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            episodes: 20,
            eval_every: 500,
            eval_episodes: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("dqn".parse::<Method>().is_err());
    }

    #[test]
    fn rejects_zero_extras() {
        let env = task("Coffee");
        let zero_timeout = BaselineConfig {
            option_timeout: 0,
            ..BaselineConfig::default()
        };
        assert!(matches!(
            train_hrl(&env, &quick(0), &zero_timeout),
            Err(TrainError::Config(ConfigError::ZeroOptionTimeout))
        ));
        let zero_relabel = BaselineConfig {
            relabel_count: 0,
            ..BaselineConfig::default()
        };
        assert!(matches!(
            train_her(&env, &quick(0), &zero_relabel),
            Err(TrainError::Config(ConfigError::ZeroRelabelCount))
        ));
    }

    /// One cell, reward `r` on every step, never terminates.
    #[derive(Clone)]
    struct Treadmill {
        r: f64,
    }

    impl Mdp for Treadmill {
        fn reset(&mut self) -> GridPos {
            GridPos::new(0, 0)
        }

        fn transition(&mut self, _action: Action) -> Result<Transition, EnvError> {
            Ok(Transition {
                next_state: GridPos::new(0, 0),
                reward: self.r,
                terminal: false,
            })
        }
    }

    #[test]
    fn flat_q_reaches_the_discounted_fixpoint() {
        let config = TrainConfig {
            episodes: 1,
            max_env_steps: Some(20_000),
            eval_episodes: 0,
            ..TrainConfig::default()
        };
        let out = train_flat_q_mdp(&Treadmill { r: 0.5 }, &config).unwrap();
        let fixpoint = 0.5 / (1.0 - config.gamma);
        for a in Action::ALL {
            let q = out.q.q_get(&GridPos::new(0, 0), a).unwrap();
            assert!((q - fixpoint).abs() < 1e-6, "{a:?}: {q}");
        }
        assert_eq!(out.env_steps, 20_000);
    }

    #[test]
    fn every_method_replays_identically() {
        let env = task("CoffeeMail");
        for m in Method::ALL {
            let a = train_method(&env, m, &quick(5), &BaselineConfig::default()).unwrap();
            let b = train_method(&env, m, &quick(5), &BaselineConfig::default()).unwrap();
            assert_eq!(a.log(), b.log(), "{m}");
            let (qa, qb) = match (&a, &b) {
                (Trained::Alcs(x), Trained::Alcs(y)) => (
                    x.agent.q_low.to_snapshot::<Action>(),
                    y.agent.q_low.to_snapshot::<Action>(),
                ),
                (Trained::FlatQ(x), Trained::FlatQ(y)) => {
                    (x.q.to_snapshot::<Action>(), y.q.to_snapshot::<Action>())
                }
                (Trained::Hrl(x), Trained::Hrl(y)) => (
                    x.q_options.to_snapshot::<Subtask>(),
                    y.q_options.to_snapshot::<Subtask>(),
                ),
                (Trained::Her(x), Trained::Her(y)) => (
                    x.q_low.to_snapshot::<Action>(),
                    y.q_low.to_snapshot::<Action>(),
                ),
                _ => panic!("{m} changed output kind"),
            };
            assert_eq!(qa, qb, "{m}");
        }
    }

    #[test]
    fn budgets_are_counted_identically() {
        let env = task("CoffeeMail");
        let config = TrainConfig {
            episodes: u64::MAX,
            max_env_steps: Some(3000),
            ..quick(1)
        };
        for m in Method::ALL {
            let out = train_method(&env, m, &config, &BaselineConfig::default()).unwrap();
            assert_eq!(out.env_steps(), 3000, "{m}");
            let grid: Vec<u64> = out.log().rows.iter().map(|r| r.env_steps).collect();
            assert_eq!(grid, [500, 1000, 1500, 2000, 2500, 3000], "{m}");
        }
    }

    #[test]
    fn flat_q_cannot_solve_coffee() {
        let config = TrainConfig {
            episodes: u64::MAX,
            max_env_steps: Some(50_000),
            eval_every: 5000,
            ..TrainConfig::default()
        };
        let out = train_flat_q(&task("Coffee"), &config).unwrap();
        let best = out
            .log
            .rows
            .iter()
            .map(|r| r.eval_return)
            .fold(0.0, f64::max);
        assert!(best < 0.95, "flat Q solved a non-Markov task: {best}");
    }

    #[test]
    fn hrl_options_end_on_their_subtask_or_timeout() {
        let q = OptionTable::new(2);
        let low = new_low_table();
        let subtasks = [Subtask(0), Subtask(1)];
        let mut policy = HrlPolicy::new(&q, &low, &subtasks, 3);
        let mut rng = stream_rng(0, stream::EVAL);
        let s = GridPos::new(1, 1);
        policy.act(s, &SubtaskSeq::empty(), &mut rng);
        let (p, _) = policy.current.unwrap();
        let other = subtasks.into_iter().find(|&x| x != p).unwrap();
        policy.observe(Some(other));
        assert_eq!(policy.current.map(|c| c.0), Some(p));
        policy.observe(Some(p));
        assert_eq!(policy.current, None);

        for _ in 0..3 {
            assert!(policy.current.is_none_or(|c| c.1 < 3));
            policy.act(s, &SubtaskSeq::empty(), &mut rng);
            policy.observe(None);
        }
        assert_eq!(policy.current, None);
    }

    #[test]
    fn her_learns_to_reach_a_single_goal() {
        let env = task("Coffee");
        let config = TrainConfig {
            episodes: u64::MAX,
            max_env_steps: Some(300_000),
            eval_every: 300_000,
            eval_episodes: 0,
            ..TrainConfig::default()
        };
        let out = train_her(&env, &config, &BaselineConfig::default()).unwrap();
        let c = env.vocabulary().lookup("c").unwrap();
        let mut probe = env.clone();
        let mut s = probe.reset();
        let mut rng = stream_rng(0, stream::EVAL);
        let target = probe.layout().cells_of(c)[0];
        let shortest = probe.layout().distance(s, target).unwrap();
        let mut steps = 0;
        while s != target {
            let a = greedy_action(&out.q_low, s, c, &mut rng);
            s = probe.step(a).unwrap().next_state;
            steps += 1;
            assert!(
                steps <= shortest,
                "greedy path to c is longer than {shortest}: {:?}",
                (s, out.q_low.row(&(s, c)))
            );
        }
        assert_eq!(steps, shortest);
    }

    #[test]
    fn her_relabels_pay_exactly_at_the_achieving_step() {
        // Replay an achieving segment the way the trainer does.
        let c = Subtask(0);
        let cells = [GridPos::new(1, 1), GridPos::new(2, 1), GridPos::new(3, 1)];
        let segment = [
            Stored {
                s: cells[0],
                a: Action::Right,
                s_next: cells[1],
                label_s: None,
                label: None,
            },
            Stored {
                s: cells[1],
                a: Action::Right,
                s_next: cells[2],
                label_s: None,
                label: Some(c),
            },
        ];
        let mut batch = Vec::new();
        for t in &segment {
            generate_low_experiences_into(&mut batch, t.s, t.a, t.s_next, t.label_s, t.label, &[c]);
        }
        let rewards: Vec<f64> = batch.iter().map(|e| e.r).collect();
        assert_eq!(rewards, [0.0, 1.0]);
        assert!(batch[1].done && !batch[0].done);
        assert_eq!(subtask_reward(c, Some(c), Some(c)), 0.0);
    }

    #[derive(Default)]
    struct Trace {
        steps: Vec<StepRecord>,
        updates: Vec<HighExperience>,
    }

    impl TrainObserver for Trace {
        fn on_step(&mut self, step: &StepRecord) {
            self.steps.push(step.clone());
        }
        fn on_high_update(&mut self, e: &HighExperience, _target: f64) {
            self.updates.push(e.clone());
        }
    }

    /// Feeds a recorded step stream through an episode buffer with `mode`,
    /// returning the committed experiences of each episode.
    fn replay(steps: &[StepRecord], mode: HighLevelMode) -> Vec<Vec<HighExperience>> {
        let mut out = Vec::new();
        let mut buffer = EpisodeBuffer::new(mode);
        for (i, st) in steps.iter().enumerate() {
            let seq = mode.key_seq(&st.seq);
            buffer.record_step(st.s, &seq, st.p_chosen, st.s_next, st.reward, st.label);
            if steps.get(i + 1).is_none_or(|n| n.episode != st.episode) {
                out.push(std::mem::take(&mut buffer.experience_h));
                buffer.clear();
            }
        }
        out
    }

    #[test]
    fn interrupting_differs_from_alcs_only_in_keys_and_relabeling() {
        let env = task("CoffeeMail");
        let mut trace = Trace::default();
        let config = TrainConfig {
            no_sequence: true,
            no_assumed_choice: true,
            ..quick(9)
        };
        train_with_observer(&env, &config, &mut trace).unwrap();
        assert_eq!(
            trace.updates.len(),
            trace.steps.len(),
            "one decision per step"
        );

        let interrupting = replay(
            &trace.steps,
            HighLevelMode {
                use_sequence: false,
                assumed_choice: false,
            },
        );
        assert_eq!(interrupting.concat(), trace.updates);

        // On the same steps, ALCS commits the episode up to its last label,
        // relabeled and keyed by the real sequence.
        let alcs = replay(&trace.steps, HighLevelMode::default());
        let (mut relabeled, mut keyed) = (0, 0);
        let mut steps = trace.steps.iter();
        for (full, markov) in alcs.iter().zip(&interrupting) {
            assert!(full.len() <= markov.len());
            let episode: Vec<&StepRecord> = steps.by_ref().take(markov.len()).collect();
            for ((a, b), st) in full.iter().zip(markov).zip(&episode) {
                assert_eq!(a.seq, st.seq);
                relabeled += usize::from(a.p != b.p);
                keyed += usize::from(!a.seq.is_empty());
                let stripped = HighExperience {
                    seq: SubtaskSeq::empty(),
                    seq_next: SubtaskSeq::empty(),
                    p: b.p,
                    ..a.clone()
                };
                assert_eq!(&stripped, b);
            }
        }
        assert!(relabeled > 0 && keyed > 0);
    }
}
