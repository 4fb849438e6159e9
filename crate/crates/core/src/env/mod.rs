//! Deterministic labeled gridworlds.
//!
//! An environment is a 4-connected grid with blocked cells, a start cell and
//! a set of label cells. The MDP state is the agent's cell; everything the
//! task remembers about progress lives in the episode's achievement history.
//! The labeling function reports a cell's subtask only the first time it is
//! reached in an episode.

mod builtin;
mod task;

pub use builtin::{builtin_task, builtin_task_names, BUILTIN_TASKS};
pub use task::{Cell, Layout, LayoutError, RewardRule, TaskSpec};

use std::fmt;

use thiserror::Error;

use crate::qtable::Column;
use crate::subtask::{Subtask, Vocabulary};

/// A grid cell; `x` is the column and `y` the row, both 0-based, with row 0
/// at the top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPos {
    pub x: u16,
    pub y: u16,
}

impl GridPos {
    pub const fn new(x: u16, y: u16) -> Self {
        GridPos { x, y }
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

impl std::str::FromStr for GridPos {
    type Err = String;

    /// Parses `x,y`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (x, y) = s
            .split_once(',')
            .ok_or_else(|| format!("expected x,y but got {s:?}"))?;
        let coord = |v: &str| {
            v.trim()
                .parse::<u16>()
                .map_err(|_| format!("bad coordinate {v:?} in {s:?}"))
        };
        Ok(GridPos::new(coord(x)?, coord(y)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.name() == name)
    }

    fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }
}

impl Column for Action {
    fn column(self) -> usize {
        self as usize
    }
}

impl Column for Subtask {
    fn column(self) -> usize {
        self.index()
    }
}

/// Result of one environment step, including the deduplicated label of the
/// cell entered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: GridPos,
    pub reward: f64,
    pub terminal: bool,
    pub raw_label: Option<Subtask>,
}

/// A label-free transition, as seen by methods that get no domain knowledge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub next_state: GridPos,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("step called before reset")]
    NotReset,
    #[error("step called after the episode terminated")]
    EpisodeOver,
    #[error("state {0} is outside the layout")]
    OutOfBounds(GridPos),
}

/// The reward-only view of an environment.
///
/// Methods that must not see subtask labels (flat Q-learning) are written
/// against this trait, so they have no way to reach the labeling function.
pub trait Mdp {
    fn reset(&mut self) -> GridPos;
    fn transition(&mut self, action: Action) -> Result<Transition, EnvError>;
}

/// A deterministic gridworld task with a labeling function.
#[derive(Clone, Debug)]
pub struct LabeledGridEnv {
    spec: TaskSpec,
    seed: u64,
    pos: GridPos,
    steps: usize,
    /// Subtasks whose label already fired this episode.
    achieved: u64,
    /// Task-progress set maintained by the reward rule.
    progress: u64,
    started: bool,
    done: bool,
}

impl LabeledGridEnv {
    /// Builds an environment in un-reset state.
    ///
    /// The dynamics are deterministic; `seed` is kept so that two
    /// environments built from the same `(spec, seed)` are interchangeable.
    pub fn new(spec: TaskSpec, seed: u64) -> Result<Self, LayoutError> {
        spec.validate()?;
        Ok(LabeledGridEnv {
            pos: spec.layout().start(),
            spec,
            seed,
            steps: 0,
            achieved: 0,
            progress: 0,
            started: false,
            done: false,
        })
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layout(&self) -> &Layout {
        self.spec.layout()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        self.spec.vocabulary()
    }

    pub fn step_cap(&self) -> usize {
        self.spec.step_cap()
    }

    pub fn position(&self) -> GridPos {
        self.pos
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_terminal(&self) -> bool {
        self.done
    }

    /// Subtasks whose label has fired this episode, in vocabulary order.
    pub fn achieved(&self) -> Vec<Subtask> {
        self.vocabulary()
            .subtasks()
            .into_iter()
            .filter(|p| self.achieved & (1 << p.0) != 0)
            .collect()
    }

    pub fn reset(&mut self) -> GridPos {
        self.pos = self.spec.layout().start();
        self.steps = 0;
        self.achieved = 0;
        self.progress = 0;
        self.started = true;
        self.done = false;
        self.pos
    }

    /// The labeling function under per-episode deduplication: the subtask of
    /// `state`'s cell, unless that subtask was already achieved this episode.
    pub fn label(&self, state: GridPos) -> Result<Option<Subtask>, EnvError> {
        let layout = self.spec.layout();
        if !layout.in_bounds(state) {
            return Err(EnvError::OutOfBounds(state));
        }
        Ok(layout
            .label_at(state)
            .filter(|p| self.achieved & (1 << p.0) == 0))
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let layout = self.spec.layout();
        self.pos = layout.move_from(self.pos, action);
        self.steps += 1;

        let cell_subtask = layout.label_at(self.pos);
        let raw_label = cell_subtask.filter(|p| self.achieved & (1 << p.0) == 0);
        if let Some(p) = raw_label {
            self.achieved |= 1 << p.0;
        }
        let (reward, completed) = match cell_subtask {
            Some(p) => self.spec.reward_rule().advance(&mut self.progress, p),
            None => (0.0, false),
        };
        let terminal = completed || self.steps >= self.spec.step_cap();
        self.done = terminal;
        Ok(StepOutcome {
            next_state: self.pos,
            reward,
            terminal,
            raw_label,
        })
    }
}

impl Mdp for LabeledGridEnv {
    fn reset(&mut self) -> GridPos {
        LabeledGridEnv::reset(self)
    }

    fn transition(&mut self, action: Action) -> Result<Transition, EnvError> {
        let out = self.step(action)?;
        Ok(Transition {
            next_state: out.next_state,
            reward: out.reward,
            terminal: out.terminal,
        })
    }
}

/// Constructs an environment from a task specification.
pub fn build_env(spec: TaskSpec, seed: u64) -> Result<LabeledGridEnv, LayoutError> {
    LabeledGridEnv::new(spec, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coffee() -> LabeledGridEnv {
        build_env(builtin_task("Coffee").unwrap(), 0).unwrap()
    }

    /// Walks to `target` along a BFS shortest path, returning the outcomes.
    fn walk_to(env: &mut LabeledGridEnv, target: GridPos) -> Vec<StepOutcome> {
        let path = env.layout().shortest_path(env.position(), target).unwrap();
        path.into_iter().map(|a| env.step(a).unwrap()).collect()
    }

    #[test]
    fn reset_puts_agent_at_start() {
        let mut env = coffee();
        let start = env.layout().start();
        assert_eq!(env.reset(), start);
        assert_eq!(env.reset(), start);
        assert!(env.achieved().is_empty());
        assert_eq!(env.label(start).unwrap(), None);
    }

    #[test]
    fn step_requires_reset() {
        let mut env = coffee();
        assert_eq!(env.step(Action::Up), Err(EnvError::NotReset));
    }

    #[test]
    fn coffee_rewards_only_office_after_coffee() {
        let mut env = coffee();
        env.reset();
        let vocab = env.vocabulary().clone();
        let c = vocab.lookup("c").unwrap();
        let o = vocab.lookup("o").unwrap();
        let coffee_cell = env.layout().cells_of(c)[0];
        let office_cell = env.layout().cells_of(o)[0];

        let outs = walk_to(&mut env, coffee_cell);
        let last = outs.last().unwrap();
        assert_eq!(last.raw_label, Some(c));
        assert_eq!(last.reward, 0.0);
        assert!(!last.terminal);
        assert!(outs[..outs.len() - 1].iter().all(|o| o.raw_label.is_none()));
        assert_eq!(env.label(coffee_cell).unwrap(), None);

        let outs = walk_to(&mut env, office_cell);
        let last = outs.last().unwrap();
        assert_eq!(last.raw_label, Some(o));
        assert_eq!(last.reward, 1.0);
        assert!(last.terminal);
        assert_eq!(env.step(Action::Up), Err(EnvError::EpisodeOver));
    }

    #[test]
    fn office_before_coffee_pays_nothing_but_later_visit_does() {
        // A corridor with the two on opposite sides of the start.
        let spec = TaskSpec::from_toml_str(
            r#"
name = "Hallway"
domain = "office"
step_cap = 100
vocabulary = ["c", "o"]
grid = """
#######
#c.S.o#
#######
"""
[legend]
c = "c"
o = "o"
[reward]
kind = "precedence"
goal = "o"
[reward.requires]
o = ["c"]
"#,
        )
        .unwrap();
        let mut env = build_env(spec, 0).unwrap();
        env.reset();
        let vocab = env.vocabulary().clone();
        let c = vocab.lookup("c").unwrap();
        let o = vocab.lookup("o").unwrap();
        let coffee_cell = env.layout().cells_of(c)[0];
        let office_cell = env.layout().cells_of(o)[0];

        let last = *walk_to(&mut env, office_cell).last().unwrap();
        assert_eq!(
            (last.raw_label, last.reward, last.terminal),
            (Some(o), 0.0, false)
        );
        walk_to(&mut env, coffee_cell);
        let last = *walk_to(&mut env, office_cell).last().unwrap();
        // The office label is deduplicated, but the task still completes.
        assert_eq!(
            (last.raw_label, last.reward, last.terminal),
            (None, 1.0, true)
        );
    }

    #[test]
    fn bonus_pays_per_package_plus_completion() {
        let mut env = build_env(builtin_task("Bonus").unwrap(), 0).unwrap();
        env.reset();
        let vocab = env.vocabulary().clone();
        for name in ["A", "B", "C", "D"] {
            let cell = env.layout().cells_of(vocab.lookup(name).unwrap())[0];
            let outs = walk_to(&mut env, cell);
            assert!(outs.iter().all(|o| o.reward == 0.0 && !o.terminal));
        }
        let office = env.layout().cells_of(vocab.lookup("o").unwrap())[0];
        let last = *walk_to(&mut env, office).last().unwrap();
        assert_eq!(last.reward, 9.0);
        assert!(last.terminal);
    }

    #[test]
    fn bonus_terminates_at_office_with_partial_collection() {
        let mut env = build_env(builtin_task("Bonus").unwrap(), 0).unwrap();
        env.reset();
        let vocab = env.vocabulary().clone();
        let a = env.layout().cells_of(vocab.lookup("A").unwrap())[0];
        walk_to(&mut env, a);
        let office = env.layout().cells_of(vocab.lookup("o").unwrap())[0];
        let last = *walk_to(&mut env, office).last().unwrap();
        assert_eq!(last.reward, 1.0);
        assert!(last.terminal);
    }

    #[test]
    fn step_cap_terminates_without_reward() {
        let mut env = coffee();
        env.reset();
        let cap = env.step_cap();
        let mut last = None;
        for i in 0..cap {
            let out = env.step(Action::Up).unwrap();
            assert_eq!(out.terminal, i + 1 == cap);
            last = Some(out);
        }
        assert_eq!(last.unwrap().reward, 0.0);
    }

    #[test]
    fn walls_block_movement() {
        let mut env = coffee();
        env.reset();
        // Keep pushing up until blocked; the final steps stay in place.
        let mut prev = env.position();
        for _ in 0..20 {
            let out = env.step(Action::Up).unwrap();
            prev = out.next_state;
        }
        let out = env.step(Action::Up).unwrap();
        assert_eq!(out.next_state, prev);
    }

    #[test]
    fn label_rejects_out_of_bounds() {
        let env = coffee();
        assert!(env.label(GridPos::new(500, 0)).is_err());
    }

    #[test]
    fn identical_envs_replay_identically() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let actions: Vec<Action> = (0..50)
            .map(|_| Action::ALL[rng.random_range(0..4)])
            .collect();
        let mut a = build_env(builtin_task("CoffeeMail").unwrap(), 3).unwrap();
        let mut b = build_env(builtin_task("CoffeeMail").unwrap(), 3).unwrap();
        a.reset();
        b.reset();
        let sa: Vec<_> = actions.iter().map(|&x| a.step(x).unwrap()).collect();
        let sb: Vec<_> = actions.iter().map(|&x| b.step(x).unwrap()).collect();
        assert_eq!(sa, sb);
        a.reset();
        let again: Vec<_> = actions.iter().map(|&x| a.step(x).unwrap()).collect();
        assert_eq!(sa, again);
    }
}
