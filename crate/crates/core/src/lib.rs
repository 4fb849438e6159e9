//! Automatically learning to compose subtasks.
//!
//! A two-level tabular learner for tasks whose reward depends on the order
//! in which labeled subtasks are achieved. The low level learns one policy
//! per subtask from every transition at once; the high level picks the next
//! subtask from the current state and the subtasks achieved so far.

pub mod agent;
pub mod baselines;
pub mod env;
pub mod harness;
pub mod highlevel;
pub mod interpret;
pub mod lowlevel;
pub mod qtable;
pub mod rng;
pub mod subtask;
pub mod trainer;

pub use agent::Agent;
pub use baselines::{train_method, BaselineConfig, Method, Trained};
pub use env::{build_env, builtin_task, GridPos, LabeledGridEnv, TaskSpec};
pub use harness::{run_experiment, ExperimentSpec};
pub use subtask::{Subtask, SubtaskSeq, Vocabulary};
pub use trainer::{train, TrainConfig};
