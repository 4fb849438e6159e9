//! The subtask-conditioned low-level policy.
//!
//! Every real transition is turned into one experience per vocabulary
//! element, each rewarded by whether that element was newly achieved, and all
//! of them update the shared table `Q_l(s, p, a)`.

use rand::Rng;

use crate::env::{Action, GridPos};
use crate::qtable::{QError, QTable};
use crate::subtask::Subtask;

/// `Q_l`, keyed by `(state, subtask)` with one column per action.
pub type LowTable = QTable<(GridPos, Subtask)>;

pub fn new_low_table() -> LowTable {
    QTable::new(Action::ALL.len())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowExperience {
    pub s: GridPos,
    pub a: Action,
    pub s_next: GridPos,
    pub r: f64,
    pub p: Subtask,
    pub done: bool,
}

/// Reward for pursuing `p`: 1 exactly when `p` is the label of the entered
/// state and was not already the label of the state left.
pub fn subtask_reward(p: Subtask, label_s: Option<Subtask>, label_s_next: Option<Subtask>) -> f64 {
    if label_s_next == Some(p) && label_s != Some(p) {
        1.0
    } else {
        0.0
    }
}

/// Appends one experience per subtask in `vocabulary` (in order) to `out`.
///
/// `label_s` is the deduplicated label observed when `s` was entered, not a
/// fresh query, so the reward stays well defined under deduplication.
pub fn generate_low_experiences_into(
    out: &mut Vec<LowExperience>,
    s: GridPos,
    a: Action,
    s_next: GridPos,
    label_s: Option<Subtask>,
    label_s_next: Option<Subtask>,
    vocabulary: &[Subtask],
) {
    out.extend(vocabulary.iter().map(|&p| {
        let r = subtask_reward(p, label_s, label_s_next);
        LowExperience {
            s,
            a,
            s_next,
            r,
            p,
            done: r == 1.0,
        }
    }));
}

pub fn generate_low_experiences(
    s: GridPos,
    a: Action,
    s_next: GridPos,
    label_s: Option<Subtask>,
    label_s_next: Option<Subtask>,
    vocabulary: &[Subtask],
) -> Vec<LowExperience> {
    let mut out = Vec::with_capacity(vocabulary.len());
    generate_low_experiences_into(&mut out, s, a, s_next, label_s, label_s_next, vocabulary);
    out
}

/// Applies each experience once, in order. Achieving experiences use the
/// reward as the target; the rest bootstrap from `max_a' Q_l(s', p, a')`.
pub fn update_q_l(
    q_l: &mut LowTable,
    experiences: &[LowExperience],
    alpha: f64,
    gamma: f64,
) -> Result<(), QError> {
    for e in experiences {
        let target = if e.done {
            e.r
        } else {
            e.r + gamma * q_l.max_over(&(e.s_next, e.p), &Action::ALL)?
        };
        q_l.td_set(&(e.s, e.p), e.a, target, alpha)?;
    }
    Ok(())
}

/// ε-greedy action for subtask `p`. `explore` decides exploration and draws
/// random actions; `ties` breaks ties among greedy actions.
pub fn select_action<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    q_l: &LowTable,
    s: GridPos,
    p: Subtask,
    epsilon: f64,
    explore: &mut R1,
    ties: &mut R2,
) -> Action {
    if explore.random::<f64>() < epsilon {
        Action::ALL[explore.random_range(0..Action::ALL.len())]
    } else {
        greedy_action(q_l, s, p, ties)
    }
}

pub fn greedy_action<R: Rng + ?Sized>(
    q_l: &LowTable,
    s: GridPos,
    p: Subtask,
    ties: &mut R,
) -> Action {
    q_l.argmax_over(&(s, p), &Action::ALL, ties)
        .expect("action candidates are fixed and in range")
}
