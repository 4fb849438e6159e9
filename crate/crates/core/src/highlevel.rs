//! The composition policy: picks the next subtask from the current state and
//! the sequence of subtasks achieved so far, and learns from environment
//! reward with experiences relabeled by the subtask that was actually
//! achieved.

use rand::Rng;

use crate::env::GridPos;
use crate::qtable::{QError, QTable};
use crate::subtask::{Subtask, SubtaskSeq};

/// `Q_h`, keyed by `(state, achieved sequence)` with one column per subtask.
pub type HighTable = QTable<(GridPos, SubtaskSeq)>;

pub fn new_high_table(vocabulary_len: usize) -> HighTable {
    QTable::new(vocabulary_len)
}

/// `((s, seq), p, (s_next, seq_next), r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HighExperience {
    pub s: GridPos,
    pub seq: SubtaskSeq,
    pub p: Subtask,
    pub s_next: GridPos,
    pub seq_next: SubtaskSeq,
    pub r: f64,
}

/// Switches for the two high-level mechanisms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HighLevelMode {
    /// Condition `Q_h` on the achieved sequence. Off: every key uses `∅`.
    pub use_sequence: bool,
    /// Relabel pending experiences with the achieved subtask. Off: keep the
    /// chosen subtask and commit every experience immediately.
    pub assumed_choice: bool,
}

impl Default for HighLevelMode {
    fn default() -> Self {
        HighLevelMode {
            use_sequence: true,
            assumed_choice: true,
        }
    }
}

impl HighLevelMode {
    /// The sequence used in table keys.
    pub fn key_seq(&self, seq: &SubtaskSeq) -> SubtaskSeq {
        if self.use_sequence {
            seq.clone()
        } else {
            SubtaskSeq::empty()
        }
    }
}

/// Greedy subtask choice `argmax_p Q_h(s, key, p)`.
///
/// Ties keep `incumbent` (the previous step's choice) while it is a
/// maximizer and not yet in `achieved`; otherwise the choice is drawn
/// uniformly from the maximizers. `rng` is consumed only when that draw has
/// more than one option.
pub fn select_subtask<R: Rng + ?Sized>(
    q_h: &HighTable,
    s: GridPos,
    key: &SubtaskSeq,
    achieved: &SubtaskSeq,
    incumbent: Option<Subtask>,
    vocabulary: &[Subtask],
    rng: &mut R,
) -> Subtask {
    let key = (s, key.clone());
    let best = q_h
        .max_over(&key, vocabulary)
        .expect("vocabulary is non-empty and matches the table width");
    let is_max = |p: Subtask| q_h.q_get(&key, p).is_ok_and(|q| q == best);
    if let Some(p) = incumbent {
        if is_max(p) && !achieved.contains(p) {
            return p;
        }
    }
    let pool: Vec<Subtask> = vocabulary.iter().copied().filter(|&p| is_max(p)).collect();
    if pool.len() == 1 {
        pool[0]
    } else {
        pool[rng.random_range(0..pool.len())]
    }
}

/// `seq ⊕ label`, or `seq` when nothing was achieved.
pub fn extend_sequence(seq: &SubtaskSeq, label: Option<Subtask>) -> SubtaskSeq {
    match label {
        Some(p) => seq.extended(p),
        None => seq.clone(),
    }
}

/// Per-episode high-level experience store.
#[derive(Clone, Debug, Default)]
pub struct EpisodeBuffer {
    mode: HighLevelMode,
    /// Experiences since the last achievement, waiting for a label.
    pub e_temp: Vec<HighExperience>,
    /// Experiences committed for the end-of-episode update.
    pub experience_h: Vec<HighExperience>,
}

impl EpisodeBuffer {
    pub fn new(mode: HighLevelMode) -> Self {
        EpisodeBuffer {
            mode,
            e_temp: Vec::new(),
            experience_h: Vec::new(),
        }
    }

    pub fn mode(&self) -> HighLevelMode {
        self.mode
    }

    /// Records one environment step and returns the updated achieved
    /// sequence.
    ///
    /// Without a label the experience waits in `e_temp`. With a label `q`,
    /// the experience is added and every pending experience is committed to
    /// `experience_h` as if `q` had been chosen.
    #[allow(clippy::too_many_arguments)]
    pub fn record_step(
        &mut self,
        s: GridPos,
        seq: &SubtaskSeq,
        p_chosen: Subtask,
        s_next: GridPos,
        r: f64,
        label: Option<Subtask>,
    ) -> SubtaskSeq {
        let seq_next = extend_sequence(seq, label);
        let experience = HighExperience {
            s,
            seq: self.mode.key_seq(seq),
            p: p_chosen,
            s_next,
            seq_next: self.mode.key_seq(&seq_next),
            r,
        };
        if !self.mode.assumed_choice {
            self.experience_h.push(experience);
            return seq_next;
        }
        self.e_temp.push(experience);
        if let Some(p_act) = label {
            self.experience_h.extend(
                self.e_temp
                    .drain(..)
                    .map(|e| HighExperience { p: p_act, ..e }),
            );
        }
        seq_next
    }

    pub fn clear(&mut self) {
        self.e_temp.clear();
        self.experience_h.clear();
    }
}

/// End-of-episode update: every committed experience, in chronological
/// order, moves `Q_h(s, seq, p)` toward `r + γ · max_p' Q_h(s', seq', p')`.
/// Pending experiences that never saw a label are dropped. Both lists are
/// cleared.
pub fn finalize_episode(
    q_h: &mut HighTable,
    buffer: &mut EpisodeBuffer,
    vocabulary: &[Subtask],
    beta: f64,
    gamma: f64,
) -> Result<(), QError> {
    finalize_episode_with(q_h, buffer, vocabulary, beta, gamma, |_, _| {})
}

/// [`finalize_episode`], reporting each applied `(experience, target)`.
pub fn finalize_episode_with(
    q_h: &mut HighTable,
    buffer: &mut EpisodeBuffer,
    vocabulary: &[Subtask],
    beta: f64,
    gamma: f64,
    mut on_update: impl FnMut(&HighExperience, f64),
) -> Result<(), QError> {
    for e in &buffer.experience_h {
        let target = e.r + gamma * q_h.max_over(&(e.s_next, e.seq_next.clone()), vocabulary)?;
        q_h.td_set(&(e.s, e.seq.clone()), e.p, target, beta)?;
        on_update(e, target);
    }
    buffer.clear();
    Ok(())
}
