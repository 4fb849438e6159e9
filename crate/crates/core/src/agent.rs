//! The pair of learned tables that make up an ALCS policy.

use rand::Rng;

use crate::env::{Action, GridPos};
use crate::highlevel::{new_high_table, select_subtask, HighLevelMode, HighTable};
use crate::lowlevel::{greedy_action, new_low_table, LowTable};
use crate::subtask::{Subtask, SubtaskSeq, Vocabulary};

#[derive(Clone, Debug)]
pub struct Agent {
    pub q_low: LowTable,
    pub q_high: HighTable,
    vocabulary: Vocabulary,
    subtasks: Vec<Subtask>,
    mode: HighLevelMode,
}

impl Agent {
    /// Fresh all-zero tables.
    pub fn new(vocabulary: Vocabulary, mode: HighLevelMode) -> Self {
        Agent::from_tables(
            vocabulary.clone(),
            mode,
            new_low_table(),
            new_high_table(vocabulary.len()),
        )
    }

    pub fn from_tables(
        vocabulary: Vocabulary,
        mode: HighLevelMode,
        q_low: LowTable,
        q_high: HighTable,
    ) -> Self {
        Agent {
            q_low,
            q_high,
            subtasks: vocabulary.subtasks(),
            vocabulary,
            mode,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn subtasks(&self) -> &[Subtask] {
        &self.subtasks
    }

    pub fn mode(&self) -> HighLevelMode {
        self.mode
    }

    /// Greedy high-level choice with the tie rule of [`select_subtask`].
    pub fn choose_subtask<R: Rng + ?Sized>(
        &self,
        s: GridPos,
        seq: &SubtaskSeq,
        incumbent: Option<Subtask>,
        rng: &mut R,
    ) -> Subtask {
        select_subtask(
            &self.q_high,
            s,
            &self.mode.key_seq(seq),
            seq,
            incumbent,
            &self.subtasks,
            rng,
        )
    }

    pub fn greedy_action<R: Rng + ?Sized>(&self, s: GridPos, p: Subtask, rng: &mut R) -> Action {
        greedy_action(&self.q_low, s, p, rng)
    }
}
