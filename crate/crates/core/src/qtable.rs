//! Sparse tabular value store shared by every learner.
//!
//! A [`QTable`] maps a key prefix (state, or state plus conditioning) to a
//! row with one value per candidate column (actions or subtasks). Keys that
//! were never written read as `0.0`. Rows are only created by
//! [`QTable::td_set`].

use std::fmt::Write as _;
use std::hash::Hash;

use rand::Rng;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::env::{Action, GridPos};
use crate::subtask::{Subtask, SubtaskSeq};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("column {column} out of range for a table of width {width}")]
    ArityMismatch { column: usize, width: usize },
    #[error("learning rate {0} outside (0, 1]")]
    LearningRate(f64),
    #[error("empty candidate list")]
    EmptyCandidates,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A candidate that indexes a table column.
pub trait Column: Copy {
    fn column(self) -> usize;
}

impl Column for usize {
    fn column(self) -> usize {
        self
    }
}

/// Text encoding of key prefixes for snapshots. Encodings must not contain
/// tabs or newlines; multi-part keys are tab-joined.
pub trait KeyCodec: Sized {
    fn encode(&self, out: &mut String);
    fn decode(parts: &mut std::str::Split<'_, char>) -> Result<Self, String>;
}

impl KeyCodec for GridPos {
    fn encode(&self, out: &mut String) {
        let _ = write!(out, "{},{}", self.x, self.y);
    }

    fn decode(parts: &mut std::str::Split<'_, char>) -> Result<Self, String> {
        parts.next().ok_or("missing position")?.parse()
    }
}

impl KeyCodec for Subtask {
    fn encode(&self, out: &mut String) {
        let _ = write!(out, "{}", self.0);
    }

    fn decode(parts: &mut std::str::Split<'_, char>) -> Result<Self, String> {
        let part = parts.next().ok_or("missing subtask")?;
        part.parse()
            .map(Subtask)
            .map_err(|_| format!("bad subtask {part:?}"))
    }
}

/// Sequences encode as dot-joined subtask indices, `-` when empty.
impl KeyCodec for SubtaskSeq {
    fn encode(&self, out: &mut String) {
        if self.is_empty() {
            out.push('-');
            return;
        }
        for (i, p) in self.iter().enumerate() {
            if i > 0 {
                out.push('.');
            }
            let _ = write!(out, "{}", p.0);
        }
    }

    fn decode(parts: &mut std::str::Split<'_, char>) -> Result<Self, String> {
        let part = parts.next().ok_or("missing sequence")?;
        if part == "-" {
            return Ok(SubtaskSeq::empty());
        }
        part.split('.')
            .map(|s| {
                s.parse()
                    .map(Subtask)
                    .map_err(|_| format!("bad sequence {part:?}"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(SubtaskSeq::from)
    }
}

impl<A: KeyCodec, B: KeyCodec> KeyCodec for (A, B) {
    fn encode(&self, out: &mut String) {
        self.0.encode(out);
        out.push('\t');
        self.1.encode(out);
    }

    fn decode(parts: &mut std::str::Split<'_, char>) -> Result<Self, String> {
        Ok((A::decode(parts)?, B::decode(parts)?))
    }
}

/// Column labels in snapshots.
pub trait ColumnCodec: Column {
    fn encode_column(column: usize) -> String;
    fn decode_column(text: &str) -> Option<usize>;
}

impl ColumnCodec for Action {
    fn encode_column(column: usize) -> String {
        Action::ALL[column].name().to_string()
    }

    fn decode_column(text: &str) -> Option<usize> {
        Action::from_name(text).map(|a| a as usize)
    }
}

impl ColumnCodec for Subtask {
    fn encode_column(column: usize) -> String {
        column.to_string()
    }

    fn decode_column(text: &str) -> Option<usize> {
        text.parse().ok()
    }
}

/// Sparse map from `(prefix, column)` to value with default zero.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable<K: Hash + Eq> {
    width: usize,
    rows: FxHashMap<K, Box<[f64]>>,
}

impl<K: Hash + Eq + Clone> QTable<K> {
    /// A table whose rows have `width` columns.
    pub fn new(width: usize) -> Self {
        QTable {
            width,
            rows: FxHashMap::default(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of materialized rows.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn check_column(&self, column: usize) -> Result<(), QError> {
        if column < self.width {
            Ok(())
        } else {
            Err(QError::ArityMismatch {
                column,
                width: self.width,
            })
        }
    }

    /// The stored value, or `0.0`.
    pub fn q_get<C: Column>(&self, key: &K, candidate: C) -> Result<f64, QError> {
        let column = candidate.column();
        self.check_column(column)?;
        Ok(self.rows.get(key).map_or(0.0, |row| row[column]))
    }

    /// The row for `key`, if one was written.
    pub fn row(&self, key: &K) -> Option<&[f64]> {
        self.rows.get(key).map(|r| &r[..])
    }

    /// `value ← (1 − lr)·value + lr·target`.
    pub fn td_set<C: Column>(
        &mut self,
        key: &K,
        candidate: C,
        target: f64,
        lr: f64,
    ) -> Result<(), QError> {
        if !(lr > 0.0 && lr <= 1.0) {
            return Err(QError::LearningRate(lr));
        }
        let column = candidate.column();
        self.check_column(column)?;
        let width = self.width;
        if !self.rows.contains_key(key) {
            self.rows
                .insert(key.clone(), vec![0.0; width].into_boxed_slice());
        }
        let row = self.rows.get_mut(key).expect("row inserted above");
        row[column] = (1.0 - lr) * row[column] + lr * target;
        Ok(())
    }

    /// Largest value among `candidates` under `key`.
    pub fn max_over<C: Column>(&self, key: &K, candidates: &[C]) -> Result<f64, QError> {
        if candidates.is_empty() {
            return Err(QError::EmptyCandidates);
        }
        for c in candidates {
            self.check_column(c.column())?;
        }
        Ok(match self.rows.get(key) {
            None => 0.0,
            Some(row) => candidates
                .iter()
                .map(|c| row[c.column()])
                .fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// A maximizing candidate; ties are broken uniformly with `rng`, which is
    /// only consumed when more than one candidate attains the maximum.
    pub fn argmax_over<C: Column, R: Rng + ?Sized>(
        &self,
        key: &K,
        candidates: &[C],
        rng: &mut R,
    ) -> Result<C, QError> {
        if candidates.is_empty() {
            return Err(QError::EmptyCandidates);
        }
        for c in candidates {
            self.check_column(c.column())?;
        }
        let row = match self.rows.get(key) {
            None => {
                return Ok(pick(candidates, candidates.len(), rng, |_| true));
            }
            Some(row) => row,
        };
        let best = candidates
            .iter()
            .map(|c| row[c.column()])
            .fold(f64::NEG_INFINITY, f64::max);
        let ties = candidates
            .iter()
            .filter(|c| row[c.column()] == best)
            .count();
        Ok(pick(candidates, ties, rng, |c| row[c.column()] == best))
    }

    /// Iterates materialized rows in unspecified order.
    pub fn rows(&self) -> impl Iterator<Item = (&K, &[f64])> {
        self.rows.iter().map(|(k, r)| (k, &r[..]))
    }
}

fn pick<C: Copy, R: Rng + ?Sized>(
    candidates: &[C],
    ties: usize,
    rng: &mut R,
    is_max: impl Fn(&C) -> bool,
) -> C {
    let nth = if ties > 1 {
        rng.random_range(0..ties)
    } else {
        0
    };
    *candidates
        .iter()
        .filter(|c| is_max(c))
        .nth(nth)
        .expect("tie index within maximizer count")
}

impl<K: Hash + Eq + Clone + KeyCodec> QTable<K> {
    /// Sorted text records `key-parts<TAB>column<TAB>value`, one per stored
    /// cell. Values use shortest round-trip formatting.
    pub fn to_snapshot<C: ColumnCodec>(&self) -> String {
        let mut lines: Vec<String> = Vec::with_capacity(self.rows.len() * self.width);
        for (key, row) in &self.rows {
            let mut prefix = String::new();
            key.encode(&mut prefix);
            for (column, value) in row.iter().enumerate() {
                lines.push(format!("{prefix}\t{}\t{value}", C::encode_column(column)));
            }
        }
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    pub fn from_snapshot<C: ColumnCodec>(width: usize, text: &str) -> Result<Self, SnapshotError> {
        let mut table = QTable::new(width);
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let malformed = |message: String| SnapshotError::Malformed {
                line: i + 1,
                message,
            };
            let (head, value) = line
                .rsplit_once('\t')
                .ok_or_else(|| malformed("missing value".into()))?;
            let (key_text, column_text) = head
                .rsplit_once('\t')
                .ok_or_else(|| malformed("missing column".into()))?;
            let value: f64 = value
                .parse()
                .map_err(|_| malformed(format!("bad value {value:?}")))?;
            let column = C::decode_column(column_text)
                .filter(|&c| c < width)
                .ok_or_else(|| malformed(format!("bad column {column_text:?}")))?;
            let mut parts = key_text.split('\t');
            let key = K::decode(&mut parts).map_err(malformed)?;
            if parts.next().is_some() {
                return Err(malformed("too many key parts".into()));
            }
            let row = table
                .rows
                .entry(key)
                .or_insert_with(|| vec![0.0; width].into_boxed_slice());
            row[column] = value;
        }
        Ok(table)
    }
}
