//! Subtask symbols, vocabularies and achieved-subtask sequences.

use std::fmt;
use std::sync::Arc;

/// A vocabulary element, stored as its index in the owning [`Vocabulary`].
///
/// Indices follow construction order, which is the iteration order used
/// everywhere an order matters (experience generation, BFS expansion,
/// tie-break candidate lists).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subtask(pub u8);

impl Subtask {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Maximum vocabulary size. Achievement sets are kept as `u64` bitmasks.
pub const MAX_VOCABULARY: usize = 64;

/// The finite, ordered set of subtask names for one task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary, rejecting duplicates, empty names and names that
    /// would break the text formats (whitespace, commas, tabs).
    pub fn new<I, S>(names: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err("vocabulary is empty".into());
        }
        if names.len() > MAX_VOCABULARY {
            return Err(format!("vocabulary has more than {MAX_VOCABULARY} symbols"));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty()
                || name
                    .chars()
                    .any(|c| c.is_whitespace() || c == ',' || c == '[' || c == ']')
                || name == "∅"
            {
                return Err(format!("invalid subtask name {name:?}"));
            }
            if names[..i].contains(name) {
                return Err(format!("duplicate subtask name {name:?}"));
            }
        }
        Ok(Vocabulary { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// All subtasks in construction order.
    pub fn subtasks(&self) -> Vec<Subtask> {
        (0..self.names.len()).map(|i| Subtask(i as u8)).collect()
    }

    pub fn name(&self, p: Subtask) -> &str {
        &self.names[p.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lookup(&self, name: &str) -> Option<Subtask> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| Subtask(i as u8))
    }

    /// Parses a comma-separated sequence of names. The empty string, `∅`
    /// and `[]` all denote the empty sequence.
    pub fn parse_seq(&self, text: &str) -> Result<SubtaskSeq, String> {
        let text = text.trim();
        let text = text
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .unwrap_or(text);
        if text.is_empty() || text == "∅" {
            return Ok(SubtaskSeq::empty());
        }
        let mut items = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            items.push(
                self.lookup(part)
                    .ok_or_else(|| format!("unknown subtask {part:?}"))?,
            );
        }
        Ok(SubtaskSeq::from(items))
    }

    /// Renders a sequence with symbol names, `∅` when empty.
    pub fn display_seq(&self, seq: &SubtaskSeq) -> String {
        if seq.is_empty() {
            return "∅".to_string();
        }
        seq.iter()
            .map(|p| self.name(p))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// An ordered sequence of achieved subtasks.
///
/// Cloning is a reference-count bump; [`SubtaskSeq::extended`] allocates a
/// new sequence and leaves the receiver untouched.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubtaskSeq(Arc<[Subtask]>);

impl SubtaskSeq {
    pub fn empty() -> Self {
        SubtaskSeq(Arc::from(Vec::new()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Subtask] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Subtask> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, p: Subtask) -> bool {
        self.0.contains(&p)
    }

    pub fn last(&self) -> Option<Subtask> {
        self.0.last().copied()
    }

    /// `self ⊕ p`.
    pub fn extended(&self, p: Subtask) -> Self {
        let mut items = Vec::with_capacity(self.0.len() + 1);
        items.extend_from_slice(&self.0);
        items.push(p);
        SubtaskSeq(Arc::from(items))
    }

    /// The sequence without its last element; `None` for the empty sequence.
    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(SubtaskSeq(Arc::from(&self.0[..self.0.len() - 1])))
        }
    }
}

impl Default for SubtaskSeq {
    fn default() -> Self {
        SubtaskSeq::empty()
    }
}

impl From<Vec<Subtask>> for SubtaskSeq {
    fn from(items: Vec<Subtask>) -> Self {
        SubtaskSeq(Arc::from(items))
    }
}

impl From<&[Subtask]> for SubtaskSeq {
    fn from(items: &[Subtask]) -> Self {
        SubtaskSeq(Arc::from(items))
    }
}

impl fmt::Debug for SubtaskSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter().map(|p| p.0)).finish()
    }
}
