//! Record tree of achieved-subtask sequences and the explanations built on it.
//!
//! Each node is a sequence achieved in some training episode; the edge into
//! a node carries the largest environment reward observed on the step that
//! achieved its last subtask. An explanation pairs the history (the current
//! node), the subtask the high level would pick now, and the shortest
//! recorded continuation after that subtask which ended in reward.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::agent::Agent;
use crate::env::GridPos;
use crate::subtask::{Subtask, SubtaskSeq, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeStats {
    /// Largest reward observed when the edge was taken; `-inf` if the edge
    /// only exists as an ancestor of a recorded sequence.
    pub max_reward: f64,
    pub count: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Node {
    pub visit_count: u64,
    pub children: BTreeMap<Subtask, EdgeStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordTree {
    nodes: FxHashMap<SubtaskSeq, Node>,
}

impl Default for RecordTree {
    fn default() -> Self {
        RecordTree::new()
    }
}

impl RecordTree {
    /// A tree holding only the root `∅`.
    pub fn new() -> Self {
        let mut nodes = FxHashMap::default();
        nodes.insert(SubtaskSeq::empty(), Node::default());
        RecordTree { nodes }
    }

    /// Number of nodes, root included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn depth(&self) -> usize {
        self.nodes.keys().map(SubtaskSeq::len).max().unwrap_or(0)
    }

    /// Records that `p_act` was achieved with `seq_before` already achieved,
    /// with environment reward `r` on that step.
    pub fn record_achievement(&mut self, seq_before: &SubtaskSeq, p_act: Subtask, r: f64) {
        if !self.nodes.contains_key(seq_before) {
            self.ensure_path(seq_before);
        }
        let parent = self.nodes.get_mut(seq_before).expect("parent ensured");
        let edge = parent.children.entry(p_act).or_insert(EdgeStats {
            max_reward: f64::NEG_INFINITY,
            count: 0,
        });
        edge.max_reward = edge.max_reward.max(r);
        edge.count += 1;
        self.nodes
            .entry(seq_before.extended(p_act))
            .or_default()
            .visit_count += 1;
    }

    fn ensure_path(&mut self, seq: &SubtaskSeq) {
        let Some(parent) = seq.parent() else {
            return;
        };
        if !self.nodes.contains_key(&parent) {
            self.ensure_path(&parent);
        }
        let last = seq.last().expect("non-empty");
        self.nodes
            .get_mut(&parent)
            .expect("parent ensured")
            .children
            .entry(last)
            .or_insert(EdgeStats {
                max_reward: f64::NEG_INFINITY,
                count: 0,
            });
        self.nodes.entry(seq.clone()).or_default();
    }

    /// The node for `seq`, if that sequence has been recorded.
    pub fn current_node(&self, seq: &SubtaskSeq) -> Option<&Node> {
        self.nodes.get(seq)
    }

    pub fn edge(&self, parent: &SubtaskSeq, child: Subtask) -> Option<&EdgeStats> {
        self.nodes.get(parent)?.children.get(&child)
    }

    /// Shortest recorded continuation after choosing `p_next` at `seq` that
    /// ends on a rewarded edge.
    ///
    /// Returns the subtasks strictly after `p_next` (empty when achieving
    /// `p_next` itself was rewarded), `None` when `seq ⊕ p_next` was never
    /// recorded or no rewarded descendant lies within `max_depth` further
    /// subtasks. Children are expanded in vocabulary order.
    pub fn plan_bfs(
        &self,
        seq: &SubtaskSeq,
        p_next: Subtask,
        max_depth: usize,
    ) -> Option<Vec<Subtask>> {
        let first = self.edge(seq, p_next)?;
        if first.max_reward > 0.0 {
            return Some(Vec::new());
        }
        let mut queue = VecDeque::new();
        queue.push_back((seq.extended(p_next), Vec::new()));
        while let Some((node_seq, path)) = queue.pop_front() {
            if path.len() >= max_depth {
                continue;
            }
            let Some(node) = self.nodes.get(&node_seq) else {
                continue;
            };
            for (&child, stats) in &node.children {
                let mut child_path: Vec<Subtask> = path.clone();
                child_path.push(child);
                if stats.max_reward > 0.0 {
                    return Some(child_path);
                }
                queue.push_back((node_seq.extended(child), child_path));
            }
        }
        None
    }

    /// Indented text form: one line per non-root node,
    /// `parent -> child [r=<max>, n=<count>]`, depth-first in vocabulary order.
    pub fn to_text(&self, vocabulary: &Vocabulary) -> String {
        let mut out = String::new();
        self.write_subtree(&SubtaskSeq::empty(), vocabulary, &mut out);
        out
    }

    fn write_subtree(&self, seq: &SubtaskSeq, vocabulary: &Vocabulary, out: &mut String) {
        let Some(node) = self.nodes.get(seq) else {
            return;
        };
        for (&child, stats) in &node.children {
            let _ = writeln!(
                out,
                "{:indent$}{} -> {} [r={}, n={}]",
                "",
                vocabulary.display_seq(seq),
                vocabulary.name(child),
                stats.max_reward,
                stats.count,
                indent = 2 * seq.len()
            );
            self.write_subtree(&seq.extended(child), vocabulary, out);
        }
    }

    pub fn from_text(text: &str, vocabulary: &Vocabulary) -> Result<RecordTree, TreeParseError> {
        let mut tree = RecordTree::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| TreeParseError {
                line: i + 1,
                message,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (parent, rest) = line
                .split_once(" -> ")
                .ok_or_else(|| err("missing '->'".into()))?;
            let (child, stats) = rest
                .split_once(" [")
                .ok_or_else(|| err("missing edge statistics".into()))?;
            let stats = stats
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated edge statistics".into()))?;
            let (r, n) = stats
                .split_once(", ")
                .ok_or_else(|| err("bad edge statistics".into()))?;
            let r: f64 = r
                .strip_prefix("r=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(format!("bad reward {r:?}")))?;
            let n: u64 = n
                .strip_prefix("n=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(format!("bad count {n:?}")))?;
            let parent = vocabulary.parse_seq(parent).map_err(err)?;
            let child = vocabulary
                .lookup(child)
                .ok_or_else(|| err(format!("unknown subtask {child:?}")))?;
            if !tree.nodes.contains_key(&parent) {
                return Err(err("parent appears before being recorded".into()));
            }
            tree.nodes.get_mut(&parent).unwrap().children.insert(
                child,
                EdgeStats {
                    max_reward: r,
                    count: n,
                },
            );
            tree.nodes
                .entry(parent.extended(child))
                .or_default()
                .visit_count = n;
        }
        Ok(tree)
    }
}

#[derive(Debug, Error)]
#[error("record tree line {line}: {message}")]
pub struct TreeParseError {
    pub line: usize,
    pub message: String,
}

/// What has happened, what the agent pursues now, and what it expects next.
#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub history: SubtaskSeq,
    pub current: Subtask,
    pub plan: Option<Vec<Subtask>>,
}

impl Explanation {
    pub fn render(&self, vocabulary: &Vocabulary) -> String {
        let plan = match &self.plan {
            None => "none".to_string(),
            Some(p) if p.is_empty() => "(reward on current subtask)".to_string(),
            Some(p) => p
                .iter()
                .map(|&q| vocabulary.name(q))
                .collect::<Vec<_>>()
                .join(", "),
        };
        format!(
            "history: {}\ncurrent: {}\nplan: {}\n",
            vocabulary.display_seq(&self.history),
            vocabulary.name(self.current),
            plan
        )
    }
}

/// Builds the three-part explanation for state `s` with `seq` achieved.
/// Reads the tree and tables only.
pub fn explain<R: Rng + ?Sized>(
    tree: &RecordTree,
    agent: &Agent,
    s: GridPos,
    seq: &SubtaskSeq,
    rng: &mut R,
    max_depth: usize,
) -> Explanation {
    let current = agent.choose_subtask(s, seq, None, rng);
    Explanation {
        history: seq.clone(),
        current,
        plan: tree.plan_bfs(seq, current, max_depth),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::new(["c", "m", "o"]).unwrap()
    }

    fn s(v: &Vocabulary, text: &str) -> SubtaskSeq {
        v.parse_seq(text).unwrap()
    }

    /// Two rewarded routes, `c,m,o` and `m,c,o`, plus unrewarded detours.
    pub(crate) fn two_route_tree(v: &Vocabulary) -> RecordTree {
        let (c, m, o) = (Subtask(0), Subtask(1), Subtask(2));
        let mut tree = RecordTree::new();
        for (before, p, r) in [
            ("", c, 0.0),
            ("c", m, 0.0),
            ("c,m", o, 1.0),
            ("c", o, 0.0),
            ("", m, 0.0),
            ("m", c, 0.0),
            ("m,c", o, 1.0),
            ("", o, 0.0),
            ("o", c, 0.0),
        ] {
            tree.record_achievement(&s(v, before), p, r);
        }
        tree
    }

    #[test]
    fn record_creates_nodes_and_max_merges() {
        let v = vocab();
        let mut tree = RecordTree::new();
        assert!(tree.current_node(&SubtaskSeq::empty()).is_some());
        tree.record_achievement(&SubtaskSeq::empty(), Subtask(0), 0.0);
        assert_eq!(tree.len(), 2);
        assert_eq!(
            tree.edge(&SubtaskSeq::empty(), Subtask(0))
                .unwrap()
                .max_reward,
            0.0
        );

        tree.record_achievement(&s(&v, "c"), Subtask(1), 0.0);
        tree.record_achievement(&s(&v, "c,m"), Subtask(2), 1.0);
        assert_eq!(
            tree.edge(&s(&v, "c,m"), Subtask(2)).unwrap().max_reward,
            1.0
        );
        tree.record_achievement(&s(&v, "c,m"), Subtask(2), 0.0);
        let edge = tree.edge(&s(&v, "c,m"), Subtask(2)).unwrap();
        assert_eq!((edge.max_reward, edge.count), (1.0, 2));
        assert!(tree.current_node(&s(&v, "c,m")).is_some());
        assert!(tree.current_node(&s(&v, "m")).is_none());
    }

    #[test]
    fn plan_after_coffee_is_mail_then_office() {
        let v = vocab();
        let tree = two_route_tree(&v);
        let plan = tree.plan_bfs(&SubtaskSeq::empty(), Subtask(0), 16).unwrap();
        assert_eq!(plan, vec![Subtask(1), Subtask(2)]);
        let plan = tree.plan_bfs(&SubtaskSeq::empty(), Subtask(1), 16).unwrap();
        assert_eq!(plan, vec![Subtask(0), Subtask(2)]);
        assert_eq!(tree.plan_bfs(&s(&v, "c,m"), Subtask(2), 16), Some(vec![]));
    }

    #[test]
    fn plan_absent_or_beyond_depth() {
        let v = vocab();
        let tree = two_route_tree(&v);
        assert_eq!(tree.plan_bfs(&s(&v, "c,m,o"), Subtask(0), 16), None);
        // `o` then `c` never pays.
        assert_eq!(tree.plan_bfs(&SubtaskSeq::empty(), Subtask(2), 16), None);
        assert_eq!(tree.plan_bfs(&SubtaskSeq::empty(), Subtask(0), 1), None);
        assert_eq!(
            tree.plan_bfs(&SubtaskSeq::empty(), Subtask(0), 2),
            Some(vec![Subtask(1), Subtask(2)])
        );
    }

    #[test]
    fn equal_depth_tie_goes_to_vocabulary_order() {
        let v = vocab();
        let mut tree = RecordTree::new();
        // Under `c` both `o` and `m` pay at depth one; `m` comes first.
        tree.record_achievement(&SubtaskSeq::empty(), Subtask(0), 0.0);
        tree.record_achievement(&s(&v, "c"), Subtask(2), 1.0);
        tree.record_achievement(&s(&v, "c"), Subtask(1), 1.0);
        assert_eq!(
            tree.plan_bfs(&SubtaskSeq::empty(), Subtask(0), 8),
            Some(vec![Subtask(1)])
        );
    }

    #[test]
    fn bfs_prefers_shallow_over_earlier_branch() {
        let v = vocab();
        let mut tree = RecordTree::new();
        tree.record_achievement(&SubtaskSeq::empty(), Subtask(0), 0.0);
        tree.record_achievement(&s(&v, "c"), Subtask(0), 0.0);
        tree.record_achievement(&s(&v, "c,c"), Subtask(2), 1.0);
        tree.record_achievement(&s(&v, "c"), Subtask(2), 1.0);
        assert_eq!(
            tree.plan_bfs(&SubtaskSeq::empty(), Subtask(0), 8),
            Some(vec![Subtask(2)])
        );
    }

    #[test]
    fn text_round_trip() {
        let v = vocab();
        let tree = two_route_tree(&v);
        let text = tree.to_text(&v);
        assert!(
            text.starts_with("∅ -> c [r=0, n=1]\n  c -> m [r=0, n=1]\n    c,m -> o [r=1, n=1]\n"),
            "{text}"
        );
        let back = RecordTree::from_text(&text, &v).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.to_text(&v), text);
    }

    #[test]
    fn missing_ancestors_are_created() {
        let v = vocab();
        let mut tree = RecordTree::new();
        tree.record_achievement(&s(&v, "c,m"), Subtask(2), 1.0);
        assert!(tree.current_node(&s(&v, "c")).is_some());
        assert_eq!(
            tree.edge(&SubtaskSeq::empty(), Subtask(0)).unwrap().count,
            0
        );
        let text = tree.to_text(&v);
        assert_eq!(RecordTree::from_text(&text, &v).unwrap(), tree);
    }
}
