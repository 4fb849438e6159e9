use std::collections::{BTreeMap, VecDeque};

use serde::Deserialize;
use thiserror::Error;

use super::{Action, GridPos};
use crate::subtask::{Subtask, Vocabulary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("task file: {0}")]
    Parse(String),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid row {row} has width {found}, expected {expected}")]
    RaggedGrid {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("grid has no start cell 'S'")]
    MissingStart,
    #[error("grid has more than one start cell")]
    MultipleStarts,
    #[error("start {0} is on a wall")]
    StartOnWall(GridPos),
    #[error("start {0} is on a label cell")]
    StartOnLabel(GridPos),
    #[error("unknown grid character {ch:?} at {pos}")]
    UnknownCell { ch: char, pos: GridPos },
    #[error("legend maps {ch:?} to unknown subtask {name:?}")]
    UnknownLegendSubtask { ch: char, name: String },
    #[error("legend key {0:?} must be a single printable character other than '#', '.', 'S'")]
    BadLegendKey(String),
    #[error("subtask {0:?} has no label cell")]
    MissingSubtask(String),
    #[error("unreachable label cell {pos} ({subtask:?})")]
    UnreachableLabelCell { pos: GridPos, subtask: String },
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error("reward rule: {0}")]
    RewardRule(String),
    #[error("step_cap must be positive")]
    ZeroStepCap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Floor,
    Label(Subtask),
}

/// Grid geometry: walls, start cell and label cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: GridPos,
}

impl Layout {
    /// Parses ASCII rows: `#` wall, `.` floor, `S` start, and any legend key
    /// for a label cell.
    pub fn from_ascii(
        rows: &[&str],
        legend: &BTreeMap<char, Subtask>,
    ) -> Result<Layout, LayoutError> {
        let rows: Vec<Vec<char>> = rows.iter().map(|r| r.chars().collect()).collect();
        let height = rows.len();
        if height == 0 || rows[0].is_empty() {
            return Err(LayoutError::EmptyGrid);
        }
        let width = rows[0].len();
        let mut cells = Vec::with_capacity(width * height);
        let mut start = None;
        for (y, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(LayoutError::RaggedGrid {
                    row: y,
                    expected: width,
                    found: row.len(),
                });
            }
            for (x, &ch) in row.iter().enumerate() {
                let pos = GridPos::new(x as u16, y as u16);
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Floor,
                    'S' => {
                        if start.replace(pos).is_some() {
                            return Err(LayoutError::MultipleStarts);
                        }
                        Cell::Floor
                    }
                    other => match legend.get(&other) {
                        Some(&p) => Cell::Label(p),
                        None => return Err(LayoutError::UnknownCell { ch: other, pos }),
                    },
                };
                cells.push(cell);
            }
        }
        let start = start.ok_or(LayoutError::MissingStart)?;
        Ok(Layout {
            width,
            height,
            cells,
            start,
        })
    }

    /// Replaces one cell, for building variant layouts in tests and tools.
    /// The result is not revalidated until it is used to build an environment.
    pub fn with_cell(mut self, pos: GridPos, cell: Cell) -> Layout {
        let i = self.index(pos);
        self.cells[i] = cell;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> GridPos {
        self.start
    }

    pub fn in_bounds(&self, pos: GridPos) -> bool {
        (pos.x as usize) < self.width && (pos.y as usize) < self.height
    }

    fn index(&self, pos: GridPos) -> usize {
        pos.y as usize * self.width + pos.x as usize
    }

    pub fn cell(&self, pos: GridPos) -> Cell {
        self.cells[self.index(pos)]
    }

    pub fn is_wall(&self, pos: GridPos) -> bool {
        self.cell(pos) == Cell::Wall
    }

    /// The subtask of a cell, ignoring per-episode deduplication.
    pub fn label_at(&self, pos: GridPos) -> Option<Subtask> {
        match self.cell(pos) {
            Cell::Label(p) => Some(p),
            _ => None,
        }
    }

    /// Every non-wall cell, row-major.
    pub fn open_cells(&self) -> Vec<GridPos> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| GridPos::new(x as u16, y as u16)))
            .filter(|&p| !self.is_wall(p))
            .collect()
    }

    /// Cells carrying subtask `p`, row-major.
    pub fn cells_of(&self, p: Subtask) -> Vec<GridPos> {
        self.open_cells()
            .into_iter()
            .filter(|&c| self.label_at(c) == Some(p))
            .collect()
    }

    /// The cell reached by taking `action` from `pos`.
    pub fn move_from(&self, pos: GridPos, action: Action) -> GridPos {
        let (dx, dy) = action.delta();
        let nx = pos.x as i32 + dx;
        let ny = pos.y as i32 + dy;
        if nx < 0 || ny < 0 {
            return pos;
        }
        let next = GridPos::new(nx as u16, ny as u16);
        if self.in_bounds(next) && !self.is_wall(next) {
            next
        } else {
            pos
        }
    }

    /// Breadth-first step distances from `from` over the movement graph;
    /// `None` for walls and unreachable cells.
    pub fn distances_from(&self, from: GridPos) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.cells.len()];
        if !self.in_bounds(from) || self.is_wall(from) {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[self.index(from)] = Some(0);
        queue.push_back(from);
        while let Some(pos) = queue.pop_front() {
            let d = dist[self.index(pos)].unwrap();
            for a in Action::ALL {
                let next = self.move_from(pos, a);
                let i = self.index(next);
                if dist[i].is_none() {
                    dist[i] = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }

    pub fn distance(&self, from: GridPos, to: GridPos) -> Option<usize> {
        self.distances_from(from)[self.index(to)]
    }

    /// One shortest action sequence from `from` to `to`.
    pub fn shortest_path(&self, from: GridPos, to: GridPos) -> Option<Vec<Action>> {
        let to_target = self.distances_from(to);
        let mut remaining = to_target[self.index(from)]?;
        let mut pos = from;
        let mut path = Vec::with_capacity(remaining);
        while remaining > 0 {
            let (a, next) = Action::ALL
                .into_iter()
                .map(|a| (a, self.move_from(pos, a)))
                .find(|&(_, n)| to_target[self.index(n)] == Some(remaining - 1))?;
            path.push(a);
            pos = next;
            remaining -= 1;
        }
        Some(path)
    }

    /// Renders the layout back to ASCII rows given a legend.
    pub fn to_ascii(&self, legend: &BTreeMap<char, Subtask>) -> Vec<String> {
        let inverse: BTreeMap<Subtask, char> = legend.iter().map(|(&c, &p)| (p, c)).collect();
        (0..self.height)
            .map(|y| {
                (0..self.width)
                    .map(|x| {
                        let pos = GridPos::new(x as u16, y as u16);
                        if pos == self.start {
                            return 'S';
                        }
                        match self.cell(pos) {
                            Cell::Wall => '#',
                            Cell::Floor => '.',
                            Cell::Label(p) => inverse.get(&p).copied().unwrap_or('?'),
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// How the environment turns subtask events into reward and termination.
///
/// Rules see the subtask of every cell entered, before label deduplication,
/// and keep their own progress set.
#[derive(Clone, Debug, PartialEq)]
pub enum RewardRule {
    /// A subtask counts once all of its prerequisites have counted; the task
    /// completes, paying `reward`, when `goal` counts.
    Precedence {
        goal: Subtask,
        requires: Vec<u64>,
        reward: f64,
    },
    /// Items count on first entry; reaching `goal` ends the episode and pays
    /// `per_item` for each counted item plus `completion_bonus` if all counted.
    Tally {
        goal: Subtask,
        items: u64,
        per_item: f64,
        completion_bonus: f64,
    },
}

impl RewardRule {
    /// Applies entering a cell of subtask `p`, returning `(reward, completed)`.
    pub fn advance(&self, progress: &mut u64, p: Subtask) -> (f64, bool) {
        let bit = 1u64 << p.0;
        match self {
            RewardRule::Precedence {
                goal,
                requires,
                reward,
            } => {
                if *progress & bit != 0 {
                    return (0.0, false);
                }
                let needed = requires[p.index()];
                if *progress & needed != needed {
                    return (0.0, false);
                }
                *progress |= bit;
                if p == *goal {
                    (*reward, true)
                } else {
                    (0.0, false)
                }
            }
            RewardRule::Tally {
                goal,
                items,
                per_item,
                completion_bonus,
            } => {
                if items & bit != 0 {
                    *progress |= bit;
                }
                if p != *goal {
                    return (0.0, false);
                }
                let collected = *progress & items;
                let mut reward = per_item * collected.count_ones() as f64;
                if collected == *items {
                    reward += completion_bonus;
                }
                (reward, true)
            }
        }
    }

    /// Largest return one episode can earn.
    pub fn max_return(&self) -> f64 {
        match self {
            RewardRule::Precedence { reward, .. } => *reward,
            RewardRule::Tally {
                items,
                per_item,
                completion_bonus,
                ..
            } => per_item * items.count_ones() as f64 + completion_bonus,
        }
    }
}

/// A complete task: vocabulary, layout, reward rule and episode step cap.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    name: String,
    domain: String,
    vocabulary: Vocabulary,
    legend: BTreeMap<char, Subtask>,
    layout: Layout,
    reward_rule: RewardRule,
    step_cap: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    name: String,
    #[serde(default)]
    domain: String,
    step_cap: usize,
    vocabulary: Vec<String>,
    grid: String,
    legend: BTreeMap<String, String>,
    reward: RewardFile,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RewardFile {
    Precedence {
        goal: String,
        #[serde(default)]
        requires: BTreeMap<String, Vec<String>>,
        #[serde(default = "one")]
        reward: f64,
    },
    Tally {
        goal: String,
        items: Vec<String>,
        #[serde(default = "one")]
        per_item: f64,
        #[serde(default)]
        completion_bonus: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl TaskSpec {
    /// Parses and validates a task file.
    pub fn from_toml_str(text: &str) -> Result<TaskSpec, LayoutError> {
        let file: TaskFile =
            toml::from_str(text).map_err(|e| LayoutError::Parse(e.message().to_string()))?;
        let vocabulary = Vocabulary::new(file.vocabulary).map_err(LayoutError::Vocabulary)?;

        let mut legend = BTreeMap::new();
        for (key, name) in &file.legend {
            let mut chars = key.chars();
            let ch = match (chars.next(), chars.next()) {
                (Some(ch), None) if !matches!(ch, '#' | '.' | 'S') && !ch.is_whitespace() => ch,
                _ => return Err(LayoutError::BadLegendKey(key.clone())),
            };
            let p = vocabulary
                .lookup(name)
                .ok_or_else(|| LayoutError::UnknownLegendSubtask {
                    ch,
                    name: name.clone(),
                })?;
            legend.insert(ch, p);
        }

        let rows: Vec<&str> = file
            .grid
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let layout = Layout::from_ascii(&rows, &legend)?;

        let lookup = |name: &str| {
            vocabulary
                .lookup(name)
                .ok_or_else(|| LayoutError::RewardRule(format!("unknown subtask {name:?}")))
        };
        let reward_rule = match file.reward {
            RewardFile::Precedence {
                goal,
                requires,
                reward,
            } => {
                let mut masks = vec![0u64; vocabulary.len()];
                for (target, prereqs) in &requires {
                    let t = lookup(target)?;
                    for pre in prereqs {
                        masks[t.index()] |= 1 << lookup(pre)?.0;
                    }
                }
                RewardRule::Precedence {
                    goal: lookup(&goal)?,
                    requires: masks,
                    reward,
                }
            }
            RewardFile::Tally {
                goal,
                items,
                per_item,
                completion_bonus,
            } => {
                let mut mask = 0u64;
                for item in &items {
                    mask |= 1 << lookup(item)?.0;
                }
                RewardRule::Tally {
                    goal: lookup(&goal)?,
                    items: mask,
                    per_item,
                    completion_bonus,
                }
            }
        };

        let spec = TaskSpec {
            name: file.name,
            domain: file.domain,
            vocabulary,
            legend,
            layout,
            reward_rule,
            step_cap: file.step_cap,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Assembles a task from parts; the result is validated.
    pub fn new(
        name: impl Into<String>,
        vocabulary: Vocabulary,
        legend: BTreeMap<char, Subtask>,
        layout: Layout,
        reward_rule: RewardRule,
        step_cap: usize,
    ) -> Result<TaskSpec, LayoutError> {
        let spec = TaskSpec {
            name: name.into(),
            domain: String::new(),
            vocabulary,
            legend,
            layout,
            reward_rule,
            step_cap,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the layout invariants: start on open unlabeled floor, every
    /// subtask present, every label cell reachable from start.
    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.step_cap == 0 {
            return Err(LayoutError::ZeroStepCap);
        }
        let layout = &self.layout;
        let start = layout.start();
        match layout.cell(start) {
            Cell::Wall => return Err(LayoutError::StartOnWall(start)),
            Cell::Label(_) => return Err(LayoutError::StartOnLabel(start)),
            Cell::Floor => {}
        }
        for p in self.vocabulary.subtasks() {
            if layout.cells_of(p).is_empty() {
                return Err(LayoutError::MissingSubtask(
                    self.vocabulary.name(p).to_string(),
                ));
            }
        }
        let dist = layout.distances_from(start);
        for pos in layout.open_cells() {
            if let Some(p) = layout.label_at(pos) {
                if dist[layout.index(pos)].is_none() {
                    return Err(LayoutError::UnreachableLabelCell {
                        pos,
                        subtask: self.vocabulary.name(p).to_string(),
                    });
                }
            }
        }
        if let RewardRule::Precedence { requires, .. } = &self.reward_rule {
            if requires.len() != self.vocabulary.len() {
                return Err(LayoutError::RewardRule(
                    "prerequisite table does not match the vocabulary".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn legend(&self) -> &BTreeMap<char, Subtask> {
        &self.legend
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn reward_rule(&self) -> &RewardRule {
        &self.reward_rule
    }

    pub fn step_cap(&self) -> usize {
        self.step_cap
    }

    pub fn with_step_cap(mut self, step_cap: usize) -> TaskSpec {
        self.step_cap = step_cap;
        self
    }

    /// Swaps the layout; call [`TaskSpec::validate`] (or build an
    /// environment) to check the result.
    pub fn with_layout(mut self, layout: Layout) -> TaskSpec {
        self.layout = layout;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
name = "Tiny"
step_cap = 10
vocabulary = ["g"]
grid = """
#####
#S.g#
#####
"""
[legend]
g = "g"
[reward]
kind = "precedence"
goal = "g"
"#;

    #[test]
    fn parses_minimal_task() {
        let spec = TaskSpec::from_toml_str(TINY).unwrap();
        assert_eq!(spec.layout().width(), 5);
        assert_eq!(spec.layout().start(), GridPos::new(1, 1));
        assert_eq!(spec.layout().label_at(GridPos::new(3, 1)), Some(Subtask(0)));
        assert_eq!(spec.reward_rule().max_return(), 1.0);
        let rows = spec.layout().to_ascii(spec.legend());
        assert_eq!(rows[1], "#S.g#");
    }

    #[test]
    fn rejects_unreachable_label() {
        let text = TINY.replace("#S.g#", "#S#g#");
        let err = TaskSpec::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("unreachable label cell"), "{err}");
    }

    #[test]
    fn rejects_missing_start_and_unknown_chars() {
        let err = TaskSpec::from_toml_str(&TINY.replace("#S.g#", "#..g#")).unwrap_err();
        assert_eq!(err, LayoutError::MissingStart);
        let err = TaskSpec::from_toml_str(&TINY.replace("#S.g#", "#Sxg#")).unwrap_err();
        assert!(matches!(err, LayoutError::UnknownCell { ch: 'x', .. }));
    }

    #[test]
    fn rejects_start_on_wall_via_variant() {
        let spec = TaskSpec::from_toml_str(TINY).unwrap();
        let start = spec.layout().start();
        let layout = spec.layout().clone().with_cell(start, Cell::Wall);
        let err = spec.with_layout(layout).validate().unwrap_err();
        assert_eq!(err, LayoutError::StartOnWall(start));
    }

    #[test]
    fn precedence_requires_prerequisites() {
        let rule = RewardRule::Precedence {
            goal: Subtask(1),
            requires: vec![0, 0b01],
            reward: 1.0,
        };
        let mut progress = 0;
        assert_eq!(rule.advance(&mut progress, Subtask(1)), (0.0, false));
        assert_eq!(rule.advance(&mut progress, Subtask(0)), (0.0, false));
        assert_eq!(rule.advance(&mut progress, Subtask(1)), (1.0, true));
    }

    #[test]
    fn shortest_path_matches_distance() {
        let spec = TaskSpec::from_toml_str(TINY).unwrap();
        let layout = spec.layout();
        let path = layout
            .shortest_path(layout.start(), GridPos::new(3, 1))
            .unwrap();
        assert_eq!(path, vec![Action::Right, Action::Right]);
        assert_eq!(layout.distance(layout.start(), GridPos::new(3, 1)), Some(2));
    }
}
