use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bundled default map, version 1.
pub const DEFAULT_LAYOUT: &str = include_str!("../../layouts/four_room.toml");

/// Objects are tracked in a `u64` bit set.
pub const MAX_OBJECTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Inclusive rectangle `[row0, col0, row1, col1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub top_left: Cell,
    pub bottom_right: Cell,
}

impl Region {
    pub fn contains(&self, cell: Cell) -> bool {
        (self.top_left.row..=self.bottom_right.row).contains(&cell.row)
            && (self.top_left.col..=self.bottom_right.col).contains(&cell.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridObject {
    pub cell: Cell,
    pub class: usize,
    pub unsafe_object: bool,
}

/// Plain description of a map, validated by [`GridLayout::new`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutParts {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<Cell>,
    pub start: Cell,
    pub goal: Cell,
    /// `(cell, class)` pairs.
    pub objects: Vec<(Cell, usize)>,
    pub traps: Vec<Cell>,
    pub n_classes: usize,
    pub trap_activation_prob: f64,
    pub object_reward_prob: f64,
    pub unsafe_regions: Vec<Region>,
}

/// Layout file schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutDocument {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub grid: Vec<String>,
    pub object_classes: usize,
    #[serde(default = "one")]
    pub trap_activation_prob: f64,
    #[serde(default = "one")]
    pub object_reward_prob: f64,
    #[serde(default)]
    pub unsafe_regions: Vec<[usize; 4]>,
}

fn one() -> f64 {
    1.0
}

/// A validated Four-Room style map.
#[derive(Clone, Debug, PartialEq)]
pub struct GridLayout {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    traps: Vec<bool>,
    object_at: Vec<Option<usize>>,
    start: Cell,
    goal: Cell,
    objects: Vec<GridObject>,
    n_classes: usize,
    trap_activation_prob: f64,
    object_reward_prob: f64,
    unsafe_regions: Vec<Region>,
}

impl GridLayout {
    pub fn new(parts: LayoutParts) -> Result<Self> {
        let LayoutParts {
            width,
            height,
            walls: wall_cells,
            start,
            goal,
            objects: object_cells,
            traps: trap_cells,
            n_classes,
            trap_activation_prob,
            object_reward_prob,
            unsafe_regions,
        } = parts;
        if width == 0 || height == 0 {
            return Err(Error::LayoutDocument("grid must be non-empty".into()));
        }
        if n_classes == 0 {
            return Err(Error::LayoutDocument("object_classes must be >= 1".into()));
        }
        for (name, p) in [
            ("trap_activation_prob", trap_activation_prob),
            ("object_reward_prob", object_reward_prob),
        ] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::LayoutDocument(format!("{name} = {p} not in (0, 1]")));
            }
        }
        let n = width * height;
        let index = |cell: Cell, what: &str| -> Result<usize> {
            if cell.row >= height || cell.col >= width {
                return Err(Error::Layout {
                    row: cell.row,
                    col: cell.col,
                    reason: format!("{what} outside the {height}x{width} grid"),
                });
            }
            Ok(cell.row * width + cell.col)
        };
        let mut walls = vec![false; n];
        for &c in &wall_cells {
            walls[index(c, "wall")?] = true;
        }
        let on_floor = |cell: Cell, what: &str| -> Result<usize> {
            let i = index(cell, what)?;
            if walls[i] {
                return Err(Error::Layout {
                    row: cell.row,
                    col: cell.col,
                    reason: format!("{what} placed on a wall cell"),
                });
            }
            Ok(i)
        };
        on_floor(start, "start")?;
        on_floor(goal, "goal")?;
        let mut traps = vec![false; n];
        for &c in &trap_cells {
            traps[on_floor(c, "trap")?] = true;
        }
        if object_cells.len() > MAX_OBJECTS {
            return Err(Error::LayoutDocument(format!(
                "{} objects exceed the supported maximum of {MAX_OBJECTS}",
                object_cells.len()
            )));
        }
        for r in &unsafe_regions {
            index(r.top_left, "unsafe region corner")?;
            index(r.bottom_right, "unsafe region corner")?;
            if r.top_left.row > r.bottom_right.row || r.top_left.col > r.bottom_right.col {
                return Err(Error::LayoutDocument(format!(
                    "unsafe region {} .. {} is inverted",
                    r.top_left, r.bottom_right
                )));
            }
        }
        let mut object_at = vec![None; n];
        let mut objects = Vec::with_capacity(object_cells.len());
        for (k, &(cell, class)) in object_cells.iter().enumerate() {
            let i = on_floor(cell, "object")?;
            if class >= n_classes {
                return Err(Error::Layout {
                    row: cell.row,
                    col: cell.col,
                    reason: format!("object class {class} >= object_classes {n_classes}"),
                });
            }
            if object_at[i].is_some() {
                return Err(Error::Layout {
                    row: cell.row,
                    col: cell.col,
                    reason: "two objects on one cell".into(),
                });
            }
            object_at[i] = Some(k);
            let unsafe_object = traps[i] || unsafe_regions.iter().any(|r| r.contains(cell));
            objects.push(GridObject {
                cell,
                class,
                unsafe_object,
            });
        }
        Ok(Self {
            width,
            height,
            walls,
            traps,
            object_at,
            start,
            goal,
            objects,
            n_classes,
            trap_activation_prob,
            object_reward_prob,
            unsafe_regions,
        })
    }

    /// The bundled 13x13 map.
    pub fn default_four_room() -> Self {
        Self::parse(DEFAULT_LAYOUT).expect("bundled layout is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: LayoutDocument =
            toml::from_str(text).map_err(|e| Error::LayoutDocument(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn from_document(doc: &LayoutDocument) -> Result<Self> {
        if doc.version != 1 {
            return Err(Error::LayoutDocument(format!(
                "unsupported layout version {}",
                doc.version
            )));
        }
        let height = doc.grid.len();
        let width = doc.grid.first().map_or(0, |r| r.chars().count());
        let mut walls = Vec::new();
        let mut traps = Vec::new();
        let mut objects = Vec::new();
        let mut start = None;
        let mut goal = None;
        for (row, line) in doc.grid.iter().enumerate() {
            if line.chars().count() != width {
                return Err(Error::Layout {
                    row,
                    col: line.chars().count().min(width),
                    reason: format!("row has {} cells, expected {width}", line.chars().count()),
                });
            }
            for (col, ch) in line.chars().enumerate() {
                let cell = Cell::new(row, col);
                match ch {
                    '#' => walls.push(cell),
                    '.' => {}
                    'T' => traps.push(cell),
                    'S' | 'G' => {
                        let slot = if ch == 'S' { &mut start } else { &mut goal };
                        if slot.replace(cell).is_some() {
                            return Err(Error::Layout {
                                row,
                                col,
                                reason: format!("second '{ch}' cell"),
                            });
                        }
                    }
                    d if d.is_ascii_digit() => {
                        objects.push((cell, d.to_digit(10).unwrap() as usize));
                    }
                    other => {
                        return Err(Error::Layout {
                            row,
                            col,
                            reason: format!("unknown character {other:?}"),
                        })
                    }
                }
            }
        }
        let start = start.ok_or_else(|| Error::LayoutDocument("no 'S' cell".into()))?;
        let goal = goal.ok_or_else(|| Error::LayoutDocument("no 'G' cell".into()))?;
        let unsafe_regions = doc
            .unsafe_regions
            .iter()
            .map(|&[r0, c0, r1, c1]| Region {
                top_left: Cell::new(r0, c0),
                bottom_right: Cell::new(r1, c1),
            })
            .collect();
        Self::new(LayoutParts {
            width,
            height,
            walls,
            start,
            goal,
            objects,
            traps,
            n_classes: doc.object_classes,
            trap_activation_prob: doc.trap_activation_prob,
            object_reward_prob: doc.object_reward_prob,
            unsafe_regions,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn objects(&self) -> &[GridObject] {
        &self.objects
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn trap_activation_prob(&self) -> f64 {
        self.trap_activation_prob
    }

    pub fn object_reward_prob(&self) -> f64 {
        self.object_reward_prob
    }

    pub fn unsafe_regions(&self) -> &[Region] {
        &self.unsafe_regions
    }

    pub fn with_trap_activation_prob(mut self, p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::param("trap_activation_prob", format!("{p} not in (0, 1]")));
        }
        self.trap_activation_prob = p;
        Ok(self)
    }

    pub fn with_object_reward_prob(mut self, p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::param("object_reward_prob", format!("{p} not in (0, 1]")));
        }
        self.object_reward_prob = p;
        Ok(self)
    }

    pub fn trap_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.traps
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(|(i, _)| self.cell(i))
    }

    pub(crate) fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub(crate) fn cell(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    pub fn is_wall(&self, cell: Cell) -> bool {
        self.walls[self.index(cell)]
    }

    pub fn is_trap(&self, cell: Cell) -> bool {
        self.traps[self.index(cell)]
    }

    pub(crate) fn is_trap_index(&self, index: usize) -> bool {
        self.traps[index]
    }

    pub(crate) fn is_wall_index(&self, index: usize) -> bool {
        self.walls[index]
    }

    pub(crate) fn object_at_index(&self, index: usize) -> Option<usize> {
        self.object_at[index]
    }

    /// Character-grid dump, optionally marking the agent with `@`.
    pub fn render(&self, agent: Option<Cell>) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in 0..self.height {
            for col in 0..self.width {
                let cell = Cell::new(row, col);
                let i = self.index(cell);
                let ch = if Some(cell) == agent {
                    '@'
                } else if self.walls[i] {
                    '#'
                } else if cell == self.start {
                    'S'
                } else if cell == self.goal {
                    'G'
                } else if let Some(k) = self.object_at[i] {
                    char::from_digit(self.objects[k].class as u32, 10).unwrap_or('?')
                } else if self.traps[i] {
                    'T'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts() -> LayoutParts {
        LayoutParts {
            width: 3,
            height: 3,
            walls: vec![Cell::new(1, 1)],
            start: Cell::new(0, 0),
            goal: Cell::new(2, 2),
            objects: vec![(Cell::new(0, 2), 0)],
            traps: vec![],
            n_classes: 1,
            trap_activation_prob: 1.0,
            object_reward_prob: 1.0,
            unsafe_regions: vec![],
        }
    }

    #[test]
    fn default_layout_dimensions() {
        let l = GridLayout::default_four_room();
        assert_eq!((l.width(), l.height()), (13, 13));
        assert_eq!(l.objects().len(), 18);
        assert_eq!(l.n_classes(), 3);
        for class in 0..3 {
            assert_eq!(l.objects().iter().filter(|o| o.class == class).count(), 6);
        }
        assert_eq!(l.objects().iter().filter(|o| o.unsafe_object).count(), 6);
        assert_eq!(l.trap_cells().count(), 14);
        assert_eq!(l.render(None).lines().next(), Some("S....0#.T120T"));
    }

    #[test]
    fn object_on_wall_is_rejected() {
        let mut p = parts();
        p.objects = vec![(Cell::new(1, 1), 0)];
        let err = GridLayout::new(p).unwrap_err();
        assert!(matches!(err, Error::Layout { row: 1, col: 1, .. }), "{err}");
    }

    #[test]
    fn duplicate_objects_and_bad_classes_are_rejected() {
        let mut p = parts();
        p.objects = vec![(Cell::new(0, 2), 0), (Cell::new(0, 2), 0)];
        assert!(GridLayout::new(p).is_err());
        let mut p = parts();
        p.objects = vec![(Cell::new(0, 2), 1)];
        assert!(GridLayout::new(p).is_err());
    }

    #[test]
    fn empty_trap_set_is_valid() {
        let l = GridLayout::new(parts()).unwrap();
        assert_eq!(l.trap_cells().count(), 0);
    }

    #[test]
    fn parser_rejects_unknown_characters_with_location() {
        let doc = "version = 1\nobject_classes = 1\ngrid = [\"S.\", \"xG\"]\n";
        let err = GridLayout::parse(doc).unwrap_err();
        assert!(matches!(err, Error::Layout { row: 1, col: 0, .. }), "{err}");
    }

    #[test]
    fn parser_rejects_unknown_keys_and_ragged_rows() {
        let doc = "version = 1\nobject_classes = 1\nfoo = 2\ngrid = [\"SG\"]\n";
        assert!(matches!(GridLayout::parse(doc), Err(Error::LayoutDocument(_))));
        let doc = "version = 1\nobject_classes = 1\ngrid = [\"S.\", \"G\"]\n";
        assert!(matches!(GridLayout::parse(doc), Err(Error::Layout { row: 1, .. })));
    }

    #[test]
    fn parser_rejects_bad_probability_and_version() {
        let doc = "version = 1\nobject_classes = 1\ntrap_activation_prob = 0.0\ngrid = [\"SG\"]\n";
        assert!(GridLayout::parse(doc).is_err());
        let doc = "version = 2\nobject_classes = 1\ngrid = [\"SG\"]\n";
        assert!(GridLayout::parse(doc).is_err());
    }
}
