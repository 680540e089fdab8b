//! Rooted trees stored as BFS levels, plus the grid orderings that feed them.
//!
//! Level 0 holds the leaves and level `depth - 1` the single root. Each parent
//! level carries a split: one child-group size per parent node, in BFS order,
//! so that the children of a parent form a contiguous run of the level below.
//! Public indices here are 0-based; the problem file and CLI output add one.

use std::ops::Range;

use crate::error::{MyoError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeSpec {
    Perfect { arity: usize, leaves: usize },
    Explicit {
        level_sizes: Vec<usize>,
        /// One entry per parent level (levels 1..depth), each a list of group sizes.
        split_sizes: Vec<Vec<usize>>,
    },
}

/// Immutable BFS-level tree topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    level_sizes: Vec<usize>,
    // splits[p] for p >= 1; splits[0] is empty
    splits: Vec<Vec<usize>>,
    // child_offsets[p][j]..child_offsets[p][j + 1] are the children of node j at level p
    child_offsets: Vec<Vec<usize>>,
    // parents[l][i] is the index at level l + 1 of the parent of node i at level l
    parents: Vec<Vec<usize>>,
    level_offsets: Vec<usize>,
    perfect_arity: Option<usize>,
}

impl Tree {
    /// Builds a tree from explicit level sizes (leaves first) and per-parent-level splits.
    pub fn from_splits(level_sizes: Vec<usize>, split_sizes: Vec<Vec<usize>>) -> Result<Self> {
        let depth = level_sizes.len();
        if depth == 0 {
            return Err(MyoError::InvalidTopology("tree needs at least one level".into()));
        }
        if level_sizes[depth - 1] != 1 {
            return Err(MyoError::InvalidTopology(format!(
                "top level must hold a single root, found {}",
                level_sizes[depth - 1]
            )));
        }
        if let Some(l) = level_sizes.iter().position(|&n| n == 0) {
            return Err(MyoError::InvalidTopology(format!("level {} is empty", l + 1)));
        }
        if split_sizes.len() != depth - 1 {
            return Err(MyoError::InvalidTopology(format!(
                "expected {} split lists, found {}",
                depth - 1,
                split_sizes.len()
            )));
        }
        let mut splits = vec![Vec::new()];
        splits.extend(split_sizes);
        for p in 1..depth {
            let s = &splits[p];
            if s.len() != level_sizes[p] {
                return Err(MyoError::InvalidTopology(format!(
                    "level {} has {} nodes but {} split entries",
                    p + 1,
                    level_sizes[p],
                    s.len()
                )));
            }
            let total: usize = s.iter().sum();
            if total != level_sizes[p - 1] {
                return Err(MyoError::InvalidTopology(format!(
                    "splits of level {} cover {} children, level {} has {}",
                    p + 1,
                    total,
                    p,
                    level_sizes[p - 1]
                )));
            }
        }
        Ok(Self::assemble(level_sizes, splits, None))
    }

    fn assemble(level_sizes: Vec<usize>, splits: Vec<Vec<usize>>, perfect_arity: Option<usize>) -> Self {
        let depth = level_sizes.len();
        let mut child_offsets = vec![Vec::new(); depth];
        let mut parents = vec![Vec::new(); depth];
        for p in 1..depth {
            let mut offs = Vec::with_capacity(splits[p].len() + 1);
            let mut acc = 0;
            offs.push(0);
            let mut par = Vec::with_capacity(level_sizes[p - 1]);
            for (j, &g) in splits[p].iter().enumerate() {
                acc += g;
                offs.push(acc);
                par.extend(std::iter::repeat_n(j, g));
            }
            child_offsets[p] = offs;
            parents[p - 1] = par;
        }
        let mut level_offsets = Vec::with_capacity(depth + 1);
        let mut acc = 0;
        for &n in &level_sizes {
            level_offsets.push(acc);
            acc += n;
        }
        level_offsets.push(acc);
        Self {
            level_sizes,
            splits,
            child_offsets,
            parents,
            level_offsets,
            perfect_arity,
        }
    }

    /// Perfect `arity`-ary tree with `leaf_count = arity^d` leaves.
    pub fn perfect(arity: usize, leaf_count: usize) -> Result<Self> {
        if arity == 0 || leaf_count == 0 {
            return Err(MyoError::InvalidTopology("arity and leaf count must be positive".into()));
        }
        let mut sizes = vec![leaf_count];
        let mut n = leaf_count;
        while n > 1 {
            if arity == 1 || !n.is_multiple_of(arity) {
                return Err(MyoError::InvalidTopology(format!(
                    "leaf count {leaf_count} is not a power of arity {arity}"
                )));
            }
            n /= arity;
            sizes.push(n);
        }
        let mut splits = vec![Vec::new()];
        for &n in &sizes[1..] {
            splits.push(vec![arity; n]);
        }
        Ok(Self::assemble(sizes, splits, Some(arity)))
    }

    /// A chain of `len` nodes: node 0 is the leaf, node `len - 1` the root.
    pub fn chain(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(MyoError::InvalidTopology("chain needs at least one node".into()));
        }
        let splits = std::iter::once(Vec::new())
            .chain((1..len).map(|_| vec![1]))
            .collect();
        Ok(Self::assemble(vec![1; len], splits, None))
    }

    /// Quadtree over a `2^d x 2^d` grid whose leaf order is the Morton order of pixels.
    pub fn quadtree(grid: GridShape) -> Result<Self> {
        grid.require_power_of_two_square()?;
        Self::perfect(4, grid.height * grid.width)
    }

    /// Builds the BFS-level layout of an arbitrary rooted tree given as a parent
    /// array (`None` marks the root).
    ///
    /// Levels count down from the root, so a childless node above the bottom
    /// level owns an empty split group. Nodes of a level are ordered by their
    /// parent's position, siblings by id, which keeps every sibling group
    /// contiguous. Returns the tree and, per input node, its `(level, index)`.
    pub fn from_parents(parents: &[Option<usize>]) -> Result<(Self, Vec<(usize, usize)>)> {
        let n = parents.len();
        let roots: Vec<usize> = (0..n).filter(|&i| parents[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(MyoError::InvalidTopology(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        }
        let mut children = vec![Vec::new(); n];
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n || p == i {
                    return Err(MyoError::InvalidTopology(format!("node {i} has invalid parent {p}")));
                }
                children[p].push(i);
            }
        }
        // breadth-first from the root; rows[depth] = nodes at that depth, in order
        let mut rows: Vec<Vec<usize>> = vec![vec![roots[0]]];
        let mut seen = 1;
        loop {
            let next: Vec<usize> = rows
                .last()
                .unwrap()
                .iter()
                .flat_map(|&v| children[v].iter().copied())
                .collect();
            if next.is_empty() {
                break;
            }
            seen += next.len();
            if seen > n {
                break;
            }
            rows.push(next);
        }
        if seen != n {
            return Err(MyoError::InvalidTopology("parent array contains a cycle or is disconnected".into()));
        }
        let depth = rows.len();
        let mut placement = vec![(0, 0); n];
        let mut level_sizes = Vec::with_capacity(depth);
        let mut split_sizes = Vec::with_capacity(depth - 1);
        for (d, row) in rows.iter().enumerate().rev() {
            let level = depth - 1 - d;
            level_sizes.push(row.len());
            for (idx, &v) in row.iter().enumerate() {
                placement[v] = (level, idx);
            }
        }
        for row in rows.iter().rev().skip(1) {
            split_sizes.push(row.iter().map(|&v| children[v].len()).collect());
        }
        Ok((Self::from_splits(level_sizes, split_sizes)?, placement))
    }

    pub fn depth(&self) -> usize {
        self.level_sizes.len()
    }

    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.level_sizes[level]
    }

    /// Total node count `L`.
    pub fn node_count(&self) -> usize {
        self.level_offsets[self.depth()]
    }

    /// BFS index of the first node in `level`.
    pub fn level_offset(&self, level: usize) -> usize {
        self.level_offsets[level]
    }

    /// Child-group sizes of parent level `level` (must be >= 1).
    pub fn split(&self, level: usize) -> &[usize] {
        &self.splits[level]
    }

    /// Index at `level + 1` of the parent of node `index` at `level`.
    pub fn parent(&self, level: usize, index: usize) -> usize {
        self.parents[level][index]
    }

    /// Parent index for every node of a non-root level.
    pub fn parents_of_level(&self, level: usize) -> &[usize] {
        &self.parents[level]
    }

    /// Indices at `level - 1` of the children of node `index` at `level`.
    pub fn children(&self, level: usize, index: usize) -> Range<usize> {
        if level == 0 {
            return 0..0;
        }
        let offs = &self.child_offsets[level];
        offs[index]..offs[index + 1]
    }

    /// Largest sibling group size.
    pub fn max_arity(&self) -> usize {
        self.splits.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn is_chain(&self) -> bool {
        self.level_sizes.iter().all(|&n| n == 1)
    }

    pub fn spec(&self) -> TreeSpec {
        match self.perfect_arity {
            Some(arity) => TreeSpec::Perfect {
                arity,
                leaves: self.level_sizes[0],
            },
            None => TreeSpec::Explicit {
                level_sizes: self.level_sizes.clone(),
                split_sizes: self.splits[1..].to_vec(),
            },
        }
    }

    pub fn from_spec(spec: &TreeSpec) -> Result<Self> {
        match spec {
            TreeSpec::Perfect { arity, leaves } => Self::perfect(*arity, *leaves),
            TreeSpec::Explicit {
                level_sizes,
                split_sizes,
            } => Self::from_splits(level_sizes.clone(), split_sizes.clone()),
        }
    }

    /// Permutation `pi` from BFS index to post-order DFS index (both 0-based):
    /// every subtree is listed before its root, children left to right.
    pub fn dfs_postorder(&self) -> Vec<usize> {
        let mut pi = vec![0; self.node_count()];
        let mut next = 0;
        let top = self.depth() - 1;
        // (level, index, children_pushed)
        let mut stack = vec![(top, 0usize, false)];
        while let Some((level, index, expanded)) = stack.pop() {
            if expanded {
                pi[self.level_offset(level) + index] = next;
                next += 1;
            } else {
                stack.push((level, index, true));
                for c in self.children(level, index).rev() {
                    stack.push((level - 1, c, false));
                }
            }
        }
        pi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn square(side: usize) -> Self {
        Self::new(side, side)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    fn require_power_of_two_square(&self) -> Result<()> {
        if self.height != self.width || !self.height.is_power_of_two() {
            return Err(MyoError::InvalidGrid {
                height: self.height,
                width: self.width,
                reason: "expected a square grid with power-of-two side".into(),
            });
        }
        Ok(())
    }

    fn check(&self, x: usize, y: usize) -> Result<()> {
        if x >= self.width || y >= self.height {
            return Err(MyoError::OutOfRange {
                x,
                y,
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlattenOrder {
    Morton,
    Snake,
}

impl FlattenOrder {
    /// 1-based sequence position of pixel `(x, y)`.
    pub fn index(self, x: usize, y: usize, grid: GridShape) -> Result<usize> {
        match self {
            FlattenOrder::Morton => morton_index(x, y, grid),
            FlattenOrder::Snake => snake_index(x, y, grid),
        }
    }

    pub fn validate(self, grid: GridShape) -> Result<()> {
        if grid.height == 0 || grid.width == 0 {
            return Err(MyoError::InvalidGrid {
                height: grid.height,
                width: grid.width,
                reason: "empty grid".into(),
            });
        }
        match self {
            FlattenOrder::Morton => grid.require_power_of_two_square(),
            FlattenOrder::Snake => Ok(()),
        }
    }
}

fn spread_bits(mut v: u64) -> u64 {
    v &= 0x0000_0000_ffff_ffff;
    v = (v | (v << 16)) & 0x0000_ffff_0000_ffff;
    v = (v | (v << 8)) & 0x00ff_00ff_00ff_00ff;
    v = (v | (v << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    v = (v | (v << 2)) & 0x3333_3333_3333_3333;
    (v | (v << 1)) & 0x5555_5555_5555_5555
}

fn compact_bits(mut v: u64) -> u64 {
    v &= 0x5555_5555_5555_5555;
    v = (v | (v >> 1)) & 0x3333_3333_3333_3333;
    v = (v | (v >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    v = (v | (v >> 4)) & 0x00ff_00ff_00ff_00ff;
    v = (v | (v >> 8)) & 0x0000_ffff_0000_ffff;
    (v | (v >> 16)) & 0x0000_0000_ffff_ffff
}

/// Z-order position (1-based) of pixel `(x, y)`: x fills the low bit of each
/// interleaved pair, y the high bit.
pub fn morton_index(x: usize, y: usize, grid: GridShape) -> Result<usize> {
    grid.require_power_of_two_square()?;
    grid.check(x, y)?;
    Ok((spread_bits(x as u64) | (spread_bits(y as u64) << 1)) as usize + 1)
}

/// Inverse of [`morton_index`]: pixel `(x, y)` at 0-based Z-order position `pos`.
pub fn morton_decode(pos: usize) -> (usize, usize) {
    let p = pos as u64;
    (compact_bits(p) as usize, compact_bits(p >> 1) as usize)
}

/// Boustrophedon position (1-based): even rows run left to right, odd rows right to left.
pub fn snake_index(x: usize, y: usize, grid: GridShape) -> Result<usize> {
    grid.check(x, y)?;
    let w = grid.width;
    Ok(if y.is_multiple_of(2) { y * w + x + 1 } else { y * w + (w - x) })
}
