//! The solver as a sequence-to-sequence layer: leaf inputs in, one output per
//! node out, with top-level averaging for classification.

use crate::error::{MyoError, Result};
use crate::params::{LevelParams, RightHandSide};
use crate::solver;
use crate::topology::{FlattenOrder, GridShape, Tree};

/// What the non-leaf (virtual) nodes receive as input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VirtualInput {
    #[default]
    Zeros,
    /// Mean of the leaf inputs the node covers.
    MeanPool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerConfig {
    pub block_sizes: Vec<usize>,
    pub heads: usize,
    pub virtual_input: VirtualInput,
    /// Number of BFS levels, counted from the root, averaged by [`aggregate_topk`].
    pub top_k: usize,
}

impl LayerConfig {
    pub fn new(tree: &Tree, block_sizes: Vec<usize>, heads: usize, virtual_input: VirtualInput, top_k: usize) -> Result<Self> {
        if block_sizes.len() != tree.depth() {
            return Err(MyoError::ShapeMismatch(format!(
                "{} block sizes for depth {}",
                block_sizes.len(),
                tree.depth()
            )));
        }
        if top_k == 0 || top_k > tree.depth() {
            return Err(MyoError::InvalidArgument(format!(
                "top_k must lie in 1..={}, got {top_k}",
                tree.depth()
            )));
        }
        if virtual_input == VirtualInput::MeanPool && block_sizes.iter().any(|&d| d != block_sizes[0]) {
            return Err(MyoError::InvalidArgument("mean pooling needs equal block sizes on every level".into()));
        }
        Ok(Self {
            block_sizes,
            heads,
            virtual_input,
            top_k,
        })
    }
}

/// Leaf inputs of shape `(batch, leaves, dim, r)`; shared by every head.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafInputs {
    pub batch: usize,
    pub leaves: usize,
    pub dim: usize,
    pub right_parts: usize,
    pub data: Vec<f64>,
}

impl LeafInputs {
    pub fn new(batch: usize, leaves: usize, dim: usize, right_parts: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * leaves * dim * right_parts {
            return Err(MyoError::ShapeMismatch(format!(
                "{} leaf values for shape ({batch}, {leaves}, {dim}, {right_parts})",
                data.len()
            )));
        }
        Ok(Self {
            batch,
            leaves,
            dim,
            right_parts,
            data,
        })
    }

    fn token(&self, b: usize, i: usize) -> &[f64] {
        let n = self.dim * self.right_parts;
        let o = (b * self.leaves + i) * n;
        &self.data[o..o + n]
    }
}

/// Builds the full right part: leaf inputs broadcast over heads, virtual
/// nodes filled according to the configured policy.
pub fn build_rhs(config: &LayerConfig, tree: &Tree, inputs: &LeafInputs) -> Result<RightHandSide> {
    if inputs.leaves != tree.level_size(0) || inputs.dim != config.block_sizes[0] {
        return Err(MyoError::ShapeMismatch(format!(
            "expected {} leaves of dimension {}, got {} of dimension {}",
            tree.level_size(0),
            config.block_sizes[0],
            inputs.leaves,
            inputs.dim
        )));
    }
    let mut u = RightHandSide::zeros(tree, &config.block_sizes, config.heads, inputs.batch, inputs.right_parts)?;
    let n = inputs.dim * inputs.right_parts;
    for b in 0..inputs.batch {
        for h in 0..config.heads {
            for i in 0..inputs.leaves {
                u.block_mut(0, b, h, i).copy_from_slice(inputs.token(b, i));
            }
        }
    }
    if config.virtual_input == VirtualInput::MeanPool {
        for b in 0..inputs.batch {
            // (sum, covered leaf count) per node of the level below
            let mut below: Vec<(Vec<f64>, usize)> = (0..inputs.leaves).map(|i| (inputs.token(b, i).to_vec(), 1)).collect();
            for l in 1..tree.depth() {
                let level: Vec<(Vec<f64>, usize)> = (0..tree.level_size(l))
                    .map(|j| {
                        let mut sum = vec![0.0; n];
                        let mut count = 0;
                        for c in tree.children(l, j) {
                            sum.iter_mut().zip(&below[c].0).for_each(|(s, v)| *s += v);
                            count += below[c].1;
                        }
                        (sum, count)
                    })
                    .collect();
                for (j, (sum, count)) in level.iter().enumerate() {
                    if *count > 0 {
                        let mean: Vec<f64> = sum.iter().map(|s| s / *count as f64).collect();
                        for h in 0..config.heads {
                            u.block_mut(l, b, h, j).copy_from_slice(&mean);
                        }
                    }
                }
                below = level;
            }
        }
    }
    Ok(u)
}

/// Layer output: the solution of `T_G x = u` for the padded input `u`.
pub fn forward(config: &LayerConfig, tree: &Tree, params: &LevelParams, inputs: &LeafInputs) -> Result<RightHandSide> {
    let u = build_rhs(config, tree, inputs)?;
    solver::solve(params, tree, &u)
}

/// Mean of all node outputs in the top `config.top_k` levels (the root alone
/// for `top_k = 1`). Returns shape `(batch, heads, d, r)`.
pub fn aggregate_topk(x: &RightHandSide, config: &LayerConfig, tree: &Tree) -> Result<Vec<f64>> {
    let depth = tree.depth();
    if config.top_k == 0 || config.top_k > depth {
        return Err(MyoError::InvalidArgument(format!("top_k {} outside 1..={depth}", config.top_k)));
    }
    let levels = depth - config.top_k..depth;
    let d = x.block_sizes()[depth - 1];
    if levels.clone().any(|l| x.block_sizes()[l] != d) {
        return Err(MyoError::ShapeMismatch("aggregated levels must share a block size".into()));
    }
    let n = d * x.right_parts();
    let count: usize = levels.clone().map(|l| tree.level_size(l)).sum();
    let mut out = vec![0.0; x.batch() * x.heads() * n];
    for b in 0..x.batch() {
        for h in 0..x.heads() {
            let dst = &mut out[(b * x.heads() + h) * n..(b * x.heads() + h + 1) * n];
            for l in levels.clone() {
                for i in 0..tree.level_size(l) {
                    dst.iter_mut().zip(x.block(l, b, h, i)).for_each(|(s, v)| *s += v);
                }
            }
            dst.iter_mut().for_each(|s| *s /= count as f64);
        }
    }
    Ok(out)
}

/// Chain solve with both couplings present (block tridiagonal system).
pub fn bidirectional_chain_forward(params: &LevelParams, tree: &Tree, u: &RightHandSide) -> Result<RightHandSide> {
    if !tree.is_chain() {
        return Err(MyoError::InvalidTopology("bidirectional forward expects a chain".into()));
    }
    solver::solve(params, tree, u)
}

/// Reorders a raster image (row-major pixels, `channels` values each) into
/// the sequence order `order`.
pub fn flatten_grid(pixels: &[f64], grid: GridShape, channels: usize, order: FlattenOrder) -> Result<Vec<f64>> {
    order.validate(grid)?;
    if pixels.len() != grid.pixel_count() * channels {
        return Err(MyoError::ShapeMismatch(format!(
            "{} values for a {}x{} grid with {channels} channels",
            pixels.len(),
            grid.height,
            grid.width
        )));
    }
    let mut seq = vec![0.0; pixels.len()];
    for y in 0..grid.height {
        for x in 0..grid.width {
            let pos = order.index(x, y, grid)? - 1;
            let src = (y * grid.width + x) * channels;
            seq[pos * channels..(pos + 1) * channels].copy_from_slice(&pixels[src..src + channels]);
        }
    }
    Ok(seq)
}
