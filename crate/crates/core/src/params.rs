//! Per-level block parameters `(A, B, C)` and level-structured right-hand sides.
//!
//! Layout is level-major and node-contiguous:
//! - `A_l`: `(heads, n_l, d_l, d_l)`
//! - `B_l`: `(heads, n_l, d_l, d_{l+1})`, coupling of a node to its parent (row of the node)
//! - `C_l`: `(heads, n_l, d_{l+1}, d_l)`, coupling placed in the parent's row
//! - `u_l`: `(batch, heads, n_l, d_l, r)`
//!
//! The root level stores no `B`/`C`. Every block is row-major.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::{self, BlockLu};
use crate::error::{MyoError, Result};
use crate::topology::Tree;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelBlocks {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Block parameters for every BFS level of a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelParams {
    heads: usize,
    block_sizes: Vec<usize>,
    level_sizes: Vec<usize>,
    levels: Vec<LevelBlocks>,
}

impl LevelParams {
    pub fn zeros(tree: &Tree, block_sizes: &[usize], heads: usize) -> Result<Self> {
        check_block_sizes(tree, block_sizes)?;
        if heads == 0 {
            return Err(MyoError::InvalidArgument("heads must be positive".into()));
        }
        let depth = tree.depth();
        let levels = (0..depth)
            .map(|l| {
                let n = tree.level_size(l);
                let d = block_sizes[l];
                let dp = if l + 1 < depth { block_sizes[l + 1] } else { 0 };
                LevelBlocks {
                    a: vec![0.0; heads * n * d * d],
                    b: vec![0.0; heads * n * d * dp],
                    c: vec![0.0; heads * n * dp * d],
                }
            })
            .collect();
        Ok(Self {
            heads,
            block_sizes: block_sizes.to_vec(),
            level_sizes: tree.level_sizes().to_vec(),
            levels,
        })
    }

    /// `A = I`, no couplings: `T_G` is the identity.
    pub fn identity(tree: &Tree, block_sizes: &[usize], heads: usize) -> Result<Self> {
        let mut p = Self::zeros(tree, block_sizes, heads)?;
        for l in 0..p.depth() {
            let d = p.block_sizes[l];
            let eye = block::identity(d);
            for blk in p.levels[l].a.chunks_mut(d * d) {
                blk.copy_from_slice(&eye);
            }
        }
        Ok(p)
    }

    /// Builds parameters from raw level buffers, checking every length.
    pub fn from_levels(tree: &Tree, block_sizes: &[usize], heads: usize, levels: Vec<LevelBlocks>) -> Result<Self> {
        let mut p = Self::zeros(tree, block_sizes, heads)?;
        if levels.len() != p.levels.len() {
            return Err(MyoError::ShapeMismatch(format!(
                "expected {} levels of parameters, got {}",
                p.levels.len(),
                levels.len()
            )));
        }
        for (l, (want, got)) in p.levels.iter().zip(&levels).enumerate() {
            for (name, w, g) in [("A", &want.a, &got.a), ("B", &want.b, &got.b), ("C", &want.c, &got.c)] {
                if w.len() != g.len() {
                    return Err(MyoError::ShapeMismatch(format!(
                        "{name} at level {} has {} values, expected {}",
                        l + 1,
                        g.len(),
                        w.len()
                    )));
                }
            }
        }
        p.levels = levels;
        Ok(p)
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    pub fn level(&self, l: usize) -> &LevelBlocks {
        &self.levels[l]
    }

    pub fn level_mut(&mut self, l: usize) -> &mut LevelBlocks {
        &mut self.levels[l]
    }

    pub fn levels(&self) -> &[LevelBlocks] {
        &self.levels
    }

    /// Block size of the parent level, or 0 for the root level.
    pub fn parent_block_size(&self, l: usize) -> usize {
        self.block_sizes.get(l + 1).copied().unwrap_or(0)
    }

    fn node(&self, l: usize, h: usize, i: usize) -> usize {
        h * self.level_sizes[l] + i
    }

    pub fn a_block(&self, l: usize, h: usize, i: usize) -> &[f64] {
        let sz = self.block_sizes[l] * self.block_sizes[l];
        let k = self.node(l, h, i);
        &self.levels[l].a[k * sz..(k + 1) * sz]
    }

    pub fn b_block(&self, l: usize, h: usize, i: usize) -> &[f64] {
        let sz = self.block_sizes[l] * self.parent_block_size(l);
        let k = self.node(l, h, i);
        &self.levels[l].b[k * sz..(k + 1) * sz]
    }

    pub fn c_block(&self, l: usize, h: usize, i: usize) -> &[f64] {
        let sz = self.block_sizes[l] * self.parent_block_size(l);
        let k = self.node(l, h, i);
        &self.levels[l].c[k * sz..(k + 1) * sz]
    }

    pub fn a_block_mut(&mut self, l: usize, h: usize, i: usize) -> &mut [f64] {
        let sz = self.block_sizes[l] * self.block_sizes[l];
        let k = self.node(l, h, i);
        &mut self.levels[l].a[k * sz..(k + 1) * sz]
    }

    pub fn b_block_mut(&mut self, l: usize, h: usize, i: usize) -> &mut [f64] {
        let sz = self.block_sizes[l] * self.parent_block_size(l);
        let k = self.node(l, h, i);
        &mut self.levels[l].b[k * sz..(k + 1) * sz]
    }

    pub fn c_block_mut(&mut self, l: usize, h: usize, i: usize) -> &mut [f64] {
        let sz = self.block_sizes[l] * self.parent_block_size(l);
        let k = self.node(l, h, i);
        &mut self.levels[l].c[k * sz..(k + 1) * sz]
    }

    /// Rejects parameters whose shapes disagree with `tree`.
    pub fn check_tree(&self, tree: &Tree) -> Result<()> {
        if self.level_sizes != tree.level_sizes() {
            return Err(MyoError::ShapeMismatch(format!(
                "parameters built for levels {:?}, tree has {:?}",
                self.level_sizes,
                tree.level_sizes()
            )));
        }
        Ok(())
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.levels.iter().map(|lv| lv.a.len() + lv.b.len() + lv.c.len()).sum()
    }

    /// Every parameter buffer in a fixed order: per level `A`, `B`, `C`.
    pub fn buffers(&self) -> Vec<&[f64]> {
        self.levels
            .iter()
            .flat_map(|lv| [lv.a.as_slice(), lv.b.as_slice(), lv.c.as_slice()])
            .collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.levels
            .iter_mut()
            .flat_map(|lv| [&mut lv.a, &mut lv.b, &mut lv.c])
            .collect()
    }

    /// Parameters of the transposed system: `A -> A^T`, `B -> C^T`, `C -> B^T`.
    pub fn transposed(&self) -> Self {
        let mut t = self.clone();
        for l in 0..self.depth() {
            let d = self.block_sizes[l];
            let dp = self.parent_block_size(l);
            for h in 0..self.heads {
                for i in 0..self.level_sizes[l] {
                    let at = block::transpose(self.a_block(l, h, i), d, d);
                    t.a_block_mut(l, h, i).copy_from_slice(&at);
                    if dp > 0 {
                        let bt = block::transpose(self.c_block(l, h, i), dp, d);
                        let ct = block::transpose(self.b_block(l, h, i), d, dp);
                        t.b_block_mut(l, h, i).copy_from_slice(&bt);
                        t.c_block_mut(l, h, i).copy_from_slice(&ct);
                    }
                }
            }
        }
        t
    }
}

fn check_block_sizes(tree: &Tree, block_sizes: &[usize]) -> Result<()> {
    if block_sizes.len() != tree.depth() {
        return Err(MyoError::ShapeMismatch(format!(
            "{} block sizes for a tree of depth {}",
            block_sizes.len(),
            tree.depth()
        )));
    }
    if block_sizes.contains(&0) {
        return Err(MyoError::ShapeMismatch("block sizes must be positive".into()));
    }
    Ok(())
}

/// Level-structured right parts `u` (or solutions `x`), shape `(batch, heads, n_l, d_l, r)` per level.
#[derive(Debug, Clone, PartialEq)]
pub struct RightHandSide {
    batch: usize,
    heads: usize,
    right_parts: usize,
    block_sizes: Vec<usize>,
    level_sizes: Vec<usize>,
    levels: Vec<Vec<f64>>,
}

impl RightHandSide {
    pub fn zeros(tree: &Tree, block_sizes: &[usize], heads: usize, batch: usize, right_parts: usize) -> Result<Self> {
        check_block_sizes(tree, block_sizes)?;
        if heads == 0 || batch == 0 || right_parts == 0 {
            return Err(MyoError::InvalidArgument(
                "heads, batch and right parts must be positive".into(),
            ));
        }
        let levels = (0..tree.depth())
            .map(|l| vec![0.0; batch * heads * tree.level_size(l) * block_sizes[l] * right_parts])
            .collect();
        Ok(Self {
            batch,
            heads,
            right_parts,
            block_sizes: block_sizes.to_vec(),
            level_sizes: tree.level_sizes().to_vec(),
            levels,
        })
    }

    pub fn from_levels(
        tree: &Tree,
        block_sizes: &[usize],
        heads: usize,
        batch: usize,
        right_parts: usize,
        levels: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut u = Self::zeros(tree, block_sizes, heads, batch, right_parts)?;
        if levels.len() != u.levels.len() {
            return Err(MyoError::ShapeMismatch(format!(
                "expected {} levels of right parts, got {}",
                u.levels.len(),
                levels.len()
            )));
        }
        for (l, (w, g)) in u.levels.iter().zip(&levels).enumerate() {
            if w.len() != g.len() {
                return Err(MyoError::ShapeMismatch(format!(
                    "u at level {} has {} values, expected {}",
                    l + 1,
                    g.len(),
                    w.len()
                )));
            }
        }
        u.levels = levels;
        Ok(u)
    }

    /// Entries drawn uniformly from `[-1, 1]`, deterministic in `rng`.
    pub fn random<R: Rng>(
        tree: &Tree,
        block_sizes: &[usize],
        heads: usize,
        batch: usize,
        right_parts: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut u = Self::zeros(tree, block_sizes, heads, batch, right_parts)?;
        for lv in &mut u.levels {
            lv.iter_mut().for_each(|v| *v = rng.random_range(-1.0..=1.0));
        }
        Ok(u)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.levels.iter_mut().for_each(|lv| lv.fill(0.0));
        z
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn right_parts(&self) -> usize {
        self.right_parts
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    pub fn level(&self, l: usize) -> &[f64] {
        &self.levels[l]
    }

    pub fn level_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.levels[l]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.levels
    }

    /// Number of scalars in one `(d_l x r)` block at level `l`.
    pub fn block_len(&self, l: usize) -> usize {
        self.block_sizes[l] * self.right_parts
    }

    fn offset(&self, l: usize, b: usize, h: usize, i: usize) -> usize {
        ((b * self.heads + h) * self.level_sizes[l] + i) * self.block_len(l)
    }

    pub fn block(&self, l: usize, b: usize, h: usize, i: usize) -> &[f64] {
        let o = self.offset(l, b, h, i);
        &self.levels[l][o..o + self.block_len(l)]
    }

    pub fn block_mut(&mut self, l: usize, b: usize, h: usize, i: usize) -> &mut [f64] {
        let o = self.offset(l, b, h, i);
        let n = self.block_len(l);
        &mut self.levels[l][o..o + n]
    }

    pub fn scalar_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.levels.iter().flatten()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += alpha * y);
        }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.batch == other.batch
            && self.heads == other.heads
            && self.right_parts == other.right_parts
            && self.block_sizes == other.block_sizes
            && self.level_sizes == other.level_sizes
    }

    /// Rejects right parts that do not fit `params` on `tree`.
    pub fn check_against(&self, tree: &Tree, params: &LevelParams) -> Result<()> {
        params.check_tree(tree)?;
        if self.level_sizes != tree.level_sizes() {
            return Err(MyoError::ShapeMismatch(format!(
                "right parts built for levels {:?}, tree has {:?}",
                self.level_sizes,
                tree.level_sizes()
            )));
        }
        if self.block_sizes != params.block_sizes() {
            return Err(MyoError::ShapeMismatch(format!(
                "right part block sizes {:?} differ from parameter block sizes {:?}",
                self.block_sizes,
                params.block_sizes()
            )));
        }
        if self.heads != params.heads() {
            return Err(MyoError::ShapeMismatch(format!(
                "right parts have {} heads, parameters {}",
                self.heads,
                params.heads()
            )));
        }
        Ok(())
    }
}

/// Random gauge-fixed parameters: `A = I`, `B` uniform in `[-s, s]` with
/// `s = gamma / (k * d)` (`k` the largest sibling group, `d` the larger block
/// dimension of the edge), and `C = -B^T`.
///
/// With this choice every Schur complement met by the upward pass has the form
/// `I + sum B^T Ahat^-1 B` and stays symmetric positive definite.
pub fn init_random_stable(
    tree: &Tree,
    block_sizes: &[usize],
    heads: usize,
    seed: u64,
    coupling_scale: f64,
) -> Result<LevelParams> {
    if coupling_scale.is_nan() || coupling_scale < 0.0 {
        return Err(MyoError::InvalidArgument(format!(
            "coupling scale must be non-negative, got {coupling_scale}"
        )));
    }
    let mut params = LevelParams::identity(tree, block_sizes, heads)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = tree.max_arity().max(1) as f64;
    for l in 0..tree.depth().saturating_sub(1) {
        let d = block_sizes[l];
        let dp = block_sizes[l + 1];
        let bound = coupling_scale / (k * d.max(dp) as f64);
        for h in 0..heads {
            for i in 0..tree.level_size(l) {
                let b: Vec<f64> = (0..d * dp)
                    .map(|_| if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 })
                    .collect();
                let c: Vec<f64> = block::transpose(&b, d, dp).into_iter().map(|v| -v).collect();
                params.b_block_mut(l, h, i).copy_from_slice(&b);
                params.c_block_mut(l, h, i).copy_from_slice(&c);
            }
        }
    }
    Ok(params)
}

/// One invertible scaling block per node, shape `(heads, n_l, d_l, d_l)` per level.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeBlocks {
    pub levels: Vec<Vec<f64>>,
}

impl GaugeBlocks {
    /// Random well-conditioned gauge: identity plus uniform noise in `[-spread, spread]`,
    /// times a random positive scale in `[0.5, 2]`.
    pub fn random<R: Rng>(tree: &Tree, block_sizes: &[usize], heads: usize, spread: f64, rng: &mut R) -> Self {
        let levels = (0..tree.depth())
            .map(|l| {
                let d = block_sizes[l];
                let mut v = Vec::with_capacity(heads * tree.level_size(l) * d * d);
                for _ in 0..heads * tree.level_size(l) {
                    let s: f64 = rng.random_range(0.5..=2.0);
                    for r in 0..d {
                        for c in 0..d {
                            let e = if r == c { 1.0 } else { 0.0 };
                            v.push(s * (e + rng.random_range(-spread..=spread)));
                        }
                    }
                }
                v
            })
            .collect();
        Self { levels }
    }

    fn factor_all(&self, params_shape: (&[usize], &[usize], usize)) -> Result<Vec<Vec<BlockLu>>> {
        let (level_sizes, block_sizes, heads) = params_shape;
        if self.levels.len() != level_sizes.len() {
            return Err(MyoError::ShapeMismatch("gauge depth differs from tree depth".into()));
        }
        let mut out = Vec::with_capacity(level_sizes.len());
        for (l, blocks) in self.levels.iter().enumerate() {
            let d = block_sizes[l];
            if blocks.len() != heads * level_sizes[l] * d * d {
                return Err(MyoError::ShapeMismatch(format!("gauge level {} has wrong length", l + 1)));
            }
            let mut lv = Vec::with_capacity(heads * level_sizes[l]);
            for (k, blk) in blocks.chunks(d * d).enumerate() {
                let lu = BlockLu::factor(blk, d).ok_or(MyoError::SingularGauge {
                    level: l + 1,
                    node: k % level_sizes[l] + 1,
                    head: k / level_sizes[l] + 1,
                })?;
                lv.push(lu);
            }
            out.push(lv);
        }
        Ok(out)
    }
}

/// Left-multiplies every block row `v` of `T_G` by `D_v^-1`:
/// `A_v -> D_v^-1 A_v`, `B_v -> D_v^-1 B_v`, and each `C_c` living in the
/// parent's row becomes `D_parent^-1 C_c`.
pub fn apply_gauge(params: &LevelParams, tree: &Tree, gauge: &GaugeBlocks) -> Result<LevelParams> {
    params.check_tree(tree)?;
    let lus = gauge.factor_all((params.level_sizes(), params.block_sizes(), params.heads()))?;
    let mut out = params.clone();
    for l in 0..params.depth() {
        let d = params.block_sizes()[l];
        let dp = params.parent_block_size(l);
        for h in 0..params.heads() {
            for i in 0..tree.level_size(l) {
                let lu = &lus[l][h * tree.level_size(l) + i];
                let a = lu.solve(params.a_block(l, h, i), d);
                out.a_block_mut(l, h, i).copy_from_slice(&a);
                if dp > 0 {
                    let b = lu.solve(params.b_block(l, h, i), dp);
                    out.b_block_mut(l, h, i).copy_from_slice(&b);
                    let p = tree.parent(l, i);
                    let plu = &lus[l + 1][h * tree.level_size(l + 1) + p];
                    let c = plu.solve(params.c_block(l, h, i), d);
                    out.c_block_mut(l, h, i).copy_from_slice(&c);
                }
            }
        }
    }
    Ok(out)
}

/// Rescales right parts the same way [`apply_gauge`] rescales rows: `u_v -> D_v^-1 u_v`.
pub fn scale_rhs(u: &RightHandSide, tree: &Tree, gauge: &GaugeBlocks) -> Result<RightHandSide> {
    let lus = gauge.factor_all((u.level_sizes(), u.block_sizes(), u.heads()))?;
    let mut out = u.clone();
    for l in 0..u.depth() {
        for b in 0..u.batch() {
            for h in 0..u.heads() {
                for i in 0..tree.level_size(l) {
                    let lu = &lus[l][h * tree.level_size(l) + i];
                    let v = lu.solve(u.block(l, b, h, i), u.right_parts());
                    out.block_mut(l, b, h, i).copy_from_slice(&v);
                }
            }
        }
    }
    Ok(out)
}

/// Row-major copy of a column-major nalgebra matrix.
pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Turns the recurrence `x_1 = S_1 u_1`, `x_k = I_{k-1} x_{k-1} + S_k u_k`
/// into an equivalent lower block-bidiagonal chain system.
///
/// Position `k` gets diagonal `S_k^-1` and sub-diagonal coupling
/// `-S_k^-1 I_{k-1}`; the upper coupling is zero. `interaction` holds
/// `I_1..I_{L-1}`, `input` holds `S_1..S_L`.
pub fn ssm_to_chain(interaction: &[DMatrix<f64>], input: &[DMatrix<f64>]) -> Result<(Tree, LevelParams)> {
    let len = input.len();
    if len == 0 {
        return Err(MyoError::InvalidArgument("empty state space model".into()));
    }
    if interaction.len() + 1 != len {
        return Err(MyoError::ShapeMismatch(format!(
            "{} input blocks need {} interaction blocks, got {}",
            len,
            len - 1,
            interaction.len()
        )));
    }
    let dims: Vec<usize> = input.iter().map(|s| s.nrows()).collect();
    for (k, s) in input.iter().enumerate() {
        if !s.is_square() {
            return Err(MyoError::ShapeMismatch(format!("input block {} is not square", k + 1)));
        }
    }
    for (k, m) in interaction.iter().enumerate() {
        if m.nrows() != dims[k + 1] || m.ncols() != dims[k] {
            return Err(MyoError::ShapeMismatch(format!(
                "interaction block {} is {}x{}, expected {}x{}",
                k + 1,
                m.nrows(),
                m.ncols(),
                dims[k + 1],
                dims[k]
            )));
        }
    }
    let tree = Tree::chain(len)?;
    let mut params = LevelParams::zeros(&tree, &dims, 1)?;
    for k in 0..len {
        let d = dims[k];
        let lu = BlockLu::factor(&to_row_major(&input[k]), d).ok_or(MyoError::Singular {
            level: k + 1,
            node: 1,
            head: 1,
        })?;
        params.a_block_mut(k, 0, 0).copy_from_slice(&lu.solve(&block::identity(d), d));
        if k > 0 {
            let c: Vec<f64> = lu
                .solve(&to_row_major(&interaction[k - 1]), dims[k - 1])
                .into_iter()
                .map(|v| -v)
                .collect();
            params.c_block_mut(k - 1, 0, 0).copy_from_slice(&c);
        }
    }
    Ok((tree, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gamma_gives_identity() {
        let tree = Tree::perfect(2, 8).unwrap();
        let p = init_random_stable(&tree, &[1; 4], 2, 3, 0.0).unwrap();
        assert_eq!(p, LevelParams::identity(&tree, &[1; 4], 2).unwrap());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let tree = Tree::perfect(4, 16).unwrap();
        let a = init_random_stable(&tree, &[2, 3, 2], 2, 11, 0.8).unwrap();
        let b = init_random_stable(&tree, &[2, 3, 2], 2, 11, 0.8).unwrap();
        assert_eq!(a, b);
        let c = init_random_stable(&tree, &[2, 3, 2], 2, 12, 0.8).unwrap();
        assert_ne!(a, c);
        let bound = 0.8 / (4.0 * 3.0);
        for l in 0..2 {
            assert!(a.level(l).b.iter().all(|v| v.abs() <= bound));
        }
        // C = -B^T blockwise
        let b0 = a.b_block(0, 1, 5);
        let c0 = a.c_block(0, 1, 5);
        for r in 0..2 {
            for s in 0..3 {
                assert_eq!(c0[s * 2 + r], -b0[r * 3 + s]);
            }
        }
        assert!(init_random_stable(&tree, &[1, 1, 1], 1, 0, -1.0).is_err());
    }

    #[test]
    fn identity_gauge_is_noop() {
        let tree = Tree::perfect(2, 4).unwrap();
        let p = init_random_stable(&tree, &[2; 3], 1, 5, 0.5).unwrap();
        let g = GaugeBlocks {
            levels: (0..3)
                .map(|l| {
                    let eye = block::identity(2);
                    eye.repeat(tree.level_size(l))
                })
                .collect(),
        };
        assert_eq!(apply_gauge(&p, &tree, &g).unwrap(), p);
    }

    #[test]
    fn uniform_gauge_on_scalar_chain() {
        let tree = Tree::chain(3).unwrap();
        let mut p = LevelParams::identity(&tree, &[1; 3], 1).unwrap();
        p.c_block_mut(0, 0, 0)[0] = 2.0;
        p.c_block_mut(1, 0, 0)[0] = 3.0;
        let g = GaugeBlocks {
            levels: vec![vec![2.0]; 3],
        };
        let q = apply_gauge(&p, &tree, &g).unwrap();
        for l in 0..3 {
            assert_eq!(q.a_block(l, 0, 0), &[0.5]);
        }
        assert_eq!(q.c_block(0, 0, 0), &[1.0]);
        assert_eq!(q.c_block(1, 0, 0), &[1.5]);
    }

    #[test]
    fn singular_gauge_rejected() {
        let tree = Tree::chain(2).unwrap();
        let p = LevelParams::identity(&tree, &[1; 2], 1).unwrap();
        let g = GaugeBlocks {
            levels: vec![vec![1.0], vec![0.0]],
        };
        assert_eq!(
            apply_gauge(&p, &tree, &g),
            Err(MyoError::SingularGauge { level: 2, node: 1, head: 1 })
        );
    }

    #[test]
    fn ssm_identity_maps_to_identity_chain() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let zero = DMatrix::<f64>::zeros(2, 2);
        let (tree, p) = ssm_to_chain(&[zero.clone(), zero], &[eye.clone(), eye.clone(), eye]).unwrap();
        assert_eq!(p, LevelParams::identity(&tree, &[2; 3], 1).unwrap());
    }

    #[test]
    fn ssm_singular_input_rejected() {
        let s = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert!(matches!(ssm_to_chain(&[], &[s]), Err(MyoError::Singular { level: 1, .. })));
    }

    #[test]
    fn transposed_swaps_couplings() {
        let tree = Tree::perfect(2, 2).unwrap();
        let mut p = LevelParams::zeros(&tree, &[2, 1], 1).unwrap();
        p.b_block_mut(0, 0, 1).copy_from_slice(&[1.0, 2.0]);
        p.c_block_mut(0, 0, 1).copy_from_slice(&[3.0, 4.0]);
        p.a_block_mut(0, 0, 1).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let t = p.transposed();
        assert_eq!(t.b_block(0, 0, 1), &[3.0, 4.0]);
        assert_eq!(t.c_block(0, 0, 1), &[1.0, 2.0]);
        assert_eq!(t.a_block(0, 0, 1), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(t.transposed(), p);
    }
}
