//! Ground-truth routes that share no code with the tree solver: explicit
//! dense assembly and factorization, the plain state-space recurrence, the
//! closed-form chain inverse, block LU of tridiagonal chains and central
//! finite differences. All dense algebra goes through nalgebra.
//!
//! These are deliberately naive (cubic time in the node count) and guarded by
//! [`MAX_DENSE_NODES`].

use nalgebra::DMatrix;

use crate::error::{MyoError, Result};
use crate::params::{LevelParams, RightHandSide};
use crate::solver::Cotangents;
use crate::topology::Tree;

/// Largest node count the dense oracle will assemble.
pub const MAX_DENSE_NODES: usize = 4096;

fn block_matrix(data: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

/// `T_G` written out explicitly, one matrix per head, rows in DFS post-order.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub matrices: Vec<DMatrix<f64>>,
    /// First row of every node, indexed by BFS position.
    pub row_start: Vec<usize>,
    /// Block size of every node, indexed by BFS position.
    pub node_dim: Vec<usize>,
    /// BFS position -> DFS post-order position.
    pub pi: Vec<usize>,
    level_offsets: Vec<usize>,
}

impl DenseSystem {
    pub fn size(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    fn bfs(&self, level: usize, index: usize) -> usize {
        self.level_offsets[level] + index
    }

    /// Stacks the `(batch, head)` slice of `u` into an `N x r` matrix in row order.
    pub fn pack(&self, u: &RightHandSide, batch: usize, head: usize) -> DMatrix<f64> {
        let r = u.right_parts();
        let mut m = DMatrix::zeros(self.size(), r);
        for l in 0..u.depth() {
            for i in 0..u.level_sizes()[l] {
                let v = self.bfs(l, i);
                let (s, d) = (self.row_start[v], self.node_dim[v]);
                let blk = u.block(l, batch, head, i);
                for a in 0..d {
                    for c in 0..r {
                        m[(s + a, c)] = blk[a * r + c];
                    }
                }
            }
        }
        m
    }

    /// Inverse of [`DenseSystem::pack`]: writes `m` into the `(batch, head)` slice of `out`.
    pub fn unpack(&self, m: &DMatrix<f64>, out: &mut RightHandSide, batch: usize, head: usize) {
        let r = out.right_parts();
        for l in 0..out.depth() {
            for i in 0..out.level_sizes()[l] {
                let v = self.bfs(l, i);
                let (s, d) = (self.row_start[v], self.node_dim[v]);
                let blk = out.block_mut(l, batch, head, i);
                for a in 0..d {
                    for c in 0..r {
                        blk[a * r + c] = m[(s + a, c)];
                    }
                }
            }
        }
    }

    /// Dense product `T_G x`.
    pub fn matvec(&self, x: &RightHandSide) -> RightHandSide {
        let mut y = x.zeros_like();
        for b in 0..x.batch() {
            for h in 0..x.heads() {
                let prod = &self.matrices[h] * self.pack(x, b, h);
                self.unpack(&prod, &mut y, b, h);
            }
        }
        y
    }

    /// Explicit inverse of the head-`h` matrix.
    pub fn inverse(&self, head: usize) -> Result<DMatrix<f64>> {
        self.matrices[head].clone().try_inverse().ok_or(MyoError::DenseSingular)
    }
}

/// Places `A_v` at `(pi(v), pi(v))`, `B_v` at `(pi(v), pi(parent))` and
/// `C_v` at `(pi(parent), pi(v))`; everything else is zero.
pub fn assemble_dense(params: &LevelParams, tree: &Tree) -> Result<DenseSystem> {
    params.check_tree(tree)?;
    let count = tree.node_count();
    if count > MAX_DENSE_NODES {
        return Err(MyoError::GuardExceeded(format!(
            "dense oracle limited to {MAX_DENSE_NODES} nodes, tree has {count}"
        )));
    }
    let pi = tree.dfs_postorder();
    let mut node_dim = vec![0; count];
    let mut level_offsets = Vec::with_capacity(tree.depth());
    for l in 0..tree.depth() {
        level_offsets.push(tree.level_offset(l));
        for i in 0..tree.level_size(l) {
            node_dim[tree.level_offset(l) + i] = params.block_sizes()[l];
        }
    }
    let mut by_row = vec![0; count];
    for (v, &p) in pi.iter().enumerate() {
        by_row[p] = v;
    }
    let mut row_start = vec![0; count];
    let mut acc = 0;
    for &v in &by_row {
        row_start[v] = acc;
        acc += node_dim[v];
    }
    let mut matrices = Vec::with_capacity(params.heads());
    for h in 0..params.heads() {
        let mut t = DMatrix::zeros(acc, acc);
        for l in 0..tree.depth() {
            let d = params.block_sizes()[l];
            let dp = params.parent_block_size(l);
            for i in 0..tree.level_size(l) {
                let v = tree.level_offset(l) + i;
                let sv = row_start[v];
                t.view_mut((sv, sv), (d, d)).copy_from(&block_matrix(params.a_block(l, h, i), d, d));
                if dp > 0 {
                    let sp = row_start[tree.level_offset(l + 1) + tree.parent(l, i)];
                    t.view_mut((sv, sp), (d, dp)).copy_from(&block_matrix(params.b_block(l, h, i), d, dp));
                    t.view_mut((sp, sv), (dp, d)).copy_from(&block_matrix(params.c_block(l, h, i), dp, d));
                }
            }
        }
        matrices.push(t);
    }
    Ok(DenseSystem {
        matrices,
        row_start,
        node_dim,
        pi,
        level_offsets,
    })
}

/// `x = T^-1 u` by dense partially pivoted LU, per head and batch entry.
pub fn dense_solve(system: &DenseSystem, u: &RightHandSide) -> Result<RightHandSide> {
    let mut x = u.zeros_like();
    for h in 0..u.heads() {
        let lu = system.matrices[h].clone().lu();
        for b in 0..u.batch() {
            let sol = lu.solve(&system.pack(u, b, h)).ok_or(MyoError::DenseSingular)?;
            system.unpack(&sol, &mut x, b, h);
        }
    }
    Ok(x)
}

/// `max |T x - u|` using the explicit matrix.
pub fn residual(system: &DenseSystem, x: &RightHandSide, u: &RightHandSide) -> f64 {
    system.matvec(x).max_abs_diff(u)
}

/// Convenience: assemble and solve in one go.
pub fn dense_solve_params(params: &LevelParams, tree: &Tree, u: &RightHandSide) -> Result<RightHandSide> {
    dense_solve(&assemble_dense(params, tree)?, u)
}

/// The state-space recurrence as written: `x_1 = S_1 u_1`,
/// `x_k = I_{k-1} x_{k-1} + S_k u_k`.
pub fn ssm_reference(interaction: &[DMatrix<f64>], input: &[DMatrix<f64>], u: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let mut xs: Vec<DMatrix<f64>> = Vec::with_capacity(u.len());
    for (k, uk) in u.iter().enumerate() {
        let mut x = &input[k] * uk;
        if k > 0 {
            x += &interaction[k - 1] * &xs[k - 1];
        }
        xs.push(x);
    }
    xs
}

/// Block `(i, j)` (0-based) of the inverse of a unit lower block-bidiagonal
/// chain whose sub-diagonal block at `(k + 1, k)` is `sub[k]`.
///
/// Zero above the diagonal, identity on it, and
/// `(-1)^(i-j) sub[i-1] sub[i-2] ... sub[j]` below.
pub fn chain_inverse_entry(sub: &[DMatrix<f64>], i: usize, j: usize) -> Result<DMatrix<f64>> {
    let len = sub.len() + 1;
    if i >= len || j >= len {
        return Err(MyoError::InvalidArgument(format!(
            "entry ({i}, {j}) outside a chain of length {len}"
        )));
    }
    let dim = |k: usize| -> usize {
        if k < sub.len() {
            sub[k].ncols()
        } else if k > 0 {
            sub[k - 1].nrows()
        } else {
            1
        }
    };
    if i < j {
        return Ok(DMatrix::zeros(dim(i), dim(j)));
    }
    let mut acc = DMatrix::identity(dim(i), dim(i));
    for k in (j..i).rev() {
        acc = -(acc * &sub[k]);
    }
    Ok(acc)
}

/// A block tridiagonal system: `diag[k]` at `(k, k)`, `upper[k]` at
/// `(k, k + 1)`, `lower[k]` at `(k + 1, k)`.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal {
    pub diag: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
    pub lower: Vec<DMatrix<f64>>,
}

impl BlockTridiagonal {
    /// Reads head `h` of chain parameters: `A` on the diagonal, each node's `B`
    /// above it and its `C` below.
    pub fn from_chain(params: &LevelParams, tree: &Tree, head: usize) -> Result<Self> {
        if !tree.is_chain() {
            return Err(MyoError::InvalidTopology("block tridiagonal view needs a chain".into()));
        }
        params.check_tree(tree)?;
        let len = tree.depth();
        let bs = params.block_sizes();
        let diag = (0..len).map(|k| block_matrix(params.a_block(k, head, 0), bs[k], bs[k])).collect();
        let upper = (0..len - 1).map(|k| block_matrix(params.b_block(k, head, 0), bs[k], bs[k + 1])).collect();
        let lower = (0..len - 1).map(|k| block_matrix(params.c_block(k, head, 0), bs[k + 1], bs[k])).collect();
        Ok(Self { diag, upper, lower })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let starts = starts(&self.diag);
        let n = *starts.last().unwrap();
        let mut t = DMatrix::zeros(n, n);
        for (k, d) in self.diag.iter().enumerate() {
            t.view_mut((starts[k], starts[k]), d.shape()).copy_from(d);
        }
        for (k, (u, l)) in self.upper.iter().zip(&self.lower).enumerate() {
            t.view_mut((starts[k], starts[k + 1]), u.shape()).copy_from(u);
            t.view_mut((starts[k + 1], starts[k]), l.shape()).copy_from(l);
        }
        t
    }
}

fn starts(diag: &[DMatrix<f64>]) -> Vec<usize> {
    let mut s = vec![0];
    for d in diag {
        s.push(s.last().unwrap() + d.nrows());
    }
    s
}

/// `T = L U` with `L` unit lower block-bidiagonal (`lower[k]` at `(k + 1, k)`)
/// and `U` upper block-bidiagonal (`pivots[k]` on the diagonal, `upper[k]` above).
#[derive(Debug, Clone)]
pub struct BidiagonalFactors {
    pub lower: Vec<DMatrix<f64>>,
    pub pivots: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
}

impl BidiagonalFactors {
    pub fn lower_dense(&self) -> DMatrix<f64> {
        let s = starts(&self.pivots);
        let n = *s.last().unwrap();
        let mut m = DMatrix::identity(n, n);
        for (k, l) in self.lower.iter().enumerate() {
            m.view_mut((s[k + 1], s[k]), l.shape()).copy_from(l);
        }
        m
    }

    pub fn upper_dense(&self) -> DMatrix<f64> {
        let s = starts(&self.pivots);
        let n = *s.last().unwrap();
        let mut m = DMatrix::zeros(n, n);
        for (k, p) in self.pivots.iter().enumerate() {
            m.view_mut((s[k], s[k]), p.shape()).copy_from(p);
        }
        for (k, u) in self.upper.iter().enumerate() {
            m.view_mut((s[k], s[k + 1]), u.shape()).copy_from(u);
        }
        m
    }

    /// Forward sweep with `L` (a causal recurrence over the input), then a
    /// backward sweep with `U` (the same recurrence over the reversed result).
    pub fn solve(&self, u: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        let len = self.pivots.len();
        let mut y: Vec<DMatrix<f64>> = Vec::with_capacity(len);
        for k in 0..len {
            let mut v = u[k].clone();
            if k > 0 {
                v -= &self.lower[k - 1] * &y[k - 1];
            }
            y.push(v);
        }
        let mut x = vec![DMatrix::zeros(0, 0); len];
        for k in (0..len).rev() {
            let mut v = y[k].clone();
            if k + 1 < len {
                v -= &self.upper[k] * &x[k + 1];
            }
            x[k] = self.pivots[k].clone().lu().solve(&v).ok_or(MyoError::VanishingMinor(k + 1))?;
        }
        Ok(x)
    }
}

fn nearly_singular(m: &DMatrix<f64>) -> bool {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    max.is_nan() || max <= 0.0 || min <= 1e-12 * max
}

/// Block LU of a tridiagonal chain. Requires every leading principal block
/// minor to be nonsingular; otherwise reports the first failing position.
pub fn tridiag_bidiagonal_factor(t: &BlockTridiagonal) -> Result<BidiagonalFactors> {
    let len = t.diag.len();
    let mut pivots: Vec<DMatrix<f64>> = Vec::with_capacity(len);
    let mut lower = Vec::with_capacity(len.saturating_sub(1));
    for k in 0..len {
        let mut p = t.diag[k].clone();
        if k > 0 {
            let prev = &pivots[k - 1];
            let inv = prev.clone().try_inverse().ok_or(MyoError::VanishingMinor(k))?;
            let l = &t.lower[k - 1] * inv;
            p -= &l * &t.upper[k - 1];
            lower.push(l);
        }
        if nearly_singular(&p) {
            return Err(MyoError::VanishingMinor(k + 1));
        }
        pivots.push(p);
    }
    Ok(BidiagonalFactors {
        lower,
        pivots,
        upper: t.upper.clone(),
    })
}

/// Minimum eigenvalue of the symmetric part of a square row-major block.
pub fn min_symmetric_eigenvalue(block: &[f64], d: usize) -> f64 {
    let m = block_matrix(block, d, d);
    let sym = (&m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Largest `|M - M^T|` entry of a square row-major block.
pub fn asymmetry(block: &[f64], d: usize) -> f64 {
    let m = block_matrix(block, d, d);
    (&m - m.transpose()).abs().max()
}

/// Central differences `(loss(theta + eps) - loss(theta - eps)) / 2 eps` for
/// every scalar of the parameters and of `u`, re-solving with `solve_fn`.
pub fn finite_diff_grad<S, L>(
    params: &LevelParams,
    tree: &Tree,
    u: &RightHandSide,
    loss: L,
    eps: f64,
    solve_fn: S,
) -> Result<Cotangents>
where
    S: Fn(&LevelParams, &Tree, &RightHandSide) -> Result<RightHandSide>,
    L: Fn(&RightHandSide) -> f64,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(MyoError::InvalidArgument(format!("step must be positive, got {eps}")));
    }
    let mut grad_params = LevelParams::zeros(tree, params.block_sizes(), params.heads())?;
    let mut work = params.clone();
    let n_buffers = params.buffers().len();
    for bi in 0..n_buffers {
        let len = params.buffers()[bi].len();
        for k in 0..len {
            let orig = params.buffers()[bi][k];
            work.buffers_mut()[bi][k] = orig + eps;
            let plus = loss(&solve_fn(&work, tree, u)?);
            work.buffers_mut()[bi][k] = orig - eps;
            let minus = loss(&solve_fn(&work, tree, u)?);
            work.buffers_mut()[bi][k] = orig;
            grad_params.buffers_mut()[bi][k] = (plus - minus) / (2.0 * eps);
        }
    }
    let mut grad_u = u.zeros_like();
    let mut wu = u.clone();
    for l in 0..u.depth() {
        for k in 0..u.level(l).len() {
            let orig = u.level(l)[k];
            wu.level_mut(l)[k] = orig + eps;
            let plus = loss(&solve_fn(params, tree, &wu)?);
            wu.level_mut(l)[k] = orig - eps;
            let minus = loss(&solve_fn(params, tree, &wu)?);
            wu.level_mut(l)[k] = orig;
            grad_u.level_mut(l)[k] = (plus - minus) / (2.0 * eps);
        }
    }
    Ok(Cotangents {
        u: grad_u,
        params: grad_params,
    })
}

/// Normwise relative discrepancy `max |a - b| / max |b|` between two gradient sets.
pub fn gradient_discrepancy(a: &Cotangents, b: &Cotangents) -> f64 {
    let mut diff = a.u.max_abs_diff(&b.u);
    let mut scale = b.u.max_abs();
    for (x, y) in a.params.buffers().iter().zip(b.params.buffers()) {
        for (p, q) in x.iter().zip(y.iter()) {
            diff = diff.max((p - q).abs());
            scale = scale.max(q.abs());
        }
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
