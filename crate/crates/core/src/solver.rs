//! Leaf-to-root block elimination and root-to-leaf substitution over BFS levels.
//!
//! For a parent `p` with children `c` the upward pass computes
//!
//! ```text
//! Bhat_c = -Ahat_c^-1 B_c        uhat_c = Ahat_c^-1 u_c
//! Ahat_p = A_p + sum_c C_c Bhat_c
//! uhat_p = u_p - sum_c C_c uhat_c
//! ```
//!
//! level by level, retaining `(uhat_c, Bhat_c)`. After solving the root block
//! `Ahat_R x_R = uhat_R` the downward pass recovers `x_c = uhat_c + Bhat_c x_p`.
//! Each pass takes `depth - 1` sequential level steps; all work inside a level
//! is independent across nodes, heads and batch entries.

use crate::block::{gemm_acc, gemm_nt_acc, BlockLu};
use crate::error::{MyoError, Result};
use crate::params::{LevelParams, RightHandSide};
use crate::topology::Tree;

/// Leading dimensions shared by every level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub heads: usize,
    pub batch: usize,
    pub right_parts: usize,
}

/// Counters describing the cost of a solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub upward_steps: usize,
    pub downward_steps: usize,
    pub root_solves: usize,
    /// Block factorizations, block triangular solves and block products.
    pub block_ops: u64,
    /// Peak number of auxiliary `f64`s alive at once (carry plus retained state).
    pub peak_aux_floats: usize,
}

impl SolveStats {
    /// Sequential level iterations: upward steps, the root solve, downward steps.
    pub fn level_steps(&self) -> usize {
        self.upward_steps + self.root_solves + self.downward_steps
    }
}

/// The diagonal system of one level during the upward pass: Schur-updated
/// diagonal blocks and right parts, plus the level's own couplings to its parent.
#[derive(Debug, Clone)]
pub struct LevelCarry<'a> {
    pub level: usize,
    pub nodes: usize,
    pub block: usize,
    pub parent_block: usize,
    /// `(heads, nodes, block, block)`
    pub a: Vec<f64>,
    /// `(heads, nodes, block, parent_block)`
    pub b: &'a [f64],
    /// `(heads, nodes, parent_block, block)`
    pub c: &'a [f64],
    /// `(batch, heads, nodes, block, r)`
    pub u: Vec<f64>,
}

impl<'a> LevelCarry<'a> {
    /// Unmodified level `l` of a system.
    pub fn from_level(params: &'a LevelParams, u: &RightHandSide, l: usize) -> Self {
        let lv = params.level(l);
        Self {
            level: l,
            nodes: params.level_sizes()[l],
            block: params.block_sizes()[l],
            parent_block: params.parent_block_size(l),
            a: lv.a.clone(),
            b: &lv.b,
            c: &lv.c,
            u: u.level(l).to_vec(),
        }
    }

    fn len(&self) -> usize {
        self.a.len() + self.u.len()
    }
}

/// What the downward pass needs from one eliminated level.
#[derive(Debug, Clone)]
pub struct Retained {
    pub level: usize,
    pub nodes: usize,
    pub block: usize,
    pub parent_block: usize,
    /// `(batch, heads, nodes, block, r)`
    pub u_hat: Vec<f64>,
    /// `(heads, nodes, block, parent_block)`
    pub b_hat: Vec<f64>,
}

/// One elimination step: folds the children level `carry` into `parent`.
///
/// `split` lists the child-group size of every parent node. Returns the
/// Schur-updated parent carry and the retained child quantities.
pub fn upward_step<'a>(
    carry: LevelCarry<'a>,
    mut parent: LevelCarry<'a>,
    split: &[usize],
    dims: Dims,
    stats: &mut SolveStats,
) -> Result<(LevelCarry<'a>, Retained)> {
    let (n, d, dp, r) = (carry.nodes, carry.block, carry.parent_block, dims.right_parts);
    if split.len() != parent.nodes || split.iter().sum::<usize>() != n || parent.block != dp {
        return Err(MyoError::ShapeMismatch(format!(
            "split {:?} does not connect level {} to level {}",
            split,
            carry.level + 1,
            parent.level + 1
        )));
    }
    let np = parent.nodes;
    let mut b_hat = vec![0.0; carry.b.len()];
    let mut u_hat = vec![0.0; carry.u.len()];
    for h in 0..dims.heads {
        let mut i = 0;
        for (j, &group) in split.iter().enumerate() {
            for _ in 0..group {
                let k = h * n + i;
                let lu = BlockLu::factor(&carry.a[k * d * d..(k + 1) * d * d], d).ok_or(MyoError::Singular {
                    level: carry.level + 1,
                    node: i + 1,
                    head: h + 1,
                })?;
                let bh = &mut b_hat[k * d * dp..(k + 1) * d * dp];
                for (dst, v) in bh.iter_mut().zip(lu.solve(&carry.b[k * d * dp..(k + 1) * d * dp], dp)) {
                    *dst = -v;
                }
                let c_blk = &carry.c[k * dp * d..(k + 1) * dp * d];
                let kp = h * np + j;
                gemm_acc(1.0, c_blk, bh, &mut parent.a[kp * dp * dp..(kp + 1) * dp * dp], dp, d, dp);
                stats.block_ops += 3;
                for bb in 0..dims.batch {
                    let ku = (bb * dims.heads + h) * n + i;
                    let uh = lu.solve(&carry.u[ku * d * r..(ku + 1) * d * r], r);
                    let kpu = (bb * dims.heads + h) * np + j;
                    gemm_acc(-1.0, c_blk, &uh, &mut parent.u[kpu * dp * r..(kpu + 1) * dp * r], dp, d, r);
                    u_hat[ku * d * r..(ku + 1) * d * r].copy_from_slice(&uh);
                    stats.block_ops += 2;
                }
                i += 1;
            }
        }
    }
    stats.upward_steps += 1;
    let retained = Retained {
        level: carry.level,
        nodes: n,
        block: d,
        parent_block: dp,
        u_hat,
        b_hat,
    };
    Ok((parent, retained))
}

/// One substitution step: `x_c = uhat_c + Bhat_c x_parent(c)` for a whole level.
pub fn downward_step(retained: &Retained, x_parent: &[f64], split: &[usize], dims: Dims, stats: &mut SolveStats) -> Vec<f64> {
    let (n, d, dp, r) = (retained.nodes, retained.block, retained.parent_block, dims.right_parts);
    let np = split.len();
    let mut x = retained.u_hat.clone();
    for bb in 0..dims.batch {
        for h in 0..dims.heads {
            let mut i = 0;
            for (j, &group) in split.iter().enumerate() {
                let kpu = (bb * dims.heads + h) * np + j;
                let xp = &x_parent[kpu * dp * r..(kpu + 1) * dp * r];
                for _ in 0..group {
                    let k = h * n + i;
                    let ku = (bb * dims.heads + h) * n + i;
                    gemm_acc(
                        1.0,
                        &retained.b_hat[k * d * dp..(k + 1) * d * dp],
                        xp,
                        &mut x[ku * d * r..(ku + 1) * d * r],
                        d,
                        dp,
                        r,
                    );
                    stats.block_ops += 1;
                    i += 1;
                }
            }
        }
    }
    stats.downward_steps += 1;
    x
}

/// State left by the upward pass.
#[derive(Debug, Clone)]
pub struct SolveState<'a> {
    pub retained: Vec<Retained>,
    pub root: LevelCarry<'a>,
    /// Schur-updated diagonal blocks of every level, when requested.
    pub schur: Option<Vec<Vec<f64>>>,
    pub stats: SolveStats,
    dims: Dims,
}

fn dims_of(u: &RightHandSide) -> Dims {
    Dims {
        heads: u.heads(),
        batch: u.batch(),
        right_parts: u.right_parts(),
    }
}

/// Eliminates every level below the root. With `record_schur`, the diagonal
/// blocks each level was factorized with are kept in [`SolveState::schur`].
pub fn upward_pass<'a>(params: &'a LevelParams, tree: &Tree, u: &RightHandSide, record_schur: bool) -> Result<SolveState<'a>> {
    u.check_against(tree, params)?;
    let dims = dims_of(u);
    let mut stats = SolveStats::default();
    let mut carry = LevelCarry::from_level(params, u, 0);
    let mut retained = Vec::with_capacity(tree.depth().saturating_sub(1));
    let mut schur = record_schur.then(Vec::new);
    let mut kept = 0;
    stats.peak_aux_floats = carry.len();
    for p in 1..tree.depth() {
        if let Some(s) = schur.as_mut() {
            s.push(carry.a.clone());
        }
        let parent = LevelCarry::from_level(params, u, p);
        let live = kept + carry.len() + parent.len();
        stats.peak_aux_floats = stats.peak_aux_floats.max(live);
        let (next, ret) = upward_step(carry, parent, tree.split(p), dims, &mut stats)?;
        kept += ret.u_hat.len() + ret.b_hat.len();
        stats.peak_aux_floats = stats.peak_aux_floats.max(kept + next.len());
        retained.push(ret);
        carry = next;
    }
    if let Some(s) = schur.as_mut() {
        s.push(carry.a.clone());
    }
    Ok(SolveState {
        retained,
        root: carry,
        schur,
        stats,
        dims,
    })
}

/// Solves the root block and substitutes back down to the leaves.
pub fn downward_pass(state: SolveState<'_>, tree: &Tree) -> Result<(RightHandSide, SolveStats)> {
    let SolveState {
        retained,
        root,
        mut stats,
        dims,
        ..
    } = state;
    let d = root.block;
    let r = dims.right_parts;
    let mut x_root = vec![0.0; root.u.len()];
    for h in 0..dims.heads {
        let lu = BlockLu::factor(&root.a[h * d * d..(h + 1) * d * d], d).ok_or(MyoError::Singular {
            level: root.level + 1,
            node: 1,
            head: h + 1,
        })?;
        stats.block_ops += 1;
        for bb in 0..dims.batch {
            let k = bb * dims.heads + h;
            let xs = lu.solve(&root.u[k * d * r..(k + 1) * d * r], r);
            x_root[k * d * r..(k + 1) * d * r].copy_from_slice(&xs);
            stats.block_ops += 1;
        }
    }
    stats.root_solves += 1;

    let depth = tree.depth();
    let mut levels = vec![Vec::new(); depth];
    levels[depth - 1] = x_root;
    for ret in retained.iter().rev() {
        let l = ret.level;
        levels[l] = downward_step(ret, &levels[l + 1], tree.split(l + 1), dims, &mut stats);
    }
    let block_sizes: Vec<usize> = (0..depth)
        .map(|l| retained.get(l).map_or(d, |ret| ret.block))
        .collect();
    let x = RightHandSide::from_levels(tree, &block_sizes, dims.heads, dims.batch, r, levels)?;
    Ok((x, stats))
}

/// Solves `T_G x = u`; the solution has the level structure of `u`.
pub fn solve(params: &LevelParams, tree: &Tree, u: &RightHandSide) -> Result<RightHandSide> {
    solve_with_stats(params, tree, u).map(|(x, _)| x)
}

pub fn solve_with_stats(params: &LevelParams, tree: &Tree, u: &RightHandSide) -> Result<(RightHandSide, SolveStats)> {
    let state = upward_pass(params, tree, u, false)?;
    downward_pass(state, tree)
}

/// Solves `T_G^T y = g` by running the same traversal on the transposed blocks.
pub fn solve_transpose(params: &LevelParams, tree: &Tree, g: &RightHandSide) -> Result<RightHandSide> {
    params.check_tree(tree)?;
    solve(&params.transposed(), tree, g)
}

/// Tree-structured product `T_G x`: `y_v = A_v x_v + B_v x_parent(v) + sum_c C_c x_c`.
pub fn apply(params: &LevelParams, tree: &Tree, x: &RightHandSide) -> Result<RightHandSide> {
    x.check_against(tree, params)?;
    let dims = dims_of(x);
    let r = dims.right_parts;
    let mut y = x.zeros_like();
    for l in 0..tree.depth() {
        let d = params.block_sizes()[l];
        let dp = params.parent_block_size(l);
        for bb in 0..dims.batch {
            for h in 0..dims.heads {
                for i in 0..tree.level_size(l) {
                    let xv = x.block(l, bb, h, i).to_vec();
                    gemm_acc(1.0, params.a_block(l, h, i), &xv, y.block_mut(l, bb, h, i), d, d, r);
                    if dp > 0 {
                        let p = tree.parent(l, i);
                        let xp = x.block(l + 1, bb, h, p).to_vec();
                        gemm_acc(1.0, params.b_block(l, h, i), &xp, y.block_mut(l, bb, h, i), d, dp, r);
                        gemm_acc(1.0, params.c_block(l, h, i), &xv, y.block_mut(l + 1, bb, h, p), dp, d, r);
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Cotangents produced by [`vjp`]. `params` has the shape of the parameters
/// and holds `dL/dA`, `dL/dB`, `dL/dC` summed over batch and right parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Cotangents {
    pub u: RightHandSide,
    pub params: LevelParams,
}

/// Vector-Jacobian product of `x = T_G^-1 u` given the cached solution `x`
/// and the output cotangent `g`.
///
/// With `y = T_G^-T g`: `dL/du = y` and for a block `M` at block position
/// `(v, w)`: `dL/dM = -y_v x_w^T`.
pub fn vjp(params: &LevelParams, tree: &Tree, u: &RightHandSide, x: &RightHandSide, g: &RightHandSide) -> Result<Cotangents> {
    u.check_against(tree, params)?;
    if !u.same_shape(x) || !u.same_shape(g) {
        return Err(MyoError::ShapeMismatch(
            "solution and cotangent must match the right part shape".into(),
        ));
    }
    let y = solve_transpose(params, tree, g)?;
    let dims = dims_of(u);
    let r = dims.right_parts;
    let mut dp_all = LevelParams::zeros(tree, params.block_sizes(), params.heads())?;
    for l in 0..tree.depth() {
        let d = params.block_sizes()[l];
        let dp = params.parent_block_size(l);
        for bb in 0..dims.batch {
            for h in 0..dims.heads {
                for i in 0..tree.level_size(l) {
                    let yv = y.block(l, bb, h, i);
                    let xv = x.block(l, bb, h, i);
                    gemm_nt_acc(-1.0, yv, xv, dp_all.a_block_mut(l, h, i), d, r, d);
                    if dp > 0 {
                        let p = tree.parent(l, i);
                        let xp = x.block(l + 1, bb, h, p);
                        let yp = y.block(l + 1, bb, h, p);
                        gemm_nt_acc(-1.0, yv, xp, dp_all.b_block_mut(l, h, i), d, r, dp);
                        gemm_nt_acc(-1.0, yp, xv, dp_all.c_block_mut(l, h, i), dp, r, d);
                    }
                }
            }
        }
    }
    Ok(Cotangents { u: y, params: dp_all })
}

/// Jacobian-vector product: the change of `x = T_G^-1 u` along a parameter
/// direction `dparams` and right-part direction `du`, i.e.
/// `T_G^-1 (du - dT x)`.
pub fn jvp(
    params: &LevelParams,
    tree: &Tree,
    x: &RightHandSide,
    dparams: &LevelParams,
    du: &RightHandSide,
) -> Result<RightHandSide> {
    let mut rhs = du.clone();
    rhs.axpy(-1.0, &apply(dparams, tree, x)?);
    solve(params, tree, &rhs)
}
