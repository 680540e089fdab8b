#![allow(dead_code)]

use myosotis::params::{init_random_stable, LevelParams, RightHandSide};
use myosotis::topology::Tree;
use nalgebra::DMatrix;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub enum Family {
    Chain,
    Binary,
    Quad,
}

pub const FAMILIES: [Family; 3] = [Family::Chain, Family::Binary, Family::Quad];

pub struct Instance {
    pub tree: Tree,
    pub params: LevelParams,
    pub u: RightHandSide,
}

pub fn random_tree<R: Rng>(family: Family, rng: &mut R) -> Tree {
    match family {
        Family::Chain => Tree::chain(rng.random_range(2..=64)).unwrap(),
        Family::Binary => Tree::perfect(2, 1 << rng.random_range(1..=8)).unwrap(),
        Family::Quad => Tree::perfect(4, 1 << (2 * rng.random_range(1..=4))).unwrap(),
    }
}

/// Random parent array over `n` nodes (node 0 is the root) turned into a tree.
pub fn random_irregular_tree<R: Rng>(n: usize, rng: &mut R) -> Tree {
    let parents: Vec<Option<usize>> = (0..n)
        .map(|v| if v == 0 { None } else { Some(rng.random_range(0..v)) })
        .collect();
    Tree::from_parents(&parents).unwrap().0
}

/// Stable coupling plus a perturbed diagonal, so `T_G` is neither symmetric
/// nor trivially structured but stays well conditioned.
pub fn random_params<R: Rng>(tree: &Tree, block_sizes: &[usize], heads: usize, rng: &mut R) -> LevelParams {
    let gamma = rng.random_range(0.1..=1.0);
    let mut p = init_random_stable(tree, block_sizes, heads, rng.random(), gamma).unwrap();
    for (l, lv) in p.levels().to_vec().into_iter().enumerate() {
        let d = block_sizes[l] as f64;
        let a: Vec<f64> = lv.a.iter().map(|v| v + rng.random_range(-0.2..=0.2) / d).collect();
        p.level_mut(l).a = a;
    }
    p
}

pub fn random_instance<R: Rng>(family: Family, rng: &mut R) -> Instance {
    let tree = random_tree(family, rng);
    let d = [1, 2, 4][rng.random_range(0..3)];
    let heads = rng.random_range(1..=2);
    let r = [1, 3][rng.random_range(0..2)];
    let batch = rng.random_range(1..=2);
    let bs = vec![d; tree.depth()];
    let params = random_params(&tree, &bs, heads, rng);
    let u = RightHandSide::random(&tree, &bs, heads, batch, r, rng).unwrap();
    Instance { tree, params, u }
}

pub fn rel_err(x: &RightHandSide, reference: &RightHandSide) -> f64 {
    x.max_abs_diff(reference) / reference.max_abs().max(f64::MIN_POSITIVE)
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..=1.0))
}

/// `I + noise` with noise small enough to stay far from singular.
pub fn near_identity<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::identity(d, d) + random_matrix(d, d, 0.3 / d as f64, rng)
}
