mod common;

use myosotis::layer::bidirectional_chain_forward;
use myosotis::oracle;
use myosotis::params::{init_random_stable, ssm_to_chain, to_row_major, LevelParams, RightHandSide};
use myosotis::solver;
use myosotis::topology::Tree;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense `T^-T g`, built from the explicit inverse rather than the solver's
/// own transposition.
fn dense_transpose_solve(params: &LevelParams, tree: &Tree, g: &RightHandSide) -> RightHandSide {
    let sys = oracle::assemble_dense(params, tree).unwrap();
    let mut y = g.zeros_like();
    for h in 0..g.heads() {
        let inv_t = sys.inverse(h).unwrap().transpose();
        for b in 0..g.batch() {
            sys.unpack(&(&inv_t * sys.pack(g, b, h)), &mut y, b, h);
        }
    }
    y
}

#[test]
fn stable_init_has_positive_definite_symmetric_part() {
    let tree = Tree::perfect(2, 4).unwrap();
    let params = init_random_stable(&tree, &[1, 1, 1], 1, 7, 0.5).unwrap();
    let t = &oracle::assemble_dense(&params, &tree).unwrap().matrices[0];
    // C = -B^T makes the off-diagonal part skew: T = I + K with K^T = -K
    let sym = (t + t.transpose()) * 0.5;
    assert!((&sym - DMatrix::identity(7, 7)).amax() < 1e-15);
    assert!(sym.symmetric_eigenvalues().min() > 0.0);
    assert!((t - t.transpose()).amax() > 0.0);
    // every eigenvalue of I + K has real part 1
    for ev in t.complex_eigenvalues().iter() {
        assert!((ev.re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn symmetric_system_transpose_solve_equals_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let tree = Tree::perfect(3, 9).unwrap();
    let bs = [2, 3, 2];
    let mut params = LevelParams::zeros(&tree, &bs, 2).unwrap();
    for l in 0..tree.depth() {
        let d = bs[l];
        for h in 0..2 {
            for i in 0..tree.level_size(l) {
                let m = common::random_matrix(d, d, 0.2, &mut rng);
                let a = DMatrix::identity(d, d) * 3.0 + &m + m.transpose();
                params.a_block_mut(l, h, i).copy_from_slice(&to_row_major(&a));
                if l + 1 < tree.depth() {
                    let b = common::random_matrix(d, bs[l + 1], 0.5, &mut rng);
                    params.b_block_mut(l, h, i).copy_from_slice(&to_row_major(&b));
                    params.c_block_mut(l, h, i).copy_from_slice(&to_row_major(&b.transpose()));
                }
            }
        }
    }
    let t = &oracle::assemble_dense(&params, &tree).unwrap().matrices[0];
    assert!((t - t.transpose()).amax() < 1e-15);
    let g = RightHandSide::random(&tree, &bs, 2, 2, 2, &mut rng).unwrap();
    let x = solver::solve(&params, &tree, &g).unwrap();
    let y = solver::solve_transpose(&params, &tree, &g).unwrap();
    assert!(common::rel_err(&y, &x) < 1e-13);
}

#[test]
fn transpose_solve_matches_dense_transpose() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let tree = Tree::chain(24).unwrap();
    let bs = vec![2; 24];
    let params = common::random_params(&tree, &bs, 2, &mut rng);
    let g = RightHandSide::random(&tree, &bs, 2, 1, 3, &mut rng).unwrap();
    let y = solver::solve_transpose(&params, &tree, &g).unwrap();
    assert!(common::rel_err(&y, &dense_transpose_solve(&params, &tree, &g)) < 1e-10);

    let tree = common::random_irregular_tree(50, &mut rng);
    let bs: Vec<usize> = (0..tree.depth()).map(|l| 1 + l % 2).collect();
    let params = common::random_params(&tree, &bs, 1, &mut rng);
    let g = RightHandSide::random(&tree, &bs, 1, 2, 1, &mut rng).unwrap();
    let y = solver::solve_transpose(&params, &tree, &g).unwrap();
    assert!(common::rel_err(&y, &dense_transpose_solve(&params, &tree, &g)) < 1e-10);

    let id = LevelParams::identity(&tree, &bs, 1).unwrap();
    assert_eq!(solver::solve_transpose(&id, &tree, &g).unwrap(), g);
}

#[test]
fn scalar_ssm_through_chain() {
    let s = vec![DMatrix::from_element(1, 1, 2.0); 3];
    let i = vec![DMatrix::from_element(1, 1, 0.5); 2];
    let (tree, params) = ssm_to_chain(&i, &s).unwrap();
    let u = RightHandSide::from_levels(&tree, &[1; 3], 1, 1, 1, vec![vec![1.0]; 3]).unwrap();
    let x = solver::solve(&params, &tree, &u).unwrap();
    assert_eq!(x.levels(), &[vec![2.0], vec![3.0], vec![3.5]]);
}

#[test]
fn ssm_chain_is_block_lower_bidiagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let d = 3;
    let len = 10;
    let input: Vec<_> = (0..len).map(|_| common::near_identity(d, &mut rng)).collect();
    let inter: Vec<_> = (1..len).map(|_| common::random_matrix(d, d, 0.5, &mut rng)).collect();
    let (tree, params) = ssm_to_chain(&inter, &input).unwrap();
    let t = &oracle::assemble_dense(&params, &tree).unwrap().matrices[0];
    for r in 0..len * d {
        for c in 0..len * d {
            let (br, bc) = (r / d, c / d);
            if bc > br || br > bc + 1 {
                assert_eq!(t[(r, c)], 0.0, "entry ({r}, {c})");
            }
        }
    }
}

#[test]
fn one_sided_chains_run_causally_or_anticausally() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let len = 12;
    let tree = Tree::chain(len).unwrap();
    let coeffs: Vec<f64> = (0..len - 1).map(|_| rng.random_range(-0.9..0.9)).collect();
    let u = RightHandSide::random(&tree, &vec![1; len], 1, 1, 1, &mut rng).unwrap();
    let uk = |k: usize| u.level(k)[0];

    // C only: x_k = u_k - c_{k-1} x_{k-1}, run from the first position
    let mut causal = LevelParams::identity(&tree, &vec![1; len], 1).unwrap();
    for (k, c) in coeffs.iter().enumerate() {
        causal.c_block_mut(k, 0, 0)[0] = *c;
    }
    let x = bidirectional_chain_forward(&causal, &tree, &u).unwrap();
    let mut prev = 0.0;
    for k in 0..len {
        let expect = uk(k) - if k > 0 { coeffs[k - 1] * prev } else { 0.0 };
        assert!((x.level(k)[0] - expect).abs() < 1e-14);
        prev = expect;
    }

    // B only: x_k = u_k - b_k x_{k+1}, run from the last position
    let mut anti = LevelParams::identity(&tree, &vec![1; len], 1).unwrap();
    for (k, b) in coeffs.iter().enumerate() {
        anti.b_block_mut(k, 0, 0)[0] = *b;
    }
    let x = bidirectional_chain_forward(&anti, &tree, &u).unwrap();
    let mut next = 0.0;
    for k in (0..len).rev() {
        let expect = uk(k) - if k + 1 < len { coeffs[k] * next } else { 0.0 };
        assert!((x.level(k)[0] - expect).abs() < 1e-14);
        next = expect;
    }
}

#[test]
fn identity_system_gradient_is_cotangent() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let tree = Tree::perfect(2, 8).unwrap();
    let bs = vec![2; tree.depth()];
    let params = LevelParams::identity(&tree, &bs, 1).unwrap();
    let u = RightHandSide::random(&tree, &bs, 1, 1, 2, &mut rng).unwrap();
    let g = RightHandSide::random(&tree, &bs, 1, 1, 2, &mut rng).unwrap();
    let x = solver::solve(&params, &tree, &u).unwrap();
    let cot = solver::vjp(&params, &tree, &u, &x, &g).unwrap();
    assert_eq!(cot.u, g);

    let fd = oracle::finite_diff_grad(&params, &tree, &u, |x| x.dot(&g), 1e-5, solver::solve).unwrap();
    assert!(fd.u.max_abs_diff(&g) < 1e-9);
}

#[test]
fn binary_tree_solve_matches_dense_oracle() {
    let tree = Tree::perfect(2, 4).unwrap();
    let params = init_random_stable(&tree, &[1; 3], 1, 7, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let u = RightHandSide::random(&tree, &[1; 3], 1, 1, 1, &mut rng).unwrap();
    let x = solver::solve(&params, &tree, &u).unwrap();
    let sys = oracle::assemble_dense(&params, &tree).unwrap();
    assert!(oracle::residual(&sys, &x, &u) <= 1e-10 * u.max_abs());
    assert!(common::rel_err(&x, &oracle::dense_solve(&sys, &u).unwrap()) <= 1e-10);
}
