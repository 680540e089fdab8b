//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{near_identity, random_instance, random_irregular_tree, random_matrix, rel_err, FAMILIES};
use myosotis::oracle::{self, BlockTridiagonal};
use myosotis::params::{apply_gauge, init_random_stable, scale_rhs, ssm_to_chain, to_row_major, GaugeBlocks};
use myosotis::params::{LevelParams, RightHandSide};
use myosotis::solver::{self, Cotangents};
use myosotis::topology::Tree;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn oracle_equivalence() -> Outcome {
    const PER_FAMILY: usize = 100;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0001);
    let (mut worst_err, mut worst_res) = (0.0f64, 0.0f64);
    let mut count = 0;
    for family in FAMILIES {
        for _ in 0..PER_FAMILY {
            let inst = random_instance(family, &mut rng);
            let x = solver::solve(&inst.params, &inst.tree, &inst.u).unwrap();
            let dense = oracle::assemble_dense(&inst.params, &inst.tree).unwrap();
            let xd = oracle::dense_solve(&dense, &inst.u).unwrap();
            worst_err = worst_err.max(rel_err(&x, &xd));
            worst_res = worst_res.max(oracle::residual(&dense, &x, &inst.u) / inst.u.max_abs());
            count += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_err <= 1e-10 && worst_res <= 1e-9 && elapsed < Duration::from_secs(120),
        format!(
            "{count} instances, max rel err {worst_err:.2e} (tol 1e-10), max residual/|u| {worst_res:.2e} (tol 1e-9), {:.1}s (limit 120s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn ssm_special_case() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0002);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let len = rng.random_range(1..=128);
        let d = if trial % 2 == 0 { 1 } else { rng.random_range(2..=4) };
        let r = rng.random_range(1..=3);
        // spectral norm of each interaction block below 1 keeps the state bounded
        let interaction: Vec<DMatrix<f64>> = (1..len).map(|_| random_matrix(d, d, 0.9 / d as f64, &mut rng)).collect();
        let input: Vec<DMatrix<f64>> = (0..len).map(|_| near_identity(d, &mut rng)).collect();
        let u: Vec<DMatrix<f64>> = (0..len).map(|_| random_matrix(d, r, 1.0, &mut rng)).collect();

        let (tree, params) = ssm_to_chain(&interaction, &input).unwrap();
        let levels = u.iter().map(to_row_major).collect();
        let rhs = RightHandSide::from_levels(&tree, &vec![d; len], 1, 1, r, levels).unwrap();
        let x = solver::solve(&params, &tree, &rhs).unwrap();

        let reference = oracle::ssm_reference(&interaction, &input, &u);
        let scale = reference.iter().fold(0.0f64, |m, b| m.max(b.amax()));
        let diff = reference
            .iter()
            .enumerate()
            .fold(0.0f64, |m, (k, b)| m.max((DMatrix::from_row_slice(d, r, x.level(k)) - b).amax()));
        worst = worst.max(diff / scale);
    }
    outcome(worst <= 1e-12, format!("50 models, max rel err {worst:.2e} (tol 1e-12)"))
}

fn chain_closed_form_inverse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0003);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for len in (1..=64).step_by(3).chain([64]) {
        let d = rng.random_range(1..=3);
        let tree = Tree::chain(len).unwrap();
        let bs = vec![d; len];
        let mut params = LevelParams::identity(&tree, &bs, 1).unwrap();
        let sub: Vec<DMatrix<f64>> = (1..len).map(|_| random_matrix(d, d, 0.95 / d as f64, &mut rng)).collect();
        for (k, s) in sub.iter().enumerate() {
            params.c_block_mut(k, 0, 0).copy_from_slice(&to_row_major(s));
        }
        let inv = oracle::assemble_dense(&params, &tree).unwrap().inverse(0).unwrap();
        for i in 0..len {
            for j in 0..len {
                let entry = oracle::chain_inverse_entry(&sub, i, j).unwrap();
                let dense = inv.view((i * d, j * d), (d, d));
                worst = worst.max((dense - entry).amax());
                checked += 1;
            }
        }
    }
    outcome(worst <= 1e-12, format!("{checked} blocks, max abs err {worst:.2e} (tol 1e-12)"))
}

fn bidirectional_factorization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0004);
    let (mut worst_lu, mut worst_solve) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let len = rng.random_range(2..=64);
        let d = rng.random_range(1..=3);
        let tree = Tree::chain(len).unwrap();
        let bs = vec![d; len];
        let mut params = LevelParams::zeros(&tree, &bs, 1).unwrap();
        // block diagonal dominance: |A| ~ 2, couplings bounded by 0.4 each
        for k in 0..len {
            let a = DMatrix::identity(d, d) * 2.0 + random_matrix(d, d, 0.2 / d as f64, &mut rng);
            params.a_block_mut(k, 0, 0).copy_from_slice(&to_row_major(&a));
            if k + 1 < len {
                let b = random_matrix(d, d, 0.4 / d as f64, &mut rng);
                let c = random_matrix(d, d, 0.4 / d as f64, &mut rng);
                params.b_block_mut(k, 0, 0).copy_from_slice(&to_row_major(&b));
                params.c_block_mut(k, 0, 0).copy_from_slice(&to_row_major(&c));
            }
        }
        let t = BlockTridiagonal::from_chain(&params, &tree, 0).unwrap();
        let f = oracle::tridiag_bidiagonal_factor(&t).unwrap();
        let dense = t.to_dense();
        let recon = (f.lower_dense() * f.upper_dense() - &dense).amax() / dense.amax();
        worst_lu = worst_lu.max(recon);

        let r = rng.random_range(1..=3);
        let u = RightHandSide::random(&tree, &bs, 1, 1, r, &mut rng).unwrap();
        let x = solver::solve(&params, &tree, &u).unwrap();
        let blocks: Vec<DMatrix<f64>> = (0..len).map(|k| DMatrix::from_row_slice(d, r, u.level(k))).collect();
        let sweep = f.solve(&blocks).unwrap();
        let scale = x.max_abs();
        for (k, s) in sweep.iter().enumerate() {
            let diff = (DMatrix::from_row_slice(d, r, x.level(k)) - s).amax();
            worst_solve = worst_solve.max(diff / scale);
        }
    }
    outcome(
        worst_lu <= 1e-12 && worst_solve <= 1e-10,
        format!("50 systems, LU reconstruction {worst_lu:.2e} (tol 1e-12), two-sweep vs tree solve {worst_solve:.2e} (tol 1e-10)"),
    )
}

fn gauge_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0005);
    let mut worst = 0.0f64;
    let trees = [
        Tree::perfect(2, 16).unwrap(),
        Tree::perfect(4, 16).unwrap(),
        Tree::chain(20).unwrap(),
        random_irregular_tree(40, &mut rng),
    ];
    let mut runs = 0;
    for tree in &trees {
        let bs: Vec<usize> = (0..tree.depth()).map(|l| 1 + (l % 3)).collect();
        let params = common::random_params(tree, &bs, 2, &mut rng);
        let u = RightHandSide::random(tree, &bs, 2, 2, 3, &mut rng).unwrap();
        let x = solver::solve(&params, tree, &u).unwrap();
        for _ in 0..20 {
            let gauge = GaugeBlocks::random(tree, &bs, 2, 0.3, &mut rng);
            let gp = apply_gauge(&params, tree, &gauge).unwrap();
            let gu = scale_rhs(&u, tree, &gauge).unwrap();
            let xg = solver::solve(&gp, tree, &gu).unwrap();
            worst = worst.max(rel_err(&xg, &x));
            runs += 1;
        }
    }
    outcome(worst <= 1e-10, format!("{runs} gauges over 4 trees, max rel err {worst:.2e} (tol 1e-10)"))
}

fn param_dot(a: &LevelParams, b: &LevelParams) -> f64 {
    a.buffers()
        .iter()
        .zip(b.buffers())
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

fn random_like(p: &LevelParams, rng: &mut ChaCha8Rng) -> LevelParams {
    let mut q = p.clone();
    for buf in q.buffers_mut() {
        buf.iter_mut().for_each(|v| *v = rng.random_range(-1.0..=1.0));
    }
    q
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0006);
    let mut trees: Vec<Tree> = [2, 4, 8, 16].iter().map(|&n| Tree::perfect(2, n).unwrap()).collect();
    trees.push(Tree::perfect(3, 9).unwrap());
    trees.push(Tree::chain(31).unwrap());
    trees.extend((0..6).map(|_| {
        let n = rng.random_range(2..=31);
        random_irregular_tree(n, &mut rng)
    }));
    let (mut worst_fd, mut worst_dot) = (0.0f64, 0.0f64);
    for tree in &trees {
        assert!(tree.node_count() <= 31);
        let bs = vec![1; tree.depth()];
        let heads = rng.random_range(1..=2);
        let r = rng.random_range(1..=2);
        let params = common::random_params(tree, &bs, heads, &mut rng);
        let u = RightHandSide::random(tree, &bs, heads, 1, r, &mut rng).unwrap();
        let w = RightHandSide::random(tree, &bs, heads, 1, r, &mut rng).unwrap();
        let x = solver::solve(&params, tree, &u).unwrap();
        let analytic: Cotangents = solver::vjp(&params, tree, &u, &x, &w).unwrap();
        let fd = oracle::finite_diff_grad(&params, tree, &u, |x| x.dot(&w), 1e-5, solver::solve).unwrap();
        worst_fd = worst_fd.max(oracle::gradient_discrepancy(&analytic, &fd));

        let dp = random_like(&params, &mut rng);
        let du = RightHandSide::random(tree, &bs, heads, 1, r, &mut rng).unwrap();
        let forward = solver::jvp(&params, tree, &x, &dp, &du).unwrap();
        let lhs = w.dot(&forward);
        let rhs = analytic.u.dot(&du) + param_dot(&analytic.params, &dp);
        worst_dot = worst_dot.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    outcome(
        worst_fd < 1e-5 && worst_dot < 1e-8,
        format!(
            "{} trees (L <= 31, d = 1), vjp vs central differences {worst_fd:.2e} (tol 1e-5), jvp/vjp adjoint {worst_dot:.2e} (tol 1e-8)",
            trees.len()
        ),
    )
}

fn complexity() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0007);

    let mut trees: Vec<Tree> = (0..=10).map(|e| Tree::perfect(2, 1 << e).unwrap()).collect();
    trees.extend((0..=5).map(|e| Tree::perfect(4, 1 << (2 * e)).unwrap()));
    trees.extend([1, 2, 17, 100].map(|n| Tree::chain(n).unwrap()));
    trees.extend((0..10).map(|_| random_irregular_tree(rng.random_range(1..200), &mut rng)));
    for tree in &trees {
        let bs = vec![2; tree.depth()];
        let params = init_random_stable(tree, &bs, 1, 1, 0.5).unwrap();
        let u = RightHandSide::random(tree, &bs, 1, 1, 1, &mut rng).unwrap();
        let (_, stats) = solver::solve_with_stats(&params, tree, &u).unwrap();
        let d = tree.depth();
        if stats.level_steps() != 2 * (d - 1) + 1 || stats.upward_steps != d - 1 || stats.downward_steps != d - 1 {
            failures.push(format!("level steps {} on depth {d}", stats.level_steps()));
        }
    }

    let mut max_dev = 0.0f64;
    let mut max_mem_dev = 0.0f64;
    for (name, build) in [
        ("binary", &(|n: usize| Tree::perfect(2, n).unwrap()) as &dyn Fn(usize) -> Tree),
        ("chain", &|n: usize| Tree::chain(2 * n - 1).unwrap()),
    ] {
        let mut prev: Option<(usize, u64, usize)> = None;
        for e in 4..=11 {
            let tree = build(1 << e);
            let bs = vec![2; tree.depth()];
            let params = init_random_stable(&tree, &bs, 1, 3, 0.5).unwrap();
            let u = RightHandSide::random(&tree, &bs, 1, 1, 1, &mut rng).unwrap();
            let (_, stats) = solver::solve_with_stats(&params, &tree, &u).unwrap();
            let cur = (tree.node_count(), stats.block_ops, stats.peak_aux_floats);
            if let Some((l0, ops0, mem0)) = prev {
                // L goes 2^e - 1 -> 2^(e+1) - 1; compare against doubling of L
                let size_ratio = cur.0 as f64 / l0 as f64;
                let ops_ratio = cur.1 as f64 / ops0 as f64;
                let mem_ratio = cur.2 as f64 / mem0 as f64;
                let dev = (ops_ratio / size_ratio * 2.0 - 2.0).abs() / 2.0;
                let mem_dev = (mem_ratio / size_ratio * 2.0 - 2.0).abs() / 2.0;
                max_dev = max_dev.max(dev);
                max_mem_dev = max_mem_dev.max(mem_dev);
                if dev > 0.10 {
                    failures.push(format!("{name}: op ratio {ops_ratio:.3} for size ratio {size_ratio:.3}"));
                }
                if mem_dev > 0.10 {
                    failures.push(format!("{name}: memory ratio {mem_ratio:.3} for size ratio {size_ratio:.3}"));
                }
            }
            prev = Some(cur);
        }
    }
    let detail = if failures.is_empty() {
        format!(
            "level steps exact on {} trees, op-count ratio within {:.1}% of 2, memory ratio within {:.1}% of 2 (tol 10%)",
            trees.len(),
            100.0 * max_dev,
            100.0 * max_mem_dev
        )
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

const MORTON_4X4: [[usize; 4]; 4] = [[1, 2, 5, 6], [3, 4, 7, 8], [9, 10, 13, 14], [11, 12, 15, 16]];
const SNAKE_4X4: [[usize; 4]; 4] = [[1, 2, 3, 4], [8, 7, 6, 5], [9, 10, 11, 12], [16, 15, 14, 13]];

fn ordering_fidelity() -> Outcome {
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for (order, table) in [("morton", MORTON_4X4), ("snake", SNAKE_4X4)] {
        let out = Command::new(env!("CARGO_BIN_EXE_myo"))
            .args(["flatten", "--height", "4", "--width", "4", "--order", order])
            .output()
            .expect("running myo");
        if !out.status.success() {
            mismatches.push(format!("{order}: exit {:?}", out.status.code()));
            continue;
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let mut seen = 0;
        for line in text.lines() {
            let v: Vec<usize> = line.split_whitespace().map(|t| t.parse().unwrap()).collect();
            let (x, y, pos) = (v[0], v[1], v[2]);
            if table[y][x] != pos {
                mismatches.push(format!("{order} ({x},{y}) = {pos}, expected {}", table[y][x]));
            }
            seen += 1;
        }
        if seen != 16 {
            mismatches.push(format!("{order}: {seen} entries"));
        }
        checked += seen;
    }
    let pass = mismatches.is_empty() && checked == 32;
    let detail = if pass {
        format!("{checked} entries match the reference 4x4 Morton and snake tables")
    } else {
        mismatches.join("; ")
    };
    outcome(pass, detail)
}

fn stability_parametrization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0009);
    let mut min_eig = f64::INFINITY;
    let mut max_asym = 0.0f64;
    let mut blocks = 0usize;
    for run in 0..100 {
        let tree = match run % 4 {
            0 => Tree::perfect(2, 1 << rng.random_range(1..=6)).unwrap(),
            1 => Tree::perfect(4, 1 << (2 * rng.random_range(1..=3))).unwrap(),
            2 => Tree::chain(rng.random_range(2..=40)).unwrap(),
            _ => random_irregular_tree(rng.random_range(2..=80), &mut rng),
        };
        let bs: Vec<usize> = (0..tree.depth()).map(|_| rng.random_range(1..=4)).collect();
        let heads = rng.random_range(1..=2);
        let gamma = rng.random_range(0.0..=1.0);
        let params = init_random_stable(&tree, &bs, heads, rng.random(), gamma).unwrap();
        let u = RightHandSide::random(&tree, &bs, heads, 1, 1, &mut rng).unwrap();
        let state = solver::upward_pass(&params, &tree, &u, true).unwrap();
        for (l, level) in state.schur.as_ref().unwrap().iter().enumerate() {
            let d = bs[l];
            for blk in level.chunks(d * d) {
                max_asym = max_asym.max(oracle::asymmetry(blk, d));
                min_eig = min_eig.min(oracle::min_symmetric_eigenvalue(blk, d));
                blocks += 1;
            }
        }
    }
    outcome(
        min_eig > 0.0 && max_asym <= 1e-12,
        format!("{blocks} Schur blocks over 100 passes, min eigenvalue {min_eig:.3e} (> 0), max asymmetry {max_asym:.1e}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("state-space special case", ssm_special_case),
        ("chain closed-form inverse", chain_closed_form_inverse),
        ("bidirectional factorization", bidirectional_factorization),
        ("gauge invariance", gauge_invariance),
        ("gradient correctness", gradient_correctness),
        ("complexity properties", complexity),
        ("ordering fidelity", ordering_fidelity),
        ("stability parametrization", stability_parametrization),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] criterion {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
