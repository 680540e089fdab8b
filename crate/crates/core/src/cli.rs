//! Command implementations behind the `myo` binary.
//!
//! Exit codes: 0 pass, 1 usage error, 2 numerical failure (singular system),
//! 3 verification failure.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::MyoError;
use crate::oracle;
use crate::params::{init_random_stable, RightHandSide};
use crate::problem::Problem;
use crate::solver::{self, SolveStats};
use crate::topology::{FlattenOrder, GridShape, Tree};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Parameter-count ceiling for `gradcheck`.
pub const GRADCHECK_MAX_PARAMS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "myo", version, about = "Tree-structured block linear solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random, deterministic problem file.
    Gen {
        #[arg(long, default_value_t = 2)]
        arity: usize,
        #[arg(long)]
        leaves: usize,
        #[arg(long, default_value_t = 1)]
        block_size: usize,
        #[arg(long, default_value_t = 1)]
        heads: usize,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 1)]
        rhs: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the tree solve of a problem file against the dense oracle.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = oracle::MAX_DENSE_NODES)]
        max_dense: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Time solves on perfect trees of increasing size.
    Bench {
        #[arg(long, default_value_t = 4)]
        arity: usize,
        #[arg(long, default_value_t = 1)]
        block_size: usize,
        /// Comma-separated leaf counts, each a power of the arity.
        #[arg(long, value_delimiter = ',', default_value = "4,16,64,256,1024")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the pixel-to-position map of a grid ordering.
    Flatten {
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long, value_enum)]
        order: OrderArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check solve gradients against central finite differences.
    Gradcheck {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderArg {
    Morton,
    Snake,
}

impl From<OrderArg> for FlattenOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Morton => FlattenOrder::Morton,
            OrderArg::Snake => FlattenOrder::Snake,
        }
    }
}

/// A failed command: message plus process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }
}

impl From<MyoError> for CliError {
    fn from(e: MyoError) -> Self {
        let code = match e {
            MyoError::Singular { .. } | MyoError::DenseSingular | MyoError::VanishingMinor(_) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Runs one command, writing its report to `out`. `Ok` carries the exit code
/// (0 or 3 for commands that pass/fail); `Err` carries usage and numerical failures.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let io = |e: std::io::Error| CliError::usage(e.to_string());
    match cli.command {
        Command::Gen {
            arity,
            leaves,
            block_size,
            heads,
            batch,
            rhs,
            gamma,
            seed,
            out: path,
        } => {
            let problem = generate(arity, leaves, block_size, heads, batch, rhs, gamma, seed)?;
            problem.write(&path)?;
            writeln!(
                out,
                "wrote {} (L = {}, depth = {})",
                path.display(),
                problem.tree.node_count(),
                problem.tree.depth()
            )
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Verify { input, max_dense, tol } => {
            let problem = Problem::read(&input)?;
            let report = verify(&problem, max_dense)?;
            let pass = report.discrepancy <= tol;
            writeln!(out, "nodes: {}", problem.tree.node_count()).map_err(io)?;
            writeln!(out, "max relative discrepancy: {:.3e}", report.discrepancy).map_err(io)?;
            writeln!(out, "relative residual: {:.3e}", report.residual).map_err(io)?;
            writeln!(out, "tolerance: {tol:.3e}").map_err(io)?;
            writeln!(out, "{}", if pass { "PASS" } else { "FAIL" }).map_err(io)?;
            Ok(if pass { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Bench {
            arity,
            block_size,
            sizes,
            repeats,
            seed,
            out: path,
        } => {
            let csv = bench(arity, block_size, &sizes, repeats, seed)?;
            match path {
                Some(p) => fs::write(&p, csv).map_err(io)?,
                None => out.write_all(csv.as_bytes()).map_err(io)?,
            }
            Ok(EXIT_OK)
        }
        Command::Flatten {
            height,
            width,
            order,
            out: path,
        } => {
            let map = flatten_map(GridShape::new(height, width), order.into())?;
            match path {
                Some(p) => fs::write(&p, map).map_err(io)?,
                None => out.write_all(map.as_bytes()).map_err(io)?,
            }
            Ok(EXIT_OK)
        }
        Command::Gradcheck { input, eps, tol } => {
            let problem = Problem::read(&input)?;
            let err = gradcheck(&problem, eps)?;
            let pass = err <= tol;
            writeln!(out, "parameters: {}", problem.params.scalar_count() + problem.u.scalar_count()).map_err(io)?;
            writeln!(out, "max relative error: {err:.3e}").map_err(io)?;
            writeln!(out, "tolerance: {tol:.3e}").map_err(io)?;
            writeln!(out, "{}", if pass { "PASS" } else { "FAIL" }).map_err(io)?;
            Ok(if pass { EXIT_OK } else { EXIT_VERIFY })
        }
    }
}

/// Deterministic random problem on a perfect tree.
#[allow(clippy::too_many_arguments)]
pub fn generate(
    arity: usize,
    leaves: usize,
    block_size: usize,
    heads: usize,
    batch: usize,
    rhs: usize,
    gamma: f64,
    seed: u64,
) -> Result<Problem, MyoError> {
    let tree = Tree::perfect(arity, leaves)?;
    let bs = vec![block_size; tree.depth()];
    let params = init_random_stable(&tree, &bs, heads, seed, gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let u = RightHandSide::random(&tree, &bs, heads, batch, rhs, &mut rng)?;
    Problem::new(tree, params, u)
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyReport {
    /// `max |x_tree - x_dense| / max |x_dense|`
    pub discrepancy: f64,
    /// `max |T x_tree - u| / max |u|`
    pub residual: f64,
}

fn relative(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn verify(problem: &Problem, max_dense: usize) -> Result<VerifyReport, CliError> {
    let nodes = problem.tree.node_count();
    if nodes > max_dense.min(oracle::MAX_DENSE_NODES) {
        return Err(CliError::usage(format!(
            "problem has {nodes} nodes, dense verification limited to {}",
            max_dense.min(oracle::MAX_DENSE_NODES)
        )));
    }
    let x = solver::solve(&problem.params, &problem.tree, &problem.u)?;
    let system = oracle::assemble_dense(&problem.params, &problem.tree)?;
    let dense = oracle::dense_solve(&system, &problem.u)?;
    Ok(VerifyReport {
        discrepancy: relative(x.max_abs_diff(&dense), dense.max_abs()),
        residual: relative(oracle::residual(&system, &x, &problem.u), problem.u.max_abs()),
    })
}

/// One CSV row per size: `L,wall_time,level_steps,block_op_count,leaves,peak_aux_floats`.
pub fn bench(arity: usize, block_size: usize, sizes: &[usize], repeats: usize, seed: u64) -> Result<String, MyoError> {
    let mut csv = String::from("L,wall_time,level_steps,block_op_count,leaves,peak_aux_floats\n");
    for &leaves in sizes {
        let problem = generate(arity, leaves, block_size, 1, 1, 1, 0.5, seed)?;
        let mut best = f64::INFINITY;
        let mut stats = SolveStats::default();
        for _ in 0..repeats.max(1) {
            let t0 = Instant::now();
            let (_, s) = solver::solve_with_stats(&problem.params, &problem.tree, &problem.u)?;
            best = best.min(t0.elapsed().as_secs_f64());
            stats = s;
        }
        writeln!(
            csv,
            "{},{:.9},{},{},{},{}",
            problem.tree.node_count(),
            best,
            stats.level_steps(),
            stats.block_ops,
            leaves,
            stats.peak_aux_floats
        )
        .expect("writing to a String");
    }
    Ok(csv)
}

/// `x y position` per pixel, rows top to bottom, 1-based positions.
pub fn flatten_map(grid: GridShape, order: FlattenOrder) -> Result<String, MyoError> {
    order.validate(grid)?;
    let mut s = String::with_capacity(grid.pixel_count() * 8);
    for y in 0..grid.height {
        for x in 0..grid.width {
            writeln!(s, "{x} {y} {}", order.index(x, y, grid)?).expect("writing to a String");
        }
    }
    Ok(s)
}

/// Normwise relative error between the vjp gradient of `loss = sum(x)` and
/// central differences, over every parameter and every entry of `u`.
pub fn gradcheck(problem: &Problem, eps: f64) -> Result<f64, CliError> {
    let count = problem.params.scalar_count() + problem.u.scalar_count();
    if count > GRADCHECK_MAX_PARAMS {
        return Err(CliError::usage(format!(
            "gradcheck refuses {count} parameters (limit {GRADCHECK_MAX_PARAMS})"
        )));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(CliError::usage("--eps must be positive"));
    }
    let (tree, params, u) = (&problem.tree, &problem.params, &problem.u);
    let x = solver::solve(params, tree, u)?;
    let mut ones = u.zeros_like();
    ones.levels_mut().iter_mut().for_each(|lv| lv.fill(1.0));
    let analytic = solver::vjp(params, tree, u, &x, &ones)?;
    let loss = |x: &RightHandSide| x.iter().sum::<f64>();
    match oracle::finite_diff_grad(params, tree, u, loss, eps, solver::solve) {
        Ok(fd) => Ok(oracle::gradient_discrepancy(&analytic, &fd)),
        // a gross step can push a perturbed system into singularity
        Err(MyoError::Singular { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}
