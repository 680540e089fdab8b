//! Solvers for block tree-structured linear systems `T_G x = u`.
//!
//! A rooted tree carries one diagonal block `A_v` per node and a pair of
//! coupling blocks `B_v` (node row, parent column) and `C_v` (parent row, node
//! column) per edge. The [`solver`] eliminates the tree level by level from the
//! leaves up and substitutes back down, costing `O(L)` work and `2(D-1)+1`
//! sequential level steps for `L` nodes on `D` levels. On a chain the system
//! reduces to a linear state-space recurrence.
//!
//! - [`topology`]: BFS-level trees, DFS post-order, Morton and snake orderings
//! - [`params`]: block parameters, right parts, initialization, gauge scaling
//! - [`solver`]: upward/downward traversal, transpose solve, vjp/jvp
//! - [`oracle`]: dense and closed-form reference implementations
//! - [`layer`]: sequence-layer wrapper with virtual-node inputs and top-k pooling
//! - [`problem`], [`cli`]: problem files and the `myo` command line

pub mod block;
pub mod cli;
pub mod error;
pub mod layer;
pub mod oracle;
pub mod params;
pub mod problem;
pub mod solver;
pub mod topology;

pub use error::{MyoError, Result};
pub use params::{init_random_stable, LevelParams, RightHandSide};
pub use problem::Problem;
pub use solver::{solve, solve_transpose, vjp};
pub use topology::{GridShape, Tree};
