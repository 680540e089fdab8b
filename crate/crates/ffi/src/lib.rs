//! C interface to the `myosotis` tree solver.
//!
//! Every fallible function returns a [`MyoStatus`]; on failure a message is
//! available from [`myo_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new`/constructor functions and released by the
//! matching `*_free`.
//!
//! Right parts cross the boundary as one flat `double` array: levels from the
//! leaves to the root, each level laid out as `(batch, heads, nodes, d, r)`
//! row-major. Parameters use the same level order with `A`, `B`, `C`
//! concatenated per level.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use myosotis::params::{init_random_stable, LevelParams, RightHandSide};
use myosotis::problem::Problem;
use myosotis::solver;
use myosotis::topology::{morton_index, snake_index, GridShape, Tree};
use myosotis::MyoError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MyoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidTopology = 2,
    InvalidGrid = 3,
    OutOfRange = 4,
    ShapeMismatch = 5,
    Singular = 6,
    InvalidArgument = 7,
    Format = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&MyoError> for MyoStatus {
    fn from(e: &MyoError) -> Self {
        match e {
            MyoError::InvalidTopology(_) => MyoStatus::InvalidTopology,
            MyoError::InvalidGrid { .. } => MyoStatus::InvalidGrid,
            MyoError::OutOfRange { .. } => MyoStatus::OutOfRange,
            MyoError::ShapeMismatch(_) => MyoStatus::ShapeMismatch,
            MyoError::Singular { .. }
            | MyoError::SingularGauge { .. }
            | MyoError::DenseSingular
            | MyoError::VanishingMinor(_) => MyoStatus::Singular,
            MyoError::GuardExceeded(_) | MyoError::InvalidArgument(_) => MyoStatus::InvalidArgument,
            MyoError::Format(_) => MyoStatus::Format,
            MyoError::Io(_) => MyoStatus::Io,
        }
    }
}

/// Tree topology handle.
pub struct MyoTree {
    inner: Tree,
}

/// Block parameters of a system on a given tree.
pub struct MyoParams {
    inner: LevelParams,
}

/// Tree, parameters and right part read from or written to a problem file.
pub struct MyoProblem {
    inner: Problem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: MyoStatus, msg: &str) -> MyoStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard<F: FnOnce() -> Result<(), (MyoStatus, String)>>(f: F) -> MyoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MyoStatus::Ok,
        Ok(Err((status, msg))) => fail(status, &msg),
        Err(_) => fail(MyoStatus::Panic, "internal panic"),
    }
}

type FfiResult<T> = Result<T, (MyoStatus, String)>;

fn lift<T>(r: myosotis::Result<T>) -> FfiResult<T> {
    r.map_err(|e| (MyoStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (MyoStatus, String) {
    (MyoStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` is null or valid for `len` reads.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` is null or valid for `len` writes.
unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `p` is null or points to a live object of type `T`.
unsafe fn borrow<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `out` is null or valid for one pointer write.
unsafe fn emit<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// # Safety
/// `path` is null or a NUL-terminated string.
unsafe fn path_arg<'a>(path: *const c_char) -> FfiResult<&'a Path> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| (MyoStatus::InvalidArgument, "path is not UTF-8".to_string()))
}

fn copy_out(src: &[f64], dst: &mut [f64]) -> FfiResult<()> {
    if dst.len() < src.len() {
        return Err((
            MyoStatus::BufferTooSmall,
            format!("buffer holds {} values, {} needed", dst.len(), src.len()),
        ));
    }
    dst[..src.len()].copy_from_slice(src);
    Ok(())
}

fn flatten_rhs(x: &RightHandSide) -> Vec<f64> {
    x.iter().copied().collect()
}

fn unflatten_rhs(tree: &Tree, params: &LevelParams, batch: usize, r: usize, data: &[f64]) -> FfiResult<RightHandSide> {
    let mut u = lift(RightHandSide::zeros(tree, params.block_sizes(), params.heads(), batch, r))?;
    if data.len() != u.scalar_count() {
        return Err((
            MyoStatus::ShapeMismatch,
            format!("right part has {} values, expected {}", data.len(), u.scalar_count()),
        ));
    }
    let mut off = 0;
    for lv in u.levels_mut() {
        let n = lv.len();
        lv.copy_from_slice(&data[off..off + n]);
        off += n;
    }
    Ok(u)
}

/// Last error message on this thread; empty if none. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn myo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn myo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Perfect `arity`-ary tree with `leaves` leaves (a power of `arity`).
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn myo_tree_perfect(arity: usize, leaves: usize, out: *mut *mut MyoTree) -> MyoStatus {
    guard(|| emit(out, MyoTree { inner: lift(Tree::perfect(arity, leaves))? }))
}

/// Chain of `len` nodes, one per level.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn myo_tree_chain(len: usize, out: *mut *mut MyoTree) -> MyoStatus {
    guard(|| emit(out, MyoTree { inner: lift(Tree::chain(len))? }))
}

/// Quadtree over a `side x side` pixel grid (`side` a power of two).
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn myo_tree_quadtree(side: usize, out: *mut *mut MyoTree) -> MyoStatus {
    guard(|| emit(out, MyoTree { inner: lift(Tree::quadtree(GridShape::square(side)))? }))
}

/// General tree from BFS level sizes (leaves first) and child-group sizes.
/// `splits` concatenates, for each level above the leaves, one group size per
/// node of that level; its length is `sum(level_sizes[1..depth])`.
///
/// # Safety
/// `level_sizes` must hold `depth` values, `splits` `splits_len` values, and
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn myo_tree_from_splits(
    level_sizes: *const usize,
    depth: usize,
    splits: *const usize,
    splits_len: usize,
    out: *mut *mut MyoTree,
) -> MyoStatus {
    guard(|| {
        let sizes = slice(level_sizes, depth, "level_sizes")?.to_vec();
        let flat = slice(splits, splits_len, "splits")?;
        let needed: usize = sizes.iter().skip(1).sum();
        if flat.len() != needed {
            return Err((
                MyoStatus::ShapeMismatch,
                format!("{} split sizes given, level sizes need {needed}", flat.len()),
            ));
        }
        let mut groups = Vec::with_capacity(depth.saturating_sub(1));
        let mut off = 0;
        for &n in sizes.iter().skip(1) {
            groups.push(flat[off..off + n].to_vec());
            off += n;
        }
        emit(out, MyoTree { inner: lift(Tree::from_splits(sizes, groups))? })
    })
}

/// # Safety
/// `tree` must come from a tree constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn myo_tree_free(tree: *mut MyoTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Number of BFS levels, or 0 for a null handle.
///
/// # Safety
/// `tree` is null or a live tree handle.
#[no_mangle]
pub unsafe extern "C" fn myo_tree_depth(tree: *const MyoTree) -> usize {
    tree.as_ref().map_or(0, |t| t.inner.depth())
}

/// Total node count, or 0 for a null handle.
///
/// # Safety
/// `tree` is null or a live tree handle.
#[no_mangle]
pub unsafe extern "C" fn myo_tree_node_count(tree: *const MyoTree) -> usize {
    tree.as_ref().map_or(0, |t| t.inner.node_count())
}

/// Copies the level sizes (leaves first) into `out`, which holds `cap` values.
///
/// # Safety
/// `tree` is a live handle and `out` is valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn myo_tree_level_sizes(tree: *const MyoTree, out: *mut usize, cap: usize) -> MyoStatus {
    guard(|| {
        let t = &borrow(tree, "tree")?.inner;
        let dst = slice_mut(out, cap, "out")?;
        if cap < t.depth() {
            return Err((MyoStatus::BufferTooSmall, format!("{} levels, buffer holds {cap}", t.depth())));
        }
        dst[..t.depth()].copy_from_slice(t.level_sizes());
        Ok(())
    })
}

/// Writes the 1-based post-order position of every node, in BFS order.
///
/// # Safety
/// `tree` is a live handle and `out` is valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn myo_tree_dfs_postorder(tree: *const MyoTree, out: *mut usize, cap: usize) -> MyoStatus {
    guard(|| {
        let t = &borrow(tree, "tree")?.inner;
        let dst = slice_mut(out, cap, "out")?;
        let pi = t.dfs_postorder();
        if cap < pi.len() {
            return Err((MyoStatus::BufferTooSmall, format!("{} nodes, buffer holds {cap}", pi.len())));
        }
        for (d, p) in dst.iter_mut().zip(pi) {
            *d = p + 1;
        }
        Ok(())
    })
}

/// 1-based Z-order position of pixel `(x, y)` on a `height x width` grid.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn myo_morton_index(x: usize, y: usize, height: usize, width: usize, out: *mut usize) -> MyoStatus {
    guard(|| {
        let pos = lift(morton_index(x, y, GridShape::new(height, width)))?;
        *out.as_mut().ok_or_else(|| null("out"))? = pos;
        Ok(())
    })
}

/// 1-based boustrophedon position of pixel `(x, y)` on a `height x width` grid.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn myo_snake_index(x: usize, y: usize, height: usize, width: usize, out: *mut usize) -> MyoStatus {
    guard(|| {
        let pos = lift(snake_index(x, y, GridShape::new(height, width)))?;
        *out.as_mut().ok_or_else(|| null("out"))? = pos;
        Ok(())
    })
}

/// Stable random parameters: identity diagonal blocks, uniform couplings
/// scaled by `coupling_scale`, and `C = -B^T`.
///
/// # Safety
/// `tree` is a live handle, `block_sizes` holds one value per level, and
/// `out` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn myo_params_init_random_stable(
    tree: *const MyoTree,
    block_sizes: *const usize,
    block_sizes_len: usize,
    heads: usize,
    seed: u64,
    coupling_scale: f64,
    out: *mut *mut MyoParams,
) -> MyoStatus {
    guard(|| {
        let t = &borrow(tree, "tree")?.inner;
        let bs = slice(block_sizes, block_sizes_len, "block_sizes")?;
        if bs.len() != t.depth() {
            return Err((
                MyoStatus::ShapeMismatch,
                format!("{} block sizes for depth {}", bs.len(), t.depth()),
            ));
        }
        let p = lift(init_random_stable(t, bs, heads, seed, coupling_scale))?;
        emit(out, MyoParams { inner: p })
    })
}

/// Parameters from a flat buffer (`A`, `B`, `C` per level, leaves first).
///
/// # Safety
/// `tree` is a live handle, `block_sizes` holds one value per level, `values`
/// holds `values_len` doubles, and `out` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn myo_params_from_values(
    tree: *const MyoTree,
    block_sizes: *const usize,
    block_sizes_len: usize,
    heads: usize,
    values: *const f64,
    values_len: usize,
    out: *mut *mut MyoParams,
) -> MyoStatus {
    guard(|| {
        let t = &borrow(tree, "tree")?.inner;
        let bs = slice(block_sizes, block_sizes_len, "block_sizes")?;
        let src = slice(values, values_len, "values")?;
        let mut p = lift(LevelParams::zeros(t, bs, heads))?;
        if src.len() != p.scalar_count() {
            return Err((
                MyoStatus::ShapeMismatch,
                format!("{} parameter values, expected {}", src.len(), p.scalar_count()),
            ));
        }
        let mut off = 0;
        for buf in p.buffers_mut() {
            let n = buf.len();
            buf.copy_from_slice(&src[off..off + n]);
            off += n;
        }
        emit(out, MyoParams { inner: p })
    })
}

/// Number of parameter scalars, or 0 for a null handle.
///
/// # Safety
/// `params` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn myo_params_len(params: *const MyoParams) -> usize {
    params.as_ref().map_or(0, |p| p.inner.scalar_count())
}

/// Copies all parameters into `out` in the flat layout.
///
/// # Safety
/// `params` is a live handle and `out` is valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn myo_params_values(params: *const MyoParams, out: *mut f64, cap: usize) -> MyoStatus {
    guard(|| {
        let p = &borrow(params, "params")?.inner;
        let flat: Vec<f64> = p.buffers().concat();
        copy_out(&flat, slice_mut(out, cap, "out")?)
    })
}

/// # Safety
/// `params` must come from a params constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn myo_params_free(params: *mut MyoParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Length of a flat right part with `batch` samples and `right_parts`
/// columns, or 0 if a handle is null or the shapes disagree.
///
/// # Safety
/// `tree` and `params` are null or live handles.
#[no_mangle]
pub unsafe extern "C" fn myo_rhs_len(
    tree: *const MyoTree,
    params: *const MyoParams,
    batch: usize,
    right_parts: usize,
) -> usize {
    let (Some(t), Some(p)) = (tree.as_ref(), params.as_ref()) else {
        return 0;
    };
    RightHandSide::zeros(&t.inner, p.inner.block_sizes(), p.inner.heads(), batch, right_parts)
        .map_or(0, |u| u.scalar_count())
}

#[allow(clippy::too_many_arguments)]
unsafe fn solve_impl(
    tree: *const MyoTree,
    params: *const MyoParams,
    batch: usize,
    right_parts: usize,
    u: *const f64,
    u_len: usize,
    x: *mut f64,
    x_len: usize,
    transpose: bool,
) -> MyoStatus {
    guard(|| {
        let t = &borrow(tree, "tree")?.inner;
        let p = &borrow(params, "params")?.inner;
        let rhs = unflatten_rhs(t, p, batch, right_parts, slice(u, u_len, "u")?)?;
        let sol = if transpose {
            lift(solver::solve_transpose(p, t, &rhs))?
        } else {
            lift(solver::solve(p, t, &rhs))?
        };
        copy_out(&flatten_rhs(&sol), slice_mut(x, x_len, "x")?)
    })
}

/// Solves `T_G x = u`. `u` and `x` both hold `myo_rhs_len(...)` values; they
/// may not overlap.
///
/// # Safety
/// Handles are live, `u` is valid for `u_len` reads and `x` for `x_len` writes.
#[no_mangle]
pub unsafe extern "C" fn myo_solve(
    tree: *const MyoTree,
    params: *const MyoParams,
    batch: usize,
    right_parts: usize,
    u: *const f64,
    u_len: usize,
    x: *mut f64,
    x_len: usize,
) -> MyoStatus {
    solve_impl(tree, params, batch, right_parts, u, u_len, x, x_len, false)
}

/// Solves `T_G^T y = g`, same layout as [`myo_solve`].
///
/// # Safety
/// Handles are live, `g` is valid for `g_len` reads and `y` for `y_len` writes.
#[no_mangle]
pub unsafe extern "C" fn myo_solve_transpose(
    tree: *const MyoTree,
    params: *const MyoParams,
    batch: usize,
    right_parts: usize,
    g: *const f64,
    g_len: usize,
    y: *mut f64,
    y_len: usize,
) -> MyoStatus {
    solve_impl(tree, params, batch, right_parts, g, g_len, y, y_len, true)
}

/// Bundles copies of a tree, parameters and flat right part into a problem.
///
/// # Safety
/// Handles are live, `u` is valid for `u_len` reads, `out` for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn myo_problem_new(
    tree: *const MyoTree,
    params: *const MyoParams,
    batch: usize,
    right_parts: usize,
    u: *const f64,
    u_len: usize,
    out: *mut *mut MyoProblem,
) -> MyoStatus {
    guard(|| {
        let t = &borrow(tree, "tree")?.inner;
        let p = &borrow(params, "params")?.inner;
        let rhs = unflatten_rhs(t, p, batch, right_parts, slice(u, u_len, "u")?)?;
        let problem = lift(Problem::new(t.clone(), p.clone(), rhs))?;
        emit(out, MyoProblem { inner: problem })
    })
}

/// # Safety
/// `path` is a NUL-terminated UTF-8 string; `out` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn myo_problem_read(path: *const c_char, out: *mut *mut MyoProblem) -> MyoStatus {
    guard(|| {
        let problem = lift(Problem::read(path_arg(path)?))?;
        emit(out, MyoProblem { inner: problem })
    })
}

/// # Safety
/// `problem` is a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn myo_problem_write(problem: *const MyoProblem, path: *const c_char) -> MyoStatus {
    guard(|| lift(borrow(problem, "problem")?.inner.write(path_arg(path)?)))
}

/// Length of the problem's flat right part (and of its solution), or 0 for null.
///
/// # Safety
/// `problem` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn myo_problem_rhs_len(problem: *const MyoProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.u.scalar_count())
}

/// Solves the stored system into `x`.
///
/// # Safety
/// `problem` is a live handle and `x` is valid for `x_len` writes.
#[no_mangle]
pub unsafe extern "C" fn myo_problem_solve(problem: *const MyoProblem, x: *mut f64, x_len: usize) -> MyoStatus {
    guard(|| {
        let p = &borrow(problem, "problem")?.inner;
        let sol = lift(solver::solve(&p.params, &p.tree, &p.u))?;
        copy_out(&flatten_rhs(&sol), slice_mut(x, x_len, "x")?)
    })
}

/// New tree handle holding a copy of the problem's topology.
///
/// # Safety
/// `problem` is a live handle and `out` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn myo_problem_tree(problem: *const MyoProblem, out: *mut *mut MyoTree) -> MyoStatus {
    guard(|| {
        let p = &borrow(problem, "problem")?.inner;
        emit(out, MyoTree { inner: p.tree.clone() })
    })
}

/// # Safety
/// `problem` must come from a problem constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn myo_problem_free(problem: *mut MyoProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}
