#ifndef MYOSOTIS_H
#define MYOSOTIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MyoStatus {
  MYO_STATUS_OK = 0,
  MYO_STATUS_NULL_POINTER = 1,
  MYO_STATUS_INVALID_TOPOLOGY = 2,
  MYO_STATUS_INVALID_GRID = 3,
  MYO_STATUS_OUT_OF_RANGE = 4,
  MYO_STATUS_SHAPE_MISMATCH = 5,
  MYO_STATUS_SINGULAR = 6,
  MYO_STATUS_INVALID_ARGUMENT = 7,
  MYO_STATUS_FORMAT = 8,
  MYO_STATUS_IO = 9,
  MYO_STATUS_BUFFER_TOO_SMALL = 10,
  MYO_STATUS_PANIC = 11,
} MyoStatus;

/**
 * Block parameters of a system on a given tree.
 */
typedef struct MyoParams MyoParams;

/**
 * Tree, parameters and right part read from or written to a problem file.
 */
typedef struct MyoProblem MyoProblem;

/**
 * Tree topology handle.
 */
typedef struct MyoTree MyoTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread; empty if none. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *myo_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *myo_version(void);

/**
 * Perfect `arity`-ary tree with `leaves` leaves (a power of `arity`).
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum MyoStatus myo_tree_perfect(size_t arity, size_t leaves, struct MyoTree **out);

/**
 * Chain of `len` nodes, one per level.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum MyoStatus myo_tree_chain(size_t len, struct MyoTree **out);

/**
 * Quadtree over a `side x side` pixel grid (`side` a power of two).
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum MyoStatus myo_tree_quadtree(size_t side, struct MyoTree **out);

/**
 * General tree from BFS level sizes (leaves first) and child-group sizes.
 * `splits` concatenates, for each level above the leaves, one group size per
 * node of that level; its length is `sum(level_sizes[1..depth])`.
 *
 * # Safety
 * `level_sizes` must hold `depth` values, `splits` `splits_len` values, and
 * `out` must be valid for one pointer write.
 */
enum MyoStatus myo_tree_from_splits(const size_t *level_sizes,
                                    size_t depth,
                                    const size_t *splits,
                                    size_t splits_len,
                                    struct MyoTree **out);

/**
 * # Safety
 * `tree` must come from a tree constructor and not have been freed.
 */
void myo_tree_free(struct MyoTree *tree);

/**
 * Number of BFS levels, or 0 for a null handle.
 *
 * # Safety
 * `tree` is null or a live tree handle.
 */
size_t myo_tree_depth(const struct MyoTree *tree);

/**
 * Total node count, or 0 for a null handle.
 *
 * # Safety
 * `tree` is null or a live tree handle.
 */
size_t myo_tree_node_count(const struct MyoTree *tree);

/**
 * Copies the level sizes (leaves first) into `out`, which holds `cap` values.
 *
 * # Safety
 * `tree` is a live handle and `out` is valid for `cap` writes.
 */
enum MyoStatus myo_tree_level_sizes(const struct MyoTree *tree, size_t *out, size_t cap);

/**
 * Writes the 1-based post-order position of every node, in BFS order.
 *
 * # Safety
 * `tree` is a live handle and `out` is valid for `cap` writes.
 */
enum MyoStatus myo_tree_dfs_postorder(const struct MyoTree *tree, size_t *out, size_t cap);

/**
 * 1-based Z-order position of pixel `(x, y)` on a `height x width` grid.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum MyoStatus myo_morton_index(size_t x, size_t y, size_t height, size_t width, size_t *out);

/**
 * 1-based boustrophedon position of pixel `(x, y)` on a `height x width` grid.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum MyoStatus myo_snake_index(size_t x, size_t y, size_t height, size_t width, size_t *out);

/**
 * Stable random parameters: identity diagonal blocks, uniform couplings
 * scaled by `coupling_scale`, and `C = -B^T`.
 *
 * # Safety
 * `tree` is a live handle, `block_sizes` holds one value per level, and
 * `out` is valid for one pointer write.
 */
enum MyoStatus myo_params_init_random_stable(const struct MyoTree *tree,
                                             const size_t *block_sizes,
                                             size_t block_sizes_len,
                                             size_t heads,
                                             uint64_t seed,
                                             double coupling_scale,
                                             struct MyoParams **out);

/**
 * Parameters from a flat buffer (`A`, `B`, `C` per level, leaves first).
 *
 * # Safety
 * `tree` is a live handle, `block_sizes` holds one value per level, `values`
 * holds `values_len` doubles, and `out` is valid for one pointer write.
 */
enum MyoStatus myo_params_from_values(const struct MyoTree *tree,
                                      const size_t *block_sizes,
                                      size_t block_sizes_len,
                                      size_t heads,
                                      const double *values,
                                      size_t values_len,
                                      struct MyoParams **out);

/**
 * Number of parameter scalars, or 0 for a null handle.
 *
 * # Safety
 * `params` is null or a live handle.
 */
size_t myo_params_len(const struct MyoParams *params);

/**
 * Copies all parameters into `out` in the flat layout.
 *
 * # Safety
 * `params` is a live handle and `out` is valid for `cap` writes.
 */
enum MyoStatus myo_params_values(const struct MyoParams *params, double *out, size_t cap);

/**
 * # Safety
 * `params` must come from a params constructor and not have been freed.
 */
void myo_params_free(struct MyoParams *params);

/**
 * Length of a flat right part with `batch` samples and `right_parts`
 * columns, or 0 if a handle is null or the shapes disagree.
 *
 * # Safety
 * `tree` and `params` are null or live handles.
 */
size_t myo_rhs_len(const struct MyoTree *tree,
                   const struct MyoParams *params,
                   size_t batch,
                   size_t right_parts);

/**
 * Solves `T_G x = u`. `u` and `x` both hold `myo_rhs_len(...)` values; they
 * may not overlap.
 *
 * # Safety
 * Handles are live, `u` is valid for `u_len` reads and `x` for `x_len` writes.
 */
enum MyoStatus myo_solve(const struct MyoTree *tree,
                         const struct MyoParams *params,
                         size_t batch,
                         size_t right_parts,
                         const double *u,
                         size_t u_len,
                         double *x,
                         size_t x_len);

/**
 * Solves `T_G^T y = g`, same layout as [`myo_solve`].
 *
 * # Safety
 * Handles are live, `g` is valid for `g_len` reads and `y` for `y_len` writes.
 */
enum MyoStatus myo_solve_transpose(const struct MyoTree *tree,
                                   const struct MyoParams *params,
                                   size_t batch,
                                   size_t right_parts,
                                   const double *g,
                                   size_t g_len,
                                   double *y,
                                   size_t y_len);

/**
 * Bundles copies of a tree, parameters and flat right part into a problem.
 *
 * # Safety
 * Handles are live, `u` is valid for `u_len` reads, `out` for one pointer write.
 */
enum MyoStatus myo_problem_new(const struct MyoTree *tree,
                               const struct MyoParams *params,
                               size_t batch,
                               size_t right_parts,
                               const double *u,
                               size_t u_len,
                               struct MyoProblem **out);

/**
 * # Safety
 * `path` is a NUL-terminated UTF-8 string; `out` is valid for one pointer write.
 */
enum MyoStatus myo_problem_read(const char *path, struct MyoProblem **out);

/**
 * # Safety
 * `problem` is a live handle and `path` a NUL-terminated UTF-8 string.
 */
enum MyoStatus myo_problem_write(const struct MyoProblem *problem, const char *path);

/**
 * Length of the problem's flat right part (and of its solution), or 0 for null.
 *
 * # Safety
 * `problem` is null or a live handle.
 */
size_t myo_problem_rhs_len(const struct MyoProblem *problem);

/**
 * Solves the stored system into `x`.
 *
 * # Safety
 * `problem` is a live handle and `x` is valid for `x_len` writes.
 */
enum MyoStatus myo_problem_solve(const struct MyoProblem *problem, double *x, size_t x_len);

/**
 * New tree handle holding a copy of the problem's topology.
 *
 * # Safety
 * `problem` is a live handle and `out` is valid for one pointer write.
 */
enum MyoStatus myo_problem_tree(const struct MyoProblem *problem, struct MyoTree **out);

/**
 * # Safety
 * `problem` must come from a problem constructor and not have been freed.
 */
void myo_problem_free(struct MyoProblem *problem);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MYOSOTIS_H */
