//! Dense kernels for the small per-node blocks.
//!
//! All blocks are row-major `&[f64]` slices; dimensions travel alongside.

/// Relative pivot threshold: a pivot smaller than this times the largest
/// magnitude in its (original) row marks the block as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Partially pivoted LU factorization of a square block.
#[derive(Debug, Clone)]
pub struct BlockLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl BlockLu {
    /// Factorizes the `n x n` row-major block `a`. Returns `None` when a pivot
    /// falls under [`PIVOT_TOL`] relative to its row scale.
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale: Vec<f64> = (0..n)
            .map(|i| lu[i * n..(i + 1) * n].iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();

        for k in 0..n {
            let (mut p, mut best) = (k, lu[k * n + k].abs());
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    p = i;
                    best = v;
                }
            }
            if best.is_nan() || best <= PIVOT_TOL * scale[perm[p]] {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Some(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A X = B` for an `n x cols` row-major right-hand side.
    pub fn solve(&self, b: &[f64], cols: usize) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n * cols);
        let mut x = vec![0.0; n * cols];
        for (i, &src) in self.perm.iter().enumerate() {
            x[i * cols..(i + 1) * cols].copy_from_slice(&b[src * cols..(src + 1) * cols]);
        }
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[i * n + k];
                if l != 0.0 {
                    for j in 0..cols {
                        x[i * cols + j] -= l * x[k * cols + j];
                    }
                }
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[i * n + k];
                if u != 0.0 {
                    for j in 0..cols {
                        x[i * cols + j] -= u * x[k * cols + j];
                    }
                }
            }
            let d = self.lu[i * n + i];
            for j in 0..cols {
                x[i * cols + j] /= d;
            }
        }
        x
    }
}

/// `c += alpha * a * b` with `a: m x k`, `b: k x n`, `c: m x n`.
pub fn gemm_acc(alpha: f64, a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        for l in 0..k {
            let s = alpha * a[i * k + l];
            if s != 0.0 {
                let brow = &b[l * n..(l + 1) * n];
                let crow = &mut c[i * n..(i + 1) * n];
                for (cv, bv) in crow.iter_mut().zip(brow) {
                    *cv += s * bv;
                }
            }
        }
    }
}

/// `c += alpha * a * b^T` with `a: m x k`, `b: n x k`, `c: m x n`.
pub fn gemm_nt_acc(alpha: f64, a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        for j in 0..n {
            let dot: f64 = (0..k).map(|l| a[i * k + l] * b[j * k + l]).sum();
            c[i * n + j] += alpha * dot;
        }
    }
}

pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}
