//! Minimal sparse/dense linear algebra used by the assembly and solver code.

use crate::parallel;
use crate::{Error, Result};

/// Compressed-row sparse matrix (square, f64).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicate entries are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for &(r, c, v) in &triplets {
            debug_assert!(r < n && c < n);
            if prev == Some((r, c)) {
                *values.last_mut().expect("non-empty") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                prev = Some((r, c));
            }
        }
        // prefix sum
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let row_ptr = &self.row_ptr;
        let col_idx = &self.col_idx;
        let values = &self.values;
        parallel::fill_indexed(y, |r| {
            let lo = row_ptr[r];
            let hi = row_ptr[r + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += values[k] * x[col_idx[k]];
            }
            acc
        });
    }

    pub fn mul_vec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// Entrywise sum; the sparsity pattern is the union of both patterns.
    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n {
            let (ca, va) = self.row(r);
            for (&c, &v) in ca.iter().zip(va) {
                triplets.push((r, c, v));
            }
            let (cb, vb) = other.row(r);
            for (&c, &v) in cb.iter().zip(vb) {
                triplets.push((r, c, v));
            }
        }
        CsrMatrix::from_triplets(self.n, triplets)
    }

    /// Symmetric Dirichlet elimination. For each constrained dof `d` with
    /// value `g`: fold `A[i,d]*g` into `rhs[i]`, zero row and column `d`, put
    /// a unit diagonal, and set `rhs[d] = g`.
    pub fn apply_dirichlet(&mut self, rhs: &mut [f64], constraints: &[(usize, f64)]) {
        let mut fixed = vec![false; self.n];
        let mut value = vec![0.0; self.n];
        for &(d, g) in constraints {
            fixed[d] = true;
            value[d] = g;
        }
        for r in 0..self.n {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            if fixed[r] {
                for k in lo..hi {
                    self.values[k] = if self.col_idx[k] == r { 1.0 } else { 0.0 };
                }
                rhs[r] = value[r];
            } else {
                for k in lo..hi {
                    let c = self.col_idx[k];
                    if fixed[c] {
                        rhs[r] -= self.values[k] * value[c];
                        self.values[k] = 0.0;
                    }
                }
            }
        }
    }

    /// Zero every row and column of a constrained dof (no unit diagonal).
    /// Used for penalty contributions that are added onto an already
    /// constrained base matrix.
    pub fn zero_constrained(&mut self, fixed: &[bool]) {
        for r in 0..self.n {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            for k in lo..hi {
                if fixed[r] || fixed[self.col_idx[k]] {
                    self.values[k] = 0.0;
                }
            }
        }
    }

    /// Per-vertex 2x2 diagonal blocks, inverted. Dof layout is interleaved
    /// (2*v, 2*v+1). Returns one `[a, b, c, d]` row-major inverse per vertex.
    pub fn block_diagonal_inverse(&self) -> Result<Vec<[f64; 4]>> {
        assert_eq!(self.n % 2, 0);
        let nv = self.n / 2;
        let mut blocks = vec![[0.0; 4]; nv];
        for v in 0..nv {
            let mut blk = [0.0f64; 4];
            for local in 0..2 {
                let r = 2 * v + local;
                let (cols, vals) = self.row(r);
                for (&c, &val) in cols.iter().zip(vals) {
                    if c == 2 * v {
                        blk[2 * local] = val;
                    } else if c == 2 * v + 1 {
                        blk[2 * local + 1] = val;
                    }
                }
            }
            let det = blk[0] * blk[3] - blk[1] * blk[2];
            if det == 0.0 {
                return Err(Error::SingularMatrix { pivot: 2 * v });
            }
            blocks[v] = [blk[3] / det, -blk[1] / det, -blk[2] / det, blk[0] / det];
        }
        Ok(blocks)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                dense[r][c] += v;
            }
        }
        dense
    }

    /// Largest relative symmetry defect max |A - A^T| / max |A|.
    pub fn symmetry_defect(&self) -> f64 {
        let dense_limit = 4000;
        assert!(
            self.n <= dense_limit,
            "symmetry_defect is a test helper for small matrices"
        );
        let d = self.to_dense();
        let mut max_abs: f64 = 0.0;
        let mut max_diff: f64 = 0.0;
        for r in 0..self.n {
            for c in 0..self.n {
                max_abs = max_abs.max(d[r][c].abs());
                max_diff = max_diff.max((d[r][c] - d[c][r]).abs());
            }
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_diff / max_abs
        }
    }
}

/// Dense LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
}

impl DenseLu {
    pub fn factor(matrix: &CsrMatrix) -> Result<Self> {
        let n = matrix.n_rows();
        let mut a = vec![0.0f64; n * n];
        for r in 0..n {
            let (cols, vals) = matrix.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                a[r * n + c] += v;
            }
        }
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for r in (k + 1)..n {
                let cand = a[r * n + k].abs();
                if cand > best {
                    best = cand;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularMatrix { pivot: k });
            }
            pivots[k] = p;
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
            }
            let inv_piv = 1.0 / a[k * n + k];
            for r in (k + 1)..n {
                let factor = a[r * n + k] * inv_piv;
                a[r * n + k] = factor;
                if factor != 0.0 {
                    for c in (k + 1)..n {
                        a[r * n + c] -= factor * a[k * n + c];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu: a, pivots })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut x = rhs.to_vec();
        // Rows were swapped in full during factorization, so the whole
        // permutation applies to the right-hand side up front.
        for k in 0..n {
            x.swap(k, self.pivots[k]);
        }
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                for r in (k + 1)..n {
                    x[r] -= self.lu[r * n + k] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for c in (k + 1)..n {
                acc -= self.lu[k * n + c] * x[c];
            }
            x[k] = acc / self.lu[k * n + k];
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // sequential by design: reduction order must not depend on threads
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
