//! Minimal CSR symmetric matrix and a Jacobi-preconditioned conjugate
//! gradient solver. Dot products and folds stay sequential so results are
//! reproducible bit-for-bit; only the row-parallel matvec uses rayon.

use crate::util::{map_indexed, map_indexed_seq};

/// Compressed sparse row matrix with f64 entries.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row (column, value) lists; each row is sorted by column.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.values[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        let mut acc = 0.0;
        for k in lo..hi {
            acc += self.values[k] * x[self.col_idx[k]];
        }
        acc
    }

    /// y = A x. Row-parallel when the `parallel` feature is on; each row is
    /// a fixed-order dot product, so the result is thread-count independent.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        map_indexed(self.n, |i| self.row_dot(i, x))
    }

    /// Sequential matvec, kept callable for benchmarks.
    pub fn mul_vec_seq(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        map_indexed_seq(self.n, |i| self.row_dot(i, x))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve (A + shift·diag(m)) x = b by preconditioned CG.
///
/// `apply` must be symmetric positive definite. Stops when the Euclidean
/// residual drops below `rel_tol`·‖b‖. Returns (x, achieved relative
/// residual, iterations).
pub fn cg_solve(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond_diag: &[f64],
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, usize) {
    let n = b.len();
    let b_norm = dot(b, b).sqrt().max(1e-300);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let inv_diag: Vec<f64> = precond_diag.iter().map(|&d| 1.0 / d.max(1e-300)).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / b_norm;
    let mut iters = 0;
    while res > rel_tol && iters < max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break; // loss of positive definiteness at round-off level
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / b_norm;
        iters += 1;
    }
    (x, res, iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian_1d_ring(n: usize, shift: f64) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                vec![
                    ((i + n - 1) % n, -1.0),
                    (i, 2.0 + shift),
                    ((i + 1) % n, -1.0),
                ]
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn csr_accessors() {
        let a = laplacian_1d_ring(5, 0.1);
        assert_eq!(a.dim(), 5);
        assert_eq!(a.nnz(), 15);
        assert_relative_eq!(a.get(2, 2), 2.1);
        assert_relative_eq!(a.get(2, 3), -1.0);
        assert_eq!(a.get(2, 0), 0.0);
        assert_relative_eq!(a.trace(), 5.0 * 2.1);
        assert_relative_eq!(a.row_sum(0), 0.1, epsilon = 1e-14);
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 64;
        let a = laplacian_1d_ring(n, 0.37);
        let x_true: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let b = a.mul_vec(&x_true);
        let diag = a.diagonal();
        let (x, res, iters) = cg_solve(|v| a.mul_vec(v), &diag, &b, None, 1e-12, 1000);
        assert!(res <= 1e-12);
        assert!(iters < 200);
        for i in 0..n {
            assert_relative_eq!(x[i], x_true[i], max_relative = 1e-9, epsilon = 1e-9);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matvec_is_bit_identical() {
        let a = laplacian_1d_ring(513, 0.05);
        let x: Vec<f64> = (0..513).map(|i| (i as f64 * 0.7).sin()).collect();
        let par = a.mul_vec(&x);
        let seq = a.mul_vec_seq(&x);
        for (p, s) in par.iter().zip(&seq) {
            assert_eq!(p.to_bits(), s.to_bits());
        }
    }
}
