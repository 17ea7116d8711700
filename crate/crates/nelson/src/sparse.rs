//! Minimal sparse symmetric matrix support: COO assembly, CSR storage,
//! mat-vec, conjugate gradients and submatrix restriction.

use crate::error::{NelsonError, Result};
use nalgebra::DMatrix;

/// Triplet accumulator used during stencil assembly.
#[derive(Debug, Clone)]
pub struct CooMatrix {
    pub dim: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(dim: usize) -> Self {
        CooMatrix {
            dim,
            triplets: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        if v != 0.0 {
            self.triplets.push((i, j, v));
        }
    }

    /// Sums duplicates and produces CSR storage with sorted columns.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut sorted = self.triplets.clone();
        sorted.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (i, j, v) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut col_idx = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        for &(i, j, v) in &merged {
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for r in 0..self.dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            dim: self.dim,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Compressed sparse row square matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(dim: usize) -> Self {
        CsrMatrix {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        CsrMatrix {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] += self.values[k];
            }
        }
        m
    }

    pub fn from_dense(m: &DMatrix<f64>, drop_tol: f64) -> Self {
        let mut coo = CooMatrix::new(m.nrows());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)].abs() > drop_tol {
                    coo.push(i, j, m[(i, j)]);
                }
            }
        }
        coo.to_csr()
    }

    /// Largest asymmetry |a_ij - a_ji|.
    pub fn max_asymmetry(&self) -> f64 {
        use std::collections::HashMap;
        let mut map: HashMap<(usize, usize), f64> = HashMap::with_capacity(self.nnz());
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                map.insert((i, self.col_idx[k]), self.values[k]);
            }
        }
        let mut worst = 0.0f64;
        for (&(i, j), &v) in &map {
            let w = map.get(&(j, i)).copied().unwrap_or(0.0);
            worst = worst.max((v - w).abs());
        }
        worst
    }

    /// A + s*I
    pub fn shifted(&self, s: f64) -> CsrMatrix {
        let mut coo = CooMatrix::new(self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                coo.push(i, self.col_idx[k], self.values[k]);
            }
            coo.push(i, i, s);
        }
        coo.to_csr()
    }

    /// A + diag(d)
    pub fn plus_diagonal(&self, d: &[f64]) -> CsrMatrix {
        assert_eq!(d.len(), self.dim);
        let mut coo = CooMatrix::new(self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                coo.push(i, self.col_idx[k], self.values[k]);
            }
            if d[i] != 0.0 {
                coo.push(i, i, d[i]);
            }
        }
        coo.to_csr()
    }

    /// Keeps only rows/columns in `keep` (ascending order expected).
    pub fn restrict(&self, keep: &[usize]) -> CsrMatrix {
        let mut inv = vec![usize::MAX; self.dim];
        for (new, &old) in keep.iter().enumerate() {
            inv[old] = new;
        }
        let mut coo = CooMatrix::new(keep.len());
        for (new_i, &old_i) in keep.iter().enumerate() {
            for k in self.row_ptr[old_i]..self.row_ptr[old_i + 1] {
                let j = inv[self.col_idx[k]];
                if j != usize::MAX {
                    coo.push(new_i, j, self.values[k]);
                }
            }
        }
        coo.to_csr()
    }

    /// Plain-text triplet export: one `row col value` per line.
    pub fn export_triplets(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.push_str(&format!("{} {} {:.16e}\n", i, self.col_idx[k], self.values[k]));
            }
        }
        out
    }

    /// Infinity-norm estimate used for symmetry tolerances.
    pub fn norm_inf(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.dim {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k].abs();
            }
            best = best.max(s);
        }
        best
    }
}

/// Conjugate gradients for SPD systems. Deterministic, zero start.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.dim;
    let nb = norm(b);
    if nb == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs = dot(&r, &r);
    for it in 0..max_iter {
        if rs.sqrt() <= rel_tol * nb {
            return Ok(x);
        }
        a.matvec(&p, &mut ap);
        let alpha = rs / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        if it == max_iter - 1 {
            break;
        }
    }
    if rs.sqrt() <= rel_tol * nb {
        Ok(x)
    } else {
        Err(NelsonError::CgNoConvergence {
            iterations: max_iter,
            residual: rs.sqrt() / nb,
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coo_to_csr_sums_duplicates() {
        let mut coo = CooMatrix::new(3);
        coo.push(0, 1, 1.0);
        coo.push(0, 1, 2.0);
        coo.push(2, 0, -1.0);
        coo.push(1, 1, 4.0);
        let csr = coo.to_csr();
        let d = csr.to_dense();
        assert_eq!(d[(0, 1)], 3.0);
        assert_eq!(d[(1, 1)], 4.0);
        assert_eq!(d[(2, 0)], -1.0);
        assert_eq!(csr.nnz(), 3);
    }

    #[test]
    fn matvec_matches_dense() {
        let mut coo = CooMatrix::new(4);
        for i in 0..4 {
            coo.push(i, i, 2.0);
            if i + 1 < 4 {
                coo.push(i, i + 1, -1.0);
                coo.push(i + 1, i, -1.0);
            }
        }
        let csr = coo.to_csr();
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = csr.apply(&x);
        let d = csr.to_dense();
        let xd = nalgebra::DVector::from_vec(x.clone());
        let yd = &d * &xd;
        for i in 0..4 {
            assert!((y[i] - yd[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn cg_solves_tridiagonal() {
        let mut coo = CooMatrix::new(50);
        for i in 0..50 {
            coo.push(i, i, 2.5);
            if i + 1 < 50 {
                coo.push(i, i + 1, -1.0);
                coo.push(i + 1, i, -1.0);
            }
        }
        let a = coo.to_csr();
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x = conjugate_gradient(&a, &b, 1e-12, 10_000).unwrap();
        let r = a.apply(&x);
        let err: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn restrict_keeps_submatrix() {
        let mut coo = CooMatrix::new(3);
        coo.push(0, 0, 1.0);
        coo.push(1, 1, 2.0);
        coo.push(2, 2, 3.0);
        coo.push(0, 2, 5.0);
        let csr = coo.to_csr();
        let r = csr.restrict(&[0, 2]);
        let d = r.to_dense();
        assert_eq!(d[(0, 0)], 1.0);
        assert_eq!(d[(1, 1)], 3.0);
        assert_eq!(d[(0, 1)], 5.0);
    }
}
