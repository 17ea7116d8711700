//! Truncated bosonic Fock space over M modes: occupation-number basis,
//! creation/annihilation, second quantization, Segal field operators.

use crate::error::{NelsonError, Result};
use crate::sparse::{CooMatrix, CsrMatrix};

pub const DEFAULT_FOCK_LIMIT: usize = 200_000;

/// Occupation-number basis {(n_1..n_M) : Σ n_m <= n_max}, ordered by total
/// boson number, then lexicographically within each number sector.
#[derive(Debug, Clone)]
pub struct FockBasis {
    pub modes: usize,
    pub n_max: usize,
    pub states: Vec<Vec<usize>>,
    index: std::collections::HashMap<Vec<usize>, usize>,
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

impl FockBasis {
    pub fn new(modes: usize, n_max: usize, limit: usize) -> Result<Self> {
        if modes == 0 {
            return Err(NelsonError::InvalidParameter(
                "fock basis needs at least one mode".into(),
            ));
        }
        let dim = binomial(modes + n_max, n_max);
        if dim > limit {
            return Err(NelsonError::FockLimit { dim, limit });
        }
        let mut states = Vec::with_capacity(dim);
        for total in 0..=n_max {
            let mut cur = vec![0usize; modes];
            enumerate_sector(&mut cur, 0, total, &mut states);
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Self {
            modes,
            n_max,
            states,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, state: &[usize]) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// vacuum is always the first state
    pub fn vacuum_index(&self) -> usize {
        0
    }

    pub fn total_number(&self, i: usize) -> usize {
        self.states[i].iter().sum()
    }

    /// a*_m: matrix element sqrt(n_m + 1) from n to n + e_m; rows where the
    /// image exceeds n_max are simply dropped (hard truncation).
    pub fn creation(&self, mode: usize) -> Result<CsrMatrix> {
        if mode >= self.modes {
            return Err(NelsonError::InvalidParameter(format!(
                "mode {mode} out of range for {} modes",
                self.modes
            )));
        }
        let mut coo = CooMatrix::new(self.dim());
        for (col, s) in self.states.iter().enumerate() {
            let mut t = s.clone();
            t[mode] += 1;
            if let Some(row) = self.index_of(&t) {
                coo.push(row, col, ((s[mode] + 1) as f64).sqrt());
            }
        }
        Ok(coo.to_csr())
    }

    /// a_m = (a*_m)ᵀ in this real basis.
    pub fn annihilation(&self, mode: usize) -> Result<CsrMatrix> {
        if mode >= self.modes {
            return Err(NelsonError::InvalidParameter(format!(
                "mode {mode} out of range for {} modes",
                self.modes
            )));
        }
        let mut coo = CooMatrix::new(self.dim());
        for (col, s) in self.states.iter().enumerate() {
            if s[mode] == 0 {
                continue;
            }
            let mut t = s.clone();
            t[mode] -= 1;
            let row = self.index_of(&t).unwrap();
            coo.push(row, col, (s[mode] as f64).sqrt());
        }
        Ok(coo.to_csr())
    }

    /// a*(f) = Σ f_m a*_m for real f.
    pub fn creation_smeared(&self, f: &[f64]) -> Result<CsrMatrix> {
        self.check_len(f)?;
        let mut coo = CooMatrix::new(self.dim());
        for (col, s) in self.states.iter().enumerate() {
            for (m, &fm) in f.iter().enumerate() {
                if fm == 0.0 {
                    continue;
                }
                let mut t = s.clone();
                t[m] += 1;
                if let Some(row) = self.index_of(&t) {
                    coo.push(row, col, fm * ((s[m] + 1) as f64).sqrt());
                }
            }
        }
        Ok(coo.to_csr())
    }

    /// Segal field φ(f) = (a*(f) + a(f)) / √2, symmetric for real f.
    pub fn field_op(&self, f: &[f64]) -> Result<CsrMatrix> {
        self.check_len(f)?;
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut coo = CooMatrix::new(self.dim());
        for (col, s) in self.states.iter().enumerate() {
            for (m, &fm) in f.iter().enumerate() {
                if fm == 0.0 {
                    continue;
                }
                let mut up = s.clone();
                up[m] += 1;
                if let Some(row) = self.index_of(&up) {
                    coo.push(row, col, inv_sqrt2 * fm * ((s[m] + 1) as f64).sqrt());
                }
                if s[m] > 0 {
                    let mut down = s.clone();
                    down[m] -= 1;
                    let row = self.index_of(&down).unwrap();
                    coo.push(row, col, inv_sqrt2 * fm * (s[m] as f64).sqrt());
                }
            }
        }
        Ok(coo.to_csr())
    }

    /// dΓ(b) for diagonal one-particle b: diagonal with entries Σ_m b_m n_m.
    pub fn second_quantize_diagonal(&self, b: &[f64]) -> Result<CsrMatrix> {
        self.check_len(b)?;
        let diag: Vec<f64> = self
            .states
            .iter()
            .map(|s| s.iter().zip(b).map(|(&n, &bm)| n as f64 * bm).sum())
            .collect();
        Ok(CsrMatrix::from_diagonal(&diag))
    }

    /// Number operator N = dΓ(1).
    pub fn number_operator(&self) -> CsrMatrix {
        let diag: Vec<f64> = (0..self.dim()).map(|i| self.total_number(i) as f64).collect();
        CsrMatrix::from_diagonal(&diag)
    }

    /// (N + 1)^{-1/2} as a diagonal matrix.
    pub fn number_shift_inv_sqrt(&self) -> CsrMatrix {
        let diag: Vec<f64> = (0..self.dim())
            .map(|i| 1.0 / ((self.total_number(i) as f64 + 1.0).sqrt()))
            .collect();
        CsrMatrix::from_diagonal(&diag)
    }

    /// Indices of states with total number <= n_max - 1: on this subspace the
    /// truncated CCR [a_m, a*_k] = δ_{mk} holds without edge effects.
    pub fn protected_indices(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.total_number(i) + 1 <= self.n_max)
            .collect()
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.modes {
            return Err(NelsonError::DimensionMismatch(format!(
                "vector length {} vs {} modes",
                f.len(),
                self.modes
            )));
        }
        Ok(())
    }
}

fn enumerate_sector(cur: &mut Vec<usize>, mode: usize, remaining: usize, out: &mut Vec<Vec<usize>>) {
    if mode + 1 == cur.len() {
        cur[mode] = remaining;
        out.push(cur.clone());
        cur[mode] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        cur[mode] = k;
        enumerate_sector(cur, mode + 1, remaining - k, out);
    }
    cur[mode] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::operator_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimensions_and_ordering() {
        let b = FockBasis::new(3, 2, DEFAULT_FOCK_LIMIT).unwrap();
        assert_eq!(b.dim(), 10); // C(5,2)
        assert_eq!(b.states[0], vec![0, 0, 0]);
        // number sectors in order
        let mut last_total = 0;
        for i in 0..b.dim() {
            let t = b.total_number(i);
            assert!(t >= last_total);
            last_total = t;
        }
        // single-boson sector lexicographic descending in first mode:
        assert_eq!(b.states[1], vec![1, 0, 0]);
        assert_eq!(b.states[2], vec![0, 1, 0]);
        assert_eq!(b.states[3], vec![0, 0, 1]);
    }

    #[test]
    fn fock_limit_refusal() {
        match FockBasis::new(10, 10, 100) {
            Err(NelsonError::FockLimit { dim, limit }) => {
                assert_eq!(dim, 184_756);
                assert_eq!(limit, 100);
            }
            other => panic!("expected FockLimit, got {other:?}"),
        }
    }

    #[test]
    fn creation_adjoint_of_annihilation() {
        let b = FockBasis::new(3, 4, DEFAULT_FOCK_LIMIT).unwrap();
        for m in 0..3 {
            let c = b.creation(m).unwrap().to_dense();
            let a = b.annihilation(m).unwrap().to_dense();
            assert_eq!((c.transpose() - a).abs().max(), 0.0);
        }
    }

    #[test]
    fn ccr_on_protected_subspace() {
        let b = FockBasis::new(3, 5, DEFAULT_FOCK_LIMIT).unwrap();
        let keep = b.protected_indices();
        for m in 0..3 {
            for k in 0..3 {
                let am = b.annihilation(m).unwrap().to_dense();
                let ck = b.creation(k).unwrap().to_dense();
                let comm = &am * &ck - &ck * &am;
                let delta = if m == k { 1.0 } else { 0.0 };
                for &i in &keep {
                    for &j in &keep {
                        let want = if i == j { delta } else { 0.0 };
                        assert!(
                            (comm[(i, j)] - want).abs() < 1e-13,
                            "[a_{m}, a*_{k}] at ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn number_operator_counts() {
        let b = FockBasis::new(2, 3, DEFAULT_FOCK_LIMIT).unwrap();
        let n = b.number_operator();
        // N = Σ a*_m a_m on the whole truncated space
        let mut sum = nalgebra::DMatrix::zeros(b.dim(), b.dim());
        for m in 0..2 {
            let c = b.creation(m).unwrap().to_dense();
            let a = b.annihilation(m).unwrap().to_dense();
            sum += c * a;
        }
        assert!((n.to_dense() - sum).abs().max() < 1e-13);
    }

    #[test]
    fn field_op_symmetric_and_matches_parts() {
        let b = FockBasis::new(4, 3, DEFAULT_FOCK_LIMIT).unwrap();
        let f = vec![0.3, -1.2, 0.0, 2.5];
        let phi = b.field_op(&f).unwrap().to_dense();
        assert!((phi.clone() - phi.transpose()).abs().max() < 1e-15);
        let cs = b.creation_smeared(&f).unwrap().to_dense();
        let want = (&cs + cs.transpose()) * std::f64::consts::FRAC_1_SQRT_2;
        assert!((phi - want).abs().max() < 1e-15);
    }

    #[test]
    fn second_quantize_harmonic_spectrum() {
        // dΓ(ω) for ω = (1, 2): eigenvalues are n1 + 2 n2
        let b = FockBasis::new(2, 4, DEFAULT_FOCK_LIMIT).unwrap();
        let d = b.second_quantize_diagonal(&[1.0, 2.0]).unwrap();
        let dd = d.to_dense();
        for (i, s) in b.states.iter().enumerate() {
            assert_eq!(dd[(i, i)], (s[0] + 2 * s[1]) as f64);
        }
    }

    #[test]
    fn ju88_number_bound() {
        // ‖a^♯(v)(N+1)^{-1/2}‖ <= ‖v‖
        let b = FockBasis::new(4, 6, DEFAULT_FOCK_LIMIT).unwrap();
        let shift = b.number_shift_inv_sqrt().to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let a = b
                .creation_smeared(&v)
                .unwrap()
                .to_dense()
                .transpose();
            let prod = &a * &shift;
            assert!(operator_norm(&prod) <= vnorm * (1.0 + 1e-10));
        }
    }
}
