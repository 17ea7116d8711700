//! Lowest eigenpairs of sparse symmetric matrices (Lanczos with full
//! reorthogonalization, dense fallback at small dimension), ground-state
//! observables, and the ionization threshold Σ_R by Dirichlet restriction.

use crate::error::{NelsonError, Result};
use crate::fock::FockBasis;
use crate::grid::Grid;
use crate::model::CompositeHamiltonian;
use crate::sparse::{dot, norm, CsrMatrix};
use crate::spectral::eigendecompose_dense;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DENSE_FALLBACK_DIM: usize = 2000;

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    /// columns are eigenvectors
    pub eigenvectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EigenResult {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> Vec<f64> {
        self.eigenvectors.column(0).iter().cloned().collect()
    }
}

fn residual_norm(h: &CsrMatrix, v: &[f64], e: f64) -> f64 {
    let hv = h.apply(v);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - e * b) * (a - e * b))
        .sum::<f64>()
        .sqrt()
}

/// Fix a deterministic overall sign: first entry of largest magnitude positive.
fn canonical_sign(col: &mut [f64]) {
    let mut best = 0usize;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        for v in col.iter_mut() {
            *v = -*v;
        }
    }
}

fn dense_lowest(h: &CsrMatrix, k: usize) -> Result<EigenResult> {
    let dec = eigendecompose_dense(&h.to_dense(), "dense-fallback", usize::MAX)?;
    let mut eigenvectors = DMatrix::zeros(h.dim, k);
    let mut residuals = Vec::with_capacity(k);
    for j in 0..k {
        let mut col: Vec<f64> = dec.eigenvectors.column(j).iter().cloned().collect();
        canonical_sign(&mut col);
        for i in 0..h.dim {
            eigenvectors[(i, j)] = col[i];
        }
        residuals.push(residual_norm(h, &col, dec.eigenvalues[j]));
    }
    Ok(EigenResult {
        eigenvalues: dec.eigenvalues[..k].to_vec(),
        eigenvectors,
        residuals,
        iterations: 0,
        converged: true,
    })
}

/// k smallest eigenpairs. Deterministic seeded start; residual contract
/// ‖Hψ − Eψ‖ ≤ tol·max(1, |E|) for every returned pair.
pub fn lowest_eigenpairs(h: &CsrMatrix, k: usize, tol: f64, seed: u64) -> Result<EigenResult> {
    if k == 0 || k > h.dim {
        return Err(NelsonError::InvalidParameter(format!(
            "requested {k} eigenpairs of a {}-dimensional operator",
            h.dim
        )));
    }
    if !(tol > 0.0) {
        return Err(NelsonError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if h.dim < DENSE_FALLBACK_DIM {
        return dense_lowest(h, k);
    }

    let n = h.dim;
    let max_basis = 80.min(n);
    let max_restarts = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total_iterations = 0usize;

    // converge one eigenpair at a time, deflating against the earlier ones
    let mut done_vecs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut done_vals: Vec<f64> = Vec::with_capacity(k);
    let mut done_res: Vec<f64> = Vec::with_capacity(k);

    'pairs: for _j in 0..k {
        let mut start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut start, &done_vecs);
        normalize(&mut start);

        for restart in 0..max_restarts {
            // Lanczos basis with full reorthogonalization, deflated
            let mut basis: Vec<Vec<f64>> = vec![start.clone()];
            while basis.len() < max_basis {
                let v = basis.last().unwrap().clone();
                let mut w = h.apply(&v);
                // two passes kill roundoff re-growth
                for _ in 0..2 {
                    orthogonalize(&mut w, &done_vecs);
                    orthogonalize(&mut w, &basis);
                }
                let b = norm(&w);
                total_iterations += 1;
                if b < 1e-13 {
                    break;
                }
                for x in w.iter_mut() {
                    *x /= b;
                }
                basis.push(w);
            }
            let m = basis.len();
            // Rayleigh-Ritz on the (possibly restarted) basis
            let mut proj = DMatrix::zeros(m, m);
            for (i, q) in basis.iter().enumerate() {
                let hq = h.apply(q);
                for (l, p) in basis.iter().enumerate() {
                    proj[(i, l)] = dot(p, &hq);
                }
            }
            let proj = (proj.clone() + proj.transpose()) * 0.5;
            let eig = SymmetricEigen::new(proj);
            let mut low = 0usize;
            for c in 1..m {
                if eig.eigenvalues[c] < eig.eigenvalues[low] {
                    low = c;
                }
            }
            let mut v = vec![0.0; n];
            for (l, q) in basis.iter().enumerate() {
                let c = eig.eigenvectors[(l, low)];
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi += c * qi;
                }
            }
            orthogonalize(&mut v, &done_vecs);
            normalize(&mut v);
            let e = eig.eigenvalues[low];
            let r = residual_norm(h, &v, e);
            if r <= tol * e.abs().max(1.0) {
                done_vecs.push(v);
                done_vals.push(e);
                done_res.push(r);
                continue 'pairs;
            }
            if restart + 1 == max_restarts {
                return Err(NelsonError::NoConvergence {
                    iterations: total_iterations,
                    residual: r,
                    tol,
                });
            }
            start = v;
        }
    }
    let mut eigenvectors = DMatrix::zeros(n, k);
    for (j, v) in done_vecs.iter_mut().enumerate() {
        canonical_sign(v);
        for i in 0..n {
            eigenvectors[(i, j)] = v[i];
        }
    }
    Ok(EigenResult {
        eigenvalues: done_vals,
        eigenvectors,
        residuals: done_res,
        iterations: total_iterations,
        converged: true,
    })
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    for q in against {
        let c = dot(q, w);
        for (wi, qi) in w.iter_mut().zip(q) {
            *wi -= c * qi;
        }
    }
}

fn normalize(v: &mut [f64]) {
    let s = norm(v);
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateObservables {
    pub energy: f64,
    pub vacuum_overlap: f64,
    pub mean_boson_number: f64,
    pub mode_occupations: Vec<f64>,
    pub electron_density: Vec<f64>,
}

/// Diagnostics of a normalized composite state ψ on electron⊗Fock.
pub fn observables(
    psi: &[f64],
    h: &CompositeHamiltonian,
    basis: &FockBasis,
    electron_ground: &[f64],
) -> Result<GroundStateObservables> {
    let n = h.dim();
    if psi.len() != n {
        return Err(NelsonError::DimensionMismatch(format!(
            "state length {} vs composite dimension {n}",
            psi.len()
        )));
    }
    let nrm = norm(psi);
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(NelsonError::InvalidParameter(format!(
            "state not normalized: ‖ψ‖ = {nrm}"
        )));
    }
    if electron_ground.len() != h.electron_dim {
        return Err(NelsonError::DimensionMismatch(format!(
            "electron ground state length {} vs {} nodes",
            electron_ground.len(),
            h.electron_dim
        )));
    }
    let f_dim = h.fock_dim;
    let vac = basis.vacuum_index();
    let mut overlap = 0.0;
    let mut mean_n = 0.0;
    let mut mode_occ = vec![0.0; basis.modes];
    let mut density = vec![0.0; h.electron_dim];
    for i in 0..h.electron_dim {
        overlap += electron_ground[i] * psi[i * f_dim + vac];
        for f in 0..f_dim {
            let p = psi[i * f_dim + f] * psi[i * f_dim + f];
            density[i] += p;
            mean_n += p * basis.total_number(f) as f64;
            for (m, &nm) in basis.states[f].iter().enumerate() {
                mode_occ[m] += p * nm as f64;
            }
        }
    }
    let hpsi = h.total.apply(psi);
    Ok(GroundStateObservables {
        energy: dot(psi, &hpsi),
        vacuum_overlap: overlap.abs(),
        mean_boson_number: mean_n,
        mode_occupations: mode_occ,
        electron_density: density,
    })
}

/// Lowest eigenvalue of H restricted to composite states vanishing on
/// electron nodes |X| ≤ R, for each R in the list. R = 0 means no restriction.
pub fn ionization_threshold(
    h: &CompositeHamiltonian,
    electron_grid: &Grid,
    r_list: &[f64],
    tol: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(r_list.len());
    let nodes = electron_grid.nodes();
    for &r in r_list {
        if r < 0.0 {
            return Err(NelsonError::InvalidParameter(format!(
                "negative restriction radius {r}"
            )));
        }
        let energy = if r == 0.0 {
            lowest_eigenpairs(&h.total, 1, tol, seed)?.ground_energy()
        } else {
            let keep_nodes: Vec<usize> = (0..h.electron_dim)
                .filter(|&i| {
                    let x = &nodes[i];
                    x.iter().map(|v| v * v).sum::<f64>().sqrt() > r
                })
                .collect();
            if keep_nodes.is_empty() {
                return Err(NelsonError::EmptyRestriction { radius: r });
            }
            let keep: Vec<usize> = keep_nodes
                .iter()
                .flat_map(|&i| (0..h.fock_dim).map(move |f| i * h.fock_dim + f))
                .collect();
            let restricted = h.total.restrict(&keep);
            lowest_eigenpairs(&restricted, 1, tol, seed)?.ground_energy()
        };
        out.push(energy);
    }
    Ok(out)
}

/// Normalized tensor product φ⊗(Fock basis state), as a composite vector.
pub fn product_state(
    electron: &[f64],
    fock_index: usize,
    fock_dim: usize,
) -> Vec<f64> {
    let s = norm(electron);
    let mut v = vec![0.0; electron.len() * fock_dim];
    for (i, &e) in electron.iter().enumerate() {
        v[i * fock_dim + fock_index] = e / s;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::DEFAULT_FOCK_LIMIT;
    use crate::grid::{build_grid, sample_coefficients, CoefficientSpec, ScalarField, SymmetricOperator};
    use crate::model::{assemble_h_full, CouplingOperator, ModeBasis};
    use crate::sparse::CooMatrix;

    #[test]
    fn diagonal_ground_state() {
        let h = CsrMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let r = lowest_eigenpairs(&h, 1, 1e-10, 1).unwrap();
        assert!((r.ground_energy() - 1.0).abs() < 1e-12);
        let v = r.ground_state();
        assert!((v[1].abs() - 1.0).abs() < 1e-12);
    }

    fn random_sparse_symmetric(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coo = CooMatrix::new(n);
        for i in 0..n {
            coo.push(i, i, rng.gen_range(0.0..4.0));
            for _ in 0..4 {
                let j = rng.gen_range(0..n);
                let v = rng.gen_range(-0.5..0.5);
                coo.push(i, j, v);
                coo.push(j, i, v);
            }
        }
        coo.to_csr()
    }

    #[test]
    fn dense_path_matches_oracle_500() {
        let h = random_sparse_symmetric(500, 9);
        let r = lowest_eigenpairs(&h, 3, 1e-9, 4).unwrap();
        let dec = eigendecompose_dense(&h.to_dense(), "oracle", usize::MAX).unwrap();
        for j in 0..3 {
            assert!((r.eigenvalues[j] - dec.eigenvalues[j]).abs() < 1e-9);
            assert!(r.residuals[j] <= 1e-9 * r.eigenvalues[j].abs().max(1.0));
        }
    }

    #[test]
    fn iterative_path_matches_dense() {
        // force the Lanczos path on a matrix we can still solve densely
        let n = 2100;
        let h = random_sparse_symmetric(n, 3);
        let r = lowest_eigenpairs(&h, 2, 1e-8, 11).unwrap();
        assert!(r.converged);
        assert!(r.iterations > 0);
        let dec = eigendecompose_dense(&h.to_dense(), "oracle", usize::MAX).unwrap();
        for j in 0..2 {
            assert!(
                (r.eigenvalues[j] - dec.eigenvalues[j]).abs() < 1e-7,
                "j={j}: {} vs {}",
                r.eigenvalues[j],
                dec.eigenvalues[j]
            );
        }
        // determinism: same seed, same energies to 1e-12
        let r2 = lowest_eigenpairs(&h, 2, 1e-8, 11).unwrap();
        for j in 0..2 {
            assert!((r.eigenvalues[j] - r2.eigenvalues[j]).abs() <= 1e-12);
        }
        // orthogonality of returned eigenvectors
        let g = r.eigenvectors.transpose() * &r.eigenvectors;
        assert!((g - DMatrix::identity(2, 2)).abs().max() < 1e-10);
    }

    fn confined_model(
        n_el: usize,
        n_max: usize,
    ) -> (
        SymmetricOperator,
        ModeBasis,
        CouplingOperator,
        FockBasis,
        CompositeHamiltonian,
        Grid,
    ) {
        let el = build_grid(1, 4.0, n_el).unwrap();
        let spec = CoefficientSpec::flat_with_mass(ScalarField::Const(1.0), None);
        let coeffs = sample_coefficients(&spec, &el).unwrap();
        let k = crate::grid::assemble_electron_k(&coeffs, &el).unwrap();
        let modes = ModeBasis::explicit(vec![1.0, 2.0]).unwrap();
        let basis = FockBasis::new(2, n_max, DEFAULT_FOCK_LIMIT).unwrap();
        let mut gm = DMatrix::zeros(2, n_el);
        for xi in 0..n_el {
            gm[(0, xi)] = 0.2;
            gm[(1, xi)] = -0.1;
        }
        let g = CouplingOperator::explicit(gm);
        let h = assemble_h_full(&k, &modes, &g, &basis).unwrap();
        (k, modes, g, basis, h, el)
    }

    #[test]
    fn observables_of_product_states() {
        let (k, _modes, _g, basis, h, _el) = confined_model(8, 3);
        let dec_k = eigendecompose_dense(&k.matrix.to_dense(), "K", usize::MAX).unwrap();
        let phi_k: Vec<f64> = dec_k.eigenvectors.column(0).iter().cloned().collect();
        let vac = product_state(&phi_k, basis.vacuum_index(), basis.dim());
        let obs = observables(&vac, &h, &basis, &phi_k).unwrap();
        assert!((obs.vacuum_overlap - 1.0).abs() < 1e-12);
        assert!(obs.mean_boson_number.abs() < 1e-12);
        assert!((obs.electron_density.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((obs.energy - dec_k.eigenvalues[0]).abs() < 1e-10);
        // one boson in mode 1
        let one = product_state(&phi_k, basis.index_of(&[0, 1]).unwrap(), basis.dim());
        let obs1 = observables(&one, &h, &basis, &phi_k).unwrap();
        assert!((obs1.mean_boson_number - 1.0).abs() < 1e-12);
        assert!((obs1.mode_occupations[1] - 1.0).abs() < 1e-12);
        assert!(obs1.vacuum_overlap < 1e-12);
        // unnormalized input refused
        let mut bad = vac.clone();
        bad[0] += 0.5;
        assert!(observables(&bad, &h, &basis, &phi_k).is_err());
    }

    #[test]
    fn ionization_threshold_monotone() {
        let (_k, _m, _g, _b, h, el) = confined_model(16, 2);
        let rs = [0.0, 1.0, 2.0, 3.0];
        let sig = ionization_threshold(&h, &el, &rs, 1e-9, 7).unwrap();
        let e_gs = lowest_eigenpairs(&h.total, 1, 1e-9, 7).unwrap().ground_energy();
        assert!((sig[0] - e_gs).abs() < 1e-12);
        for w in sig.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        assert!(sig[3] > e_gs);
        match ionization_threshold(&h, &el, &[100.0], 1e-9, 7) {
            Err(NelsonError::EmptyRestriction { radius }) => assert_eq!(radius, 100.0),
            other => panic!("expected empty restriction, got {other:?}"),
        }
    }
}
