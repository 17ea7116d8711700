//! Coupling operator v(X) = ω^{-1/2}ρ(·−X), composite Hamiltonians
//! H = K⊗1 + 1⊗dΓ(ω) + φ(v(X)) on electron⊗Fock, and the infrared-cutoff
//! variants H_σ (coupling scaled by χ(ω/σ)) and H̃_σ (dispersion floored at σ).

use crate::error::{NelsonError, Result};
use crate::fock::FockBasis;
use crate::grid::{Grid, ScalarField, SymmetricOperator};
use crate::sparse::{conjugate_gradient, dot, CooMatrix, CsrMatrix};
use crate::spectral::{eigendecompose_dense, CutoffProfile, SpectralDecomposition};
use nalgebra::DMatrix;

/// Retained eigenmodes of ω = h^{1/2}: energies ascending, grid-orthonormal
/// eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub energies: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl ModeBasis {
    /// Lowest `keep` modes from a decomposition of h (ω_m = √λ_m).
    pub fn from_h_decomposition(dec_h: &SpectralDecomposition, keep: usize) -> Result<Self> {
        if keep == 0 || keep > dec_h.dim() {
            return Err(NelsonError::InvalidParameter(format!(
                "cannot keep {keep} of {} modes",
                dec_h.dim()
            )));
        }
        let lam_min = dec_h.lambda_min();
        if lam_min.max(0.0).sqrt() < 1e-12 {
            return Err(NelsonError::Singularity {
                eigenvalue: lam_min,
            });
        }
        let energies = dec_h.eigenvalues[..keep].iter().map(|l| l.sqrt()).collect();
        let vectors = dec_h.eigenvectors.columns(0, keep).into_owned();
        Ok(Self { energies, vectors })
    }

    /// Synthetic basis with prescribed energies (identity mode vectors);
    /// used for pinned-electron oracle models.
    pub fn explicit(energies: Vec<f64>) -> Result<Self> {
        if energies.iter().any(|&w| w <= 0.0) {
            return Err(NelsonError::InvalidParameter(
                "mode energies must be positive".into(),
            ));
        }
        let m = energies.len();
        Ok(Self {
            energies,
            vectors: DMatrix::identity(m, m),
        })
    }

    pub fn count(&self) -> usize {
        self.energies.len()
    }
}

/// Coupling matrix g[m][X] = ⟨mode_m, ω^{-1/2}ρ_X⟩·Δx^{d/2}, plus untruncated
/// column norms ‖ω^{-β}ρ_X‖ on the full boson grid for β ∈ {1/2, 1, 3/2}.
#[derive(Debug, Clone)]
pub struct CouplingOperator {
    pub g: DMatrix<f64>,
    pub norms_half: Vec<f64>,
    pub norms_one: Vec<f64>,
    pub norms_three_half: Vec<f64>,
}

impl CouplingOperator {
    /// Synthetic coupling from an explicit g matrix (modes × electron nodes).
    pub fn explicit(g: DMatrix<f64>) -> Self {
        let col_norm = |j: usize| g.column(j).norm();
        let norms: Vec<f64> = (0..g.ncols()).map(col_norm).collect();
        Self {
            norms_half: norms.clone(),
            norms_one: norms.clone(),
            norms_three_half: norms,
            g,
        }
    }

    pub fn modes(&self) -> usize {
        self.g.nrows()
    }

    pub fn electron_nodes(&self) -> usize {
        self.g.ncols()
    }

    pub fn column_norm(&self, x: usize) -> f64 {
        self.g.column(x).norm()
    }

    pub fn sup_norm(&self, beta: f64) -> Result<f64> {
        let v = match beta {
            b if b == 0.5 => &self.norms_half,
            b if b == 1.0 => &self.norms_one,
            b if b == 1.5 => &self.norms_three_half,
            _ => {
                return Err(NelsonError::InvalidParameter(format!(
                    "no stored column norms for beta = {beta}"
                )))
            }
        };
        Ok(v.iter().cloned().fold(0.0, f64::max))
    }
}

/// ρ(·−X) sampled on the boson grid, divided by the fixed normalization
/// q = Σ ρ(x) Δx^d taken at X = 0 so the total charge is 1 on the grid.
pub fn sample_charge_columns(
    rho: &ScalarField,
    boson_grid: &Grid,
    positions: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let nodes = boson_grid.nodes();
    let vol = boson_grid.cell_volume();
    let q: f64 = nodes.iter().map(|x| rho.eval(x)).sum::<f64>() * vol;
    positions
        .iter()
        .map(|xp| {
            nodes
                .iter()
                .map(|x| {
                    if q == 0.0 {
                        0.0
                    } else {
                        let shifted: Vec<f64> =
                            x.iter().zip(xp).map(|(a, b)| a - b).collect();
                        rho.eval(&shifted) / q
                    }
                })
                .collect()
        })
        .collect()
}

pub fn coupling_operator(
    rho: &ScalarField,
    dec_h: &SpectralDecomposition,
    modes: &ModeBasis,
    boson_grid: &Grid,
    electron_grid: &Grid,
) -> Result<CouplingOperator> {
    if dec_h.dim() != boson_grid.node_count() {
        return Err(NelsonError::DimensionMismatch(format!(
            "h decomposition dim {} vs boson grid {}",
            dec_h.dim(),
            boson_grid.node_count()
        )));
    }
    let lam_min = dec_h.lambda_min();
    if lam_min.max(0.0).sqrt() < 1e-12 {
        return Err(NelsonError::Singularity {
            eigenvalue: lam_min,
        });
    }
    let m_keep = modes.count();
    let n_x = electron_grid.node_count();
    let vol = boson_grid.cell_volume();
    let half_weight = vol.sqrt();
    let columns = sample_charge_columns(rho, boson_grid, &electron_grid.nodes());

    let mut g = DMatrix::zeros(m_keep, n_x);
    let mut norms_half = vec![0.0; n_x];
    let mut norms_one = vec![0.0; n_x];
    let mut norms_three_half = vec![0.0; n_x];
    for (xi, col) in columns.iter().enumerate() {
        let r = nalgebra::DVector::from_column_slice(col);
        let c = dec_h.eigenvectors.transpose() * r;
        let mut s_half = 0.0;
        let mut s_one = 0.0;
        let mut s_three = 0.0;
        for (k, &lam) in dec_h.eigenvalues.iter().enumerate() {
            let c2 = c[k] * c[k];
            s_half += c2 / lam.sqrt();
            s_one += c2 / lam;
            s_three += c2 / lam.powf(1.5);
        }
        norms_half[xi] = (s_half * vol).sqrt();
        norms_one[xi] = (s_one * vol).sqrt();
        norms_three_half[xi] = (s_three * vol).sqrt();
        for m in 0..m_keep {
            // retained modes are the lowest dec_h eigenvectors
            g[(m, xi)] = half_weight * c[m] / dec_h.eigenvalues[m].powf(0.25);
        }
    }
    let coupling = CouplingOperator {
        g,
        norms_half,
        norms_one,
        norms_three_half,
    };
    for xi in 0..n_x {
        if coupling.column_norm(xi) > coupling.norms_half[xi] * (1.0 + 1e-10) + 1e-300 {
            return Err(NelsonError::InvalidParameter(format!(
                "coupling column {xi} exceeds its full-grid norm"
            )));
        }
    }
    Ok(coupling)
}

/// Composite Hamiltonian on electron⊗Fock with the three summands kept
/// separately; composite index is electron_node * fock_dim + fock_index.
#[derive(Debug, Clone)]
pub struct CompositeHamiltonian {
    pub total: CsrMatrix,
    pub k_part: CsrMatrix,
    pub dgamma_part: CsrMatrix,
    pub phi_part: CsrMatrix,
    pub electron_dim: usize,
    pub fock_dim: usize,
    pub label: String,
}

impl CompositeHamiltonian {
    pub fn dim(&self) -> usize {
        self.electron_dim * self.fock_dim
    }

    pub fn composite_index(&self, electron: usize, fock: usize) -> usize {
        electron * self.fock_dim + fock
    }
}

fn kron_k_with_identity(k: &CsrMatrix, fock_dim: usize) -> CsrMatrix {
    let dim = k.dim * fock_dim;
    let mut coo = CooMatrix::new(dim);
    for i in 0..k.dim {
        for idx in k.row_ptr[i]..k.row_ptr[i + 1] {
            let j = k.col_idx[idx];
            let v = k.values[idx];
            for f in 0..fock_dim {
                coo.push(i * fock_dim + f, j * fock_dim + f, v);
            }
        }
    }
    coo.to_csr()
}

fn assemble_from_parts(
    k_op: &SymmetricOperator,
    mode_energies: &[f64],
    g: &DMatrix<f64>,
    basis: &FockBasis,
    label: &str,
) -> Result<CompositeHamiltonian> {
    let n_x = k_op.dim();
    if g.ncols() != n_x {
        return Err(NelsonError::DimensionMismatch(format!(
            "coupling has {} electron columns, K has dimension {n_x}",
            g.ncols()
        )));
    }
    if g.nrows() != basis.modes || mode_energies.len() != basis.modes {
        return Err(NelsonError::DimensionMismatch(format!(
            "{} modes vs Fock basis over {} modes",
            g.nrows(),
            basis.modes
        )));
    }
    let f_dim = basis.dim();
    let k_part = kron_k_with_identity(&k_op.matrix, f_dim);

    let fock_energies = basis.second_quantize_diagonal(mode_energies)?;
    let mut diag = vec![0.0; n_x * f_dim];
    for i in 0..n_x {
        for f in 0..f_dim {
            diag[i * f_dim + f] = fock_energies.values[fock_energies.row_ptr[f]
                ..fock_energies.row_ptr[f + 1]]
                .first()
                .copied()
                .unwrap_or(0.0);
        }
    }
    let dgamma_part = CsrMatrix::from_diagonal(&diag);

    let mut phi_coo = CooMatrix::new(n_x * f_dim);
    for xi in 0..n_x {
        let col: Vec<f64> = g.column(xi).iter().cloned().collect();
        if col.iter().all(|&v| v == 0.0) {
            continue;
        }
        let phi = basis.field_op(&col)?;
        for a in 0..f_dim {
            for idx in phi.row_ptr[a]..phi.row_ptr[a + 1] {
                phi_coo.push(xi * f_dim + a, xi * f_dim + phi.col_idx[idx], phi.values[idx]);
            }
        }
    }
    let phi_part = phi_coo.to_csr();

    let mut total = CooMatrix::new(n_x * f_dim);
    for part in [&k_part, &dgamma_part, &phi_part] {
        for i in 0..part.dim {
            for idx in part.row_ptr[i]..part.row_ptr[i + 1] {
                total.push(i, part.col_idx[idx], part.values[idx]);
            }
        }
    }
    let total = total.to_csr();
    let asym = total.max_asymmetry();
    if asym > 1e-12 {
        return Err(NelsonError::InvalidParameter(format!(
            "assembled Hamiltonian asymmetric by {asym:.3e}"
        )));
    }
    Ok(CompositeHamiltonian {
        total,
        k_part,
        dgamma_part,
        phi_part,
        electron_dim: n_x,
        fock_dim: f_dim,
        label: label.to_string(),
    })
}

pub fn assemble_h_full(
    k_op: &SymmetricOperator,
    modes: &ModeBasis,
    g: &CouplingOperator,
    basis: &FockBasis,
) -> Result<CompositeHamiltonian> {
    assemble_from_parts(k_op, &modes.energies, &g.g, basis, "H")
}

pub fn assemble_h_sigma(
    k_op: &SymmetricOperator,
    modes: &ModeBasis,
    g: &CouplingOperator,
    basis: &FockBasis,
    sigma: f64,
) -> Result<CompositeHamiltonian> {
    if !(sigma > 0.0) {
        return Err(NelsonError::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let chi = CutoffProfile;
    let mut g_sigma = g.g.clone();
    for (m, &w) in modes.energies.iter().enumerate() {
        let scale = chi.chi(w / sigma);
        for xi in 0..g_sigma.ncols() {
            g_sigma[(m, xi)] *= scale;
        }
    }
    assemble_from_parts(k_op, &modes.energies, &g_sigma, basis, "H_sigma")
}

pub fn assemble_h_tilde_sigma(
    k_op: &SymmetricOperator,
    modes: &ModeBasis,
    g: &CouplingOperator,
    basis: &FockBasis,
    sigma: f64,
) -> Result<CompositeHamiltonian> {
    if !(sigma > 0.0) {
        return Err(NelsonError::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let chi = CutoffProfile;
    let mut g_sigma = g.g.clone();
    let mut energies_sigma = Vec::with_capacity(modes.count());
    for (m, &w) in modes.energies.iter().enumerate() {
        let scale = chi.chi(w / sigma);
        for xi in 0..g_sigma.ncols() {
            g_sigma[(m, xi)] *= scale;
        }
        energies_sigma.push(chi.ir_dispersion_map(w, sigma));
    }
    assemble_from_parts(k_op, &energies_sigma, &g_sigma, basis, "H_tilde_sigma")
}

/// Operator norm and leading singular values of [ω^{-β}ρ_X]·(K+1)^{-1/2}.
#[derive(Debug, Clone)]
pub struct IrNormResult {
    pub operator_norm: f64,
    pub singular_values: Vec<f64>,
}

pub fn ir_norm(
    rho: &ScalarField,
    dec_h: &SpectralDecomposition,
    boson_grid: &Grid,
    k_op: &SymmetricOperator,
    beta: f64,
    dense_limit: usize,
) -> Result<IrNormResult> {
    if beta != 0.5 && beta != 1.0 {
        return Err(NelsonError::InvalidParameter(format!(
            "ir_norm supports beta in {{1/2, 1}}, got {beta}"
        )));
    }
    let dec_k = eigendecompose_dense(&k_op.matrix.to_dense(), "K", dense_limit)?;
    let k_inv_sqrt = crate::spectral::apply_function(&dec_k, |l| 1.0 / (l + 1.0).sqrt())?;
    let electron_grid = &k_op.grid;
    let columns = sample_charge_columns(rho, boson_grid, &electron_grid.nodes());
    let n_x = columns.len();
    let vol_sqrt = boson_grid.cell_volume().sqrt();
    // weighted matrix W with columns ω^{-β}ρ_X expressed in the h eigenbasis
    let mut w = DMatrix::zeros(dec_h.dim(), n_x);
    for (xi, col) in columns.iter().enumerate() {
        let r = nalgebra::DVector::from_column_slice(col);
        let c = dec_h.eigenvectors.transpose() * r;
        for (k, &lam) in dec_h.eigenvalues.iter().enumerate() {
            w[(k, xi)] = vol_sqrt * c[k] / lam.powf(beta / 2.0);
        }
    }
    let m = w * k_inv_sqrt;
    let gram = m.transpose() * &m;
    let dec_g = eigendecompose_dense(&gram, "gram", dense_limit)?;
    let mut svals: Vec<f64> = dec_g
        .eigenvalues
        .iter()
        .rev()
        .take(20)
        .map(|l| l.max(0.0).sqrt())
        .collect();
    svals.sort_by(|a, b| b.total_cmp(a));
    Ok(IrNormResult {
        operator_norm: svals.first().copied().unwrap_or(0.0),
        singular_values: svals,
    })
}

/// ‖ω^{-β}ρ‖ for β ∈ {1, 3/2} on large grids, without an eigendecomposition:
/// β = 1 is a single conjugate-gradient solve; β = 3/2 uses the resolvent
/// representation λ^{-3/2} = (2/π)∫ λ^{-1}(λ + s²)^{-1} ds with a log-spaced
/// trapezoid plus analytic head/tail corrections.
pub fn column_norm_cg(
    h: &CsrMatrix,
    rho: &[f64],
    cell_volume: f64,
    beta: f64,
    rel_tol: f64,
) -> Result<f64> {
    if rho.len() != h.dim {
        return Err(NelsonError::DimensionMismatch(format!(
            "rho length {} vs operator dimension {}",
            rho.len(),
            h.dim
        )));
    }
    let u1 = conjugate_gradient(h, rho, rel_tol, 50_000)?;
    match beta {
        b if b == 1.0 => Ok((dot(rho, &u1) * cell_volume).max(0.0).sqrt()),
        b if b == 1.5 => {
            let lam_max = h.norm_inf();
            let (s0, s1, nodes) = (1e-4f64, 1e3 * lam_max.sqrt(), 60usize);
            let (us, ue) = (s0.ln(), s1.ln());
            let du = (ue - us) / (nodes as f64 - 1.0);
            let mut acc = 0.0;
            for i in 0..nodes {
                let s = (us + i as f64 * du).exp();
                let hs = h.shifted(s * s);
                let w = conjugate_gradient(&hs, rho, rel_tol, 50_000)?;
                let wt = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
                acc += wt * dot(&u1, &w) * s;
            }
            let mut total = acc * du;
            total += s0 * dot(&u1, &u1); // s → 0: (h+s²)⁻¹ ≈ h⁻¹
            total += dot(&u1, rho) / s1; // s → ∞: (h+s²)⁻¹ ≈ s⁻²
            Ok((total * 2.0 / std::f64::consts::PI * cell_volume).max(0.0).sqrt())
        }
        _ => Err(NelsonError::InvalidParameter(format!(
            "column_norm_cg supports beta in {{1, 3/2}}, got {beta}"
        ))),
    }
}

/// Completion-of-squares lower bound E_gs ≥ λ_min(K) − sup_X ‖ω^{-1/2}ρ_X‖².
pub fn pauli_fierz_lower_bound(lambda_min_k: f64, coupling: &CouplingOperator) -> f64 {
    let sup = coupling
        .norms_half
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    lambda_min_k - sup * sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::DEFAULT_FOCK_LIMIT;
    use crate::grid::{assemble_h, build_grid, sample_coefficients, CoefficientSpec};
    use crate::spectral::{eigendecompose, DEFAULT_DENSE_LIMIT};

    fn small_boson_setup(n: usize) -> (Grid, SpectralDecomposition) {
        let grid = build_grid(1, 6.0, n).unwrap();
        let spec = CoefficientSpec::flat_with_mass(
            ScalarField::BracketPower {
                amp: 1.0,
                exponent: -1.0,
            },
            None,
        );
        let coeffs = sample_coefficients(&spec, &grid).unwrap();
        let h = assemble_h(&coeffs, &grid).unwrap();
        let dec = eigendecompose(&h, DEFAULT_DENSE_LIMIT).unwrap();
        (grid, dec)
    }

    fn pinned_k() -> SymmetricOperator {
        let grid = build_grid(1, 1.0, 2).unwrap();
        // two-node electron with a simple diagonal potential
        SymmetricOperator {
            matrix: CsrMatrix::from_diagonal(&[0.0, 1.0]),
            grid,
            label: "K".into(),
        }
    }

    #[test]
    fn zero_charge_gives_zero_coupling() {
        let (grid, dec) = small_boson_setup(16);
        let modes = ModeBasis::from_h_decomposition(&dec, 5).unwrap();
        let el = build_grid(1, 6.0, 4).unwrap();
        let c = coupling_operator(&ScalarField::Zero, &dec, &modes, &grid, &el).unwrap();
        assert_eq!(c.g.abs().max(), 0.0);
        assert!(c.norms_half.iter().all(|&v| v == 0.0));
        assert!(c.norms_one.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bessel_inequality_per_column() {
        let (grid, dec) = small_boson_setup(24);
        let modes = ModeBasis::from_h_decomposition(&dec, 6).unwrap();
        let el = build_grid(1, 6.0, 8).unwrap();
        let rho = ScalarField::Gaussian {
            amp: 1.0,
            width: 1.0,
        };
        let c = coupling_operator(&rho, &dec, &modes, &grid, &el).unwrap();
        for xi in 0..el.node_count() {
            assert!(c.column_norm(xi) <= c.norms_half[xi] * (1.0 + 1e-12));
        }
        // full mode basis: Bessel is saturated
        let full = ModeBasis::from_h_decomposition(&dec, dec.dim()).unwrap();
        let cf = coupling_operator(&rho, &dec, &full, &grid, &el).unwrap();
        for xi in 0..el.node_count() {
            assert!((cf.column_norm(xi) - cf.norms_half[xi]).abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_sum_spectrum_when_uncoupled() {
        let k = pinned_k();
        let modes = ModeBasis::explicit(vec![1.0, 2.5]).unwrap();
        let basis = FockBasis::new(2, 2, DEFAULT_FOCK_LIMIT).unwrap();
        let g = CouplingOperator::explicit(DMatrix::zeros(2, 2));
        let h = assemble_h_full(&k, &modes, &g, &basis).unwrap();
        let dec = eigendecompose_dense(&h.total.to_dense(), "H", DEFAULT_DENSE_LIMIT).unwrap();
        // eigenvalues are {0,1} + Fock energies {0,1,2.5,2,3.5,5}
        let mut want: Vec<f64> = Vec::new();
        for ke in [0.0, 1.0] {
            for fe in [0.0, 1.0, 2.5, 2.0, 3.5, 5.0] {
                want.push(ke + fe);
            }
        }
        want.sort_by(f64::total_cmp);
        for (a, b) in dec.eigenvalues.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn van_hove_ground_energy() {
        // pinned electron (K = 0 on one node), one mode: E → −g²/(2ω)
        let grid = build_grid(1, 1.0, 2).unwrap();
        let k = SymmetricOperator {
            matrix: CsrMatrix::from_diagonal(&[0.0]),
            grid,
            label: "K".into(),
        };
        let omega = 1.3;
        let g1 = 0.2;
        let modes = ModeBasis::explicit(vec![omega]).unwrap();
        let g = CouplingOperator::explicit(DMatrix::from_element(1, 1, g1));
        let basis = FockBasis::new(1, 30, DEFAULT_FOCK_LIMIT).unwrap();
        let h = assemble_h_full(&k, &modes, &g, &basis).unwrap();
        let dec = eigendecompose_dense(&h.total.to_dense(), "H", DEFAULT_DENSE_LIMIT).unwrap();
        let want = -g1 * g1 / (2.0 * omega);
        assert!((dec.lambda_min() - want).abs() < 1e-10);
        // vacuum expectation gives the variational bound E ≤ λ_min(K)
        assert!(dec.lambda_min() <= 0.0 + 1e-14);
        // Pauli-Fierz style lower bound
        assert!(dec.lambda_min() >= pauli_fierz_lower_bound(0.0, &g) - 1e-9);
    }

    #[test]
    fn ir_cutoff_support_identities() {
        let k = pinned_k();
        let modes = ModeBasis::explicit(vec![1.0, 2.0]).unwrap();
        let basis = FockBasis::new(2, 3, DEFAULT_FOCK_LIMIT).unwrap();
        let mut gm = DMatrix::zeros(2, 2);
        gm[(0, 0)] = 0.3;
        gm[(1, 1)] = -0.7;
        let g = CouplingOperator::explicit(gm);
        let h = assemble_h_full(&k, &modes, &g, &basis).unwrap();
        // σ < ω₁/2: χ ≡ 1, H_σ = H entry for entry
        let hs = assemble_h_sigma(&k, &modes, &g, &basis, 0.49).unwrap();
        assert_eq!(
            (hs.total.to_dense() - h.total.to_dense()).abs().max(),
            0.0
        );
        let ht = assemble_h_tilde_sigma(&k, &modes, &g, &basis, 0.49).unwrap();
        assert_eq!(
            (ht.total.to_dense() - h.total.to_dense()).abs().max(),
            0.0
        );
        // σ ≥ ω_M: χ ≡ 0, coupling gone
        let hbig = assemble_h_sigma(&k, &modes, &g, &basis, 2.0).unwrap();
        assert_eq!(hbig.phi_part.nnz(), 0);
        // H̃_σ mode energies all ≥ σ
        let sigma = 1.5;
        let htl = assemble_h_tilde_sigma(&k, &modes, &g, &basis, sigma).unwrap();
        let one_boson_10 = htl.composite_index(0, basis.index_of(&[1, 0]).unwrap());
        let one_boson_01 = htl.composite_index(0, basis.index_of(&[0, 1]).unwrap());
        let d = htl.dgamma_part.to_dense();
        assert!(d[(one_boson_10, one_boson_10)] >= sigma - 1e-12);
        assert!(d[(one_boson_01, one_boson_01)] >= sigma - 1e-12);
        assert!(assemble_h_sigma(&k, &modes, &g, &basis, 0.0).is_err());
    }

    #[test]
    fn ir_norm_zero_charge_and_ordering() {
        let (grid, dec) = small_boson_setup(16);
        let el = build_grid(1, 6.0, 8).unwrap();
        let spec = CoefficientSpec::flat_with_mass(ScalarField::Const(1.0), None);
        let coeffs = sample_coefficients(&spec, &el).unwrap();
        let k = crate::grid::assemble_electron_k(&coeffs, &el).unwrap();
        let z = ir_norm(&ScalarField::Zero, &dec, &grid, &k, 1.0, DEFAULT_DENSE_LIMIT).unwrap();
        assert_eq!(z.operator_norm, 0.0);
        let rho = ScalarField::Gaussian {
            amp: 1.0,
            width: 1.0,
        };
        let r = ir_norm(&rho, &dec, &grid, &k, 0.5, DEFAULT_DENSE_LIMIT).unwrap();
        assert!(r.operator_norm > 0.0);
        for w in r.singular_values.windows(2) {
            assert!(w[0] >= w[1] - 1e-14);
        }
        assert!(ir_norm(&rho, &dec, &grid, &k, 1.5, DEFAULT_DENSE_LIMIT).is_err());
    }

    #[test]
    fn cg_column_norms_match_dense_calculus() {
        let (grid, dec) = small_boson_setup(40);
        let spec = CoefficientSpec::flat_with_mass(
            ScalarField::BracketPower {
                amp: 1.0,
                exponent: -1.0,
            },
            None,
        );
        let coeffs = sample_coefficients(&spec, &grid).unwrap();
        let h = assemble_h(&coeffs, &grid).unwrap();
        let rho = ScalarField::Gaussian {
            amp: 1.0,
            width: 1.0,
        };
        let cols = sample_charge_columns(&rho, &grid, &[vec![0.0]]);
        let r = nalgebra::DVector::from_column_slice(&cols[0]);
        let c = dec.eigenvectors.transpose() * r;
        let vol = grid.cell_volume();
        for beta in [1.0, 1.5] {
            let want: f64 = (dec
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(k, &l)| c[k] * c[k] * l.powf(-beta))
                .sum::<f64>()
                * vol)
                .sqrt();
            let got = column_norm_cg(&h.matrix, &cols[0], vol, beta, 1e-10).unwrap();
            assert!(
                (got - want).abs() / want < 1e-6,
                "beta={beta}: got {got}, want {want}"
            );
        }
        assert!(column_norm_cg(&h.matrix, &cols[0], vol, 0.5, 1e-10).is_err());
    }
}
