//! Dense eigendecomposition and functional calculus: ω = h^{1/2}, heat
//! semigroup, fractional inverse powers via the Laplace-transform quadrature,
//! infrared-regularized dispersion and smooth spectral cutoffs.

use crate::error::{NelsonError, Result};
use crate::grid::SymmetricOperator;
use nalgebra::{DMatrix, SymmetricEigen};

pub const DEFAULT_DENSE_LIMIT: usize = 6000;

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// columns are eigenvectors, same order as eigenvalues
    pub eigenvectors: DMatrix<f64>,
    pub label: String,
    /// max residual ‖Mv − λv‖ over the eigenpairs, measured at factorization
    /// time; the noise floor for anything built from this decomposition
    pub defect: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// ‖VᵀV - I‖_max
    pub fn orthonormality_defect(&self) -> f64 {
        let v = &self.eigenvectors;
        let g = v.transpose() * v;
        let mut worst = 0.0f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - want).abs());
            }
        }
        worst
    }

    /// ‖VΛVᵀ - op‖_max
    pub fn reconstruction_defect(&self, op: &DMatrix<f64>) -> f64 {
        let rec = self.reconstruct(|l| l);
        (rec - op).abs().max()
    }

    /// V f(Λ) Vᵀ without the finiteness check (internal helper).
    fn reconstruct(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let fl = f(l);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= fl;
            }
        }
        let m = &scaled * v.transpose();
        // symmetrize to kill roundoff asymmetry
        let mt = m.transpose();
        (m + mt) * 0.5
    }
}

pub fn eigendecompose_dense(m: &DMatrix<f64>, label: &str, dense_limit: usize) -> Result<SpectralDecomposition> {
    let dim = m.nrows();
    if dim > dense_limit {
        return Err(NelsonError::DenseLimit {
            dim,
            limit: dense_limit,
        });
    }
    let eig = SymmetricEigen::new(m.clone());
    // The QR iteration can mislabel or mix eigenvector columns without
    // signaling failure. The joint span is still accurate, so recover each
    // eigenvalue as the Rayleigh quotient of its column, then re-diagonalize
    // the projected block spanned by any columns whose residual is large.
    let av = m * &eig.eigenvectors;
    let rayleigh: Vec<f64> = (0..dim)
        .map(|i| eig.eigenvectors.column(i).dot(&av.column(i)))
        .collect();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| rayleigh[i].total_cmp(&rayleigh[j]));
    let mut eigenvalues: Vec<f64> = order.iter().map(|&i| rayleigh[i]).collect();
    let mut eigenvectors = DMatrix::zeros(dim, dim);
    let mut av_sorted = DMatrix::zeros(dim, dim);
    for (newcol, &oldcol) in order.iter().enumerate() {
        eigenvectors.set_column(newcol, &eig.eigenvectors.column(oldcol));
        av_sorted.set_column(newcol, &av.column(oldcol));
    }
    let scale = eigenvalues
        .iter()
        .fold(1.0f64, |a, &l| a.max(l.abs()));
    let thresh = 1e-9 * scale;
    let bad: Vec<usize> = (0..dim)
        .filter(|&i| {
            (av_sorted.column(i) - eigenvalues[i] * eigenvectors.column(i)).norm() > thresh
        })
        .collect();
    if !bad.is_empty() {
        let p = bad.len();
        let mut vc = DMatrix::zeros(dim, p);
        let mut avc = DMatrix::zeros(dim, p);
        for (t, &i) in bad.iter().enumerate() {
            vc.set_column(t, &eigenvectors.column(i));
            avc.set_column(t, &av_sorted.column(i));
        }
        let s = vc.transpose() * &avc;
        let s = (&s + s.transpose()) * 0.5;
        let small = SymmetricEigen::new(s);
        let mut ord2: Vec<usize> = (0..p).collect();
        ord2.sort_by(|&i, &j| small.eigenvalues[i].total_cmp(&small.eigenvalues[j]));
        let repaired = &vc * &small.eigenvectors;
        for (t, &i) in bad.iter().enumerate() {
            eigenvectors.set_column(i, &repaired.column(ord2[t]));
            eigenvalues[i] = small.eigenvalues[ord2[t]];
        }
        // re-establish global ascending order after the block update
        let mut order3: Vec<usize> = (0..dim).collect();
        order3.sort_by(|&i, &j| eigenvalues[i].total_cmp(&eigenvalues[j]));
        if order3.windows(2).any(|w| w[1] < w[0]) {
            let vals: Vec<f64> = order3.iter().map(|&i| eigenvalues[i]).collect();
            let mut vecs = DMatrix::zeros(dim, dim);
            for (newcol, &oldcol) in order3.iter().enumerate() {
                vecs.set_column(newcol, &eigenvectors.column(oldcol));
            }
            eigenvalues = vals;
            eigenvectors = vecs;
        }
        av_sorted = m * &eigenvectors;
    }
    let max_residual = |vals: &[f64], vecs: &DMatrix<f64>, av: &DMatrix<f64>| -> f64 {
        (0..dim)
            .map(|i| (av.column(i) - vals[i] * vecs.column(i)).norm())
            .fold(0.0, f64::max)
    };
    let mut defect = max_residual(&eigenvalues, &eigenvectors, &av_sorted);
    if defect > 1e-12 * scale {
        // One guarded Rayleigh–Ritz refinement pass: re-diagonalize VᵀMV and
        // keep the rotated basis only if the measured residuals improve.
        // (A second pass is counterproductive: the QR iteration on the
        // near-diagonal projected matrix mixes near-degenerate columns again.)
        let e = eigenvectors.transpose() * &av_sorted;
        let e = (&e + e.transpose()) * 0.5;
        let se = SymmetricEigen::new(e);
        let mut ord: Vec<usize> = (0..dim).collect();
        ord.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
        let rotated = &eigenvectors * &se.eigenvectors;
        let mut vecs2 = DMatrix::zeros(dim, dim);
        for (newcol, &oldcol) in ord.iter().enumerate() {
            vecs2.set_column(newcol, &rotated.column(oldcol));
        }
        let av2 = m * &vecs2;
        let vals2: Vec<f64> = (0..dim).map(|i| vecs2.column(i).dot(&av2.column(i))).collect();
        // the Rayleigh values can land out of order when the projected
        // diagonalization mislabels columns; sort the triple together
        let mut ord2: Vec<usize> = (0..dim).collect();
        ord2.sort_by(|&i, &j| vals2[i].total_cmp(&vals2[j]));
        let vals2s: Vec<f64> = ord2.iter().map(|&i| vals2[i]).collect();
        let mut vecs2s = DMatrix::zeros(dim, dim);
        let mut av2s = DMatrix::zeros(dim, dim);
        for (newcol, &oldcol) in ord2.iter().enumerate() {
            vecs2s.set_column(newcol, &vecs2.column(oldcol));
            av2s.set_column(newcol, &av2.column(oldcol));
        }
        let defect2 = max_residual(&vals2s, &vecs2s, &av2s);
        if defect2 < defect {
            eigenvalues = vals2s;
            eigenvectors = vecs2s;
            defect = defect2;
        }
    }
    // every path above sorts, but the ordering is load-bearing downstream
    debug_assert!(eigenvalues.windows(2).all(|w| w[1] >= w[0]));
    if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
        let mut ord: Vec<usize> = (0..dim).collect();
        ord.sort_by(|&i, &j| eigenvalues[i].total_cmp(&eigenvalues[j]));
        let vals: Vec<f64> = ord.iter().map(|&i| eigenvalues[i]).collect();
        let mut vecs = DMatrix::zeros(dim, dim);
        for (newcol, &oldcol) in ord.iter().enumerate() {
            vecs.set_column(newcol, &eigenvectors.column(oldcol));
        }
        eigenvalues = vals;
        eigenvectors = vecs;
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        label: label.to_string(),
        defect,
    })
}

pub fn eigendecompose(op: &SymmetricOperator, dense_limit: usize) -> Result<SpectralDecomposition> {
    eigendecompose_dense(&op.matrix.to_dense(), &op.label, dense_limit)
}

/// V f(Λ) Vᵀ, symmetrized. Errors if f is not finite at some eigenvalue.
pub fn apply_function(
    dec: &SpectralDecomposition,
    f: impl Fn(f64) -> f64,
) -> Result<DMatrix<f64>> {
    for &l in &dec.eigenvalues {
        if !f(l).is_finite() {
            return Err(NelsonError::Singularity { eigenvalue: l });
        }
    }
    Ok(dec.reconstruct(f))
}

/// Smooth cutoff χ with χ(λ) = 0 for λ <= 1, χ(λ) = 1 for λ >= 2, realized as
/// the standard smoothstep g(λ-1)/(g(λ-1)+g(2-λ)), g(t) = exp(-1/t) for t > 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct CutoffProfile;

fn bump_g(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

impl CutoffProfile {
    pub fn chi(self, lambda: f64) -> f64 {
        if lambda <= 1.0 {
            0.0
        } else if lambda >= 2.0 {
            1.0
        } else {
            let up = bump_g(lambda - 1.0);
            up / (up + bump_g(2.0 - lambda))
        }
    }

    /// ω_σ eigenvalue map: λ χ(λ/σ) + σ (1 - χ(λ/σ)).
    pub fn ir_dispersion_map(self, lambda: f64, sigma: f64) -> f64 {
        let x = self.chi(lambda / sigma);
        lambda * x + sigma * (1.0 - x)
    }
}

/// ω_σ from a decomposition of ω; every eigenvalue ends up >= σ.
pub fn ir_dispersion(dec_omega: &SpectralDecomposition, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0) {
        return Err(NelsonError::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let chi = CutoffProfile;
    apply_function(dec_omega, |l| chi.ir_dispersion_map(l, sigma))
}

/// e^{-t h} via functional calculus.
pub fn heat_operator(dec: &SpectralDecomposition, t: f64) -> Result<DMatrix<f64>> {
    if t < 0.0 {
        return Err(NelsonError::InvalidParameter(format!(
            "heat operator needs t >= 0, got {t}"
        )));
    }
    apply_function(dec, |l| (-t * l).exp())
}

/// h^{-β} by trapezoid quadrature in log t of t^{β-1} e^{-th} over a geometric
/// grid, with analytic head/tail corrections. Independent route cross-checking
/// the direct eigenvalue power.
pub fn frac_inv_power_quadrature(
    dec: &SpectralDecomposition,
    beta: f64,
    nodes: usize,
) -> Result<DMatrix<f64>> {
    if dec.lambda_min() <= 0.0 {
        return Err(NelsonError::Singularity {
            eigenvalue: dec.lambda_min(),
        });
    }
    if !(beta > 0.0) {
        return Err(NelsonError::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let t0 = 1e-6 / dec.lambda_max();
    let t1 = 50.0 / dec.lambda_min();
    let (u0, u1) = (t0.ln(), t1.ln());
    let du = (u1 - u0) / (nodes as f64 - 1.0);
    let gamma_beta = gamma_fn(beta);
    let q = |lambda: f64| -> f64 {
        // trapezoid over u = ln t of t^β e^{-tλ}
        let mut acc = 0.0;
        for i in 0..nodes {
            let t = (u0 + i as f64 * du).exp();
            let w = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
            acc += w * t.powf(beta) * (-t * lambda).exp();
        }
        let mut total = acc * du;
        // head: ∫_0^{t0} t^{β-1} e^{-tλ} dt expanded to third order in t0 λ
        total += t0.powf(beta)
            * (1.0 / beta - lambda * t0 / (beta + 1.0)
                + lambda * lambda * t0 * t0 / (2.0 * (beta + 2.0)));
        total / gamma_beta
    };
    apply_function(dec, q)
}

/// Lanczos approximation of Γ(x) for x > 0.
fn gamma_fn(x: f64) -> f64 {
    // Lanczos coefficients (g = 7, n = 9)
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + G + 0.5;
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// ‖AB - BA‖₂ (largest singular value).
pub fn commutator_norm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(NelsonError::DimensionMismatch(format!(
            "commutator of {}x{} with {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let c = a * b - b * a;
    Ok(operator_norm(&c))
}

/// Largest singular value via the symmetric eigenproblem of CᵀC.
pub fn operator_norm(c: &DMatrix<f64>) -> f64 {
    let g = c.transpose() * c;
    let eig = SymmetricEigen::new(g);
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .max(0.0)
        .sqrt()
}
