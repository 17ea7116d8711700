//! Regular Cartesian grids with Dirichlet boundary, coefficient sampling and
//! conservative finite-difference assembly of the second-order operators
//! h = c^{-1} D a D c^{-1} + m^2, K = D A D + W and -Delta.

use crate::error::{NelsonError, Result};
use crate::sparse::{CooMatrix, CsrMatrix};
use nalgebra::{DMatrix, SymmetricEigen};

/// ⟨x⟩ = (1 + |x|²)^{1/2}
pub fn bracket(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Interior lattice of [-L, L]^dim with functions vanishing at the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub extent: f64,
    pub n_per_axis: usize,
}

impl Grid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.n_per_axis as f64 + 1.0)
    }

    pub fn node_count(&self) -> usize {
        self.n_per_axis.pow(self.dim as u32)
    }

    /// Quadrature weight Δx^d for L² inner products of node samples.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 1.0) * self.spacing()
    }

    /// Flat index -> multi-index (row-major, axis 0 slowest).
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let n = self.n_per_axis;
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for axis in 0..self.dim {
            flat = flat * self.n_per_axis + idx[axis];
        }
        flat
    }

    pub fn node_coord(&self, flat: usize) -> Vec<f64> {
        let idx = self.multi_index(flat);
        (0..self.dim).map(|a| self.axis_coord(idx[a])).collect()
    }

    /// All node coordinates, in flat-index order.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.node_count()).map(|i| self.node_coord(i)).collect()
    }
}

pub fn build_grid(dim: usize, extent: f64, n_per_axis: usize) -> Result<Grid> {
    if !(1..=3).contains(&dim) {
        return Err(NelsonError::InvalidGrid(format!(
            "dim must be 1, 2 or 3, got {dim}"
        )));
    }
    if !(extent > 0.0) {
        return Err(NelsonError::InvalidGrid(format!(
            "extent must be positive, got {extent}"
        )));
    }
    if n_per_axis < 2 {
        return Err(NelsonError::InvalidGrid(format!(
            "n_per_axis must be >= 2, got {n_per_axis}"
        )));
    }
    Ok(Grid {
        dim,
        extent,
        n_per_axis,
    })
}

/// Closed-form scalar coefficient fields.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Zero,
    Const(f64),
    /// amp * ⟨x⟩^exponent
    BracketPower { amp: f64, exponent: f64 },
    /// amp * exp(-|x|² / (2 width²))
    Gaussian { amp: f64, width: f64 },
    /// pointwise sum
    Sum(Box<ScalarField>, Box<ScalarField>),
}

impl ScalarField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Const(v) => *v,
            ScalarField::BracketPower { amp, exponent } => amp * bracket(x).powf(*exponent),
            ScalarField::Gaussian { amp, width } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                amp * (-r2 / (2.0 * width * width)).exp()
            }
            ScalarField::Sum(a, b) => a.eval(x) + b.eval(x),
        }
    }
}

/// Symmetric matrix coefficient field [a^{jk}].
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixField {
    /// s(x) * Identity
    Isotropic(ScalarField),
    /// independent diagonal entries, no cross terms
    Diagonal(Vec<ScalarField>),
    /// diagonal entries plus symmetric off-diagonal pairs (j, k, field), j < k
    WithCross {
        diag: Vec<ScalarField>,
        off: Vec<(usize, usize, ScalarField)>,
    },
}

impl MatrixField {
    /// d x d matrix sample at x.
    pub fn eval(&self, x: &[f64], d: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(d, d);
        match self {
            MatrixField::Isotropic(s) => {
                let v = s.eval(x);
                for j in 0..d {
                    m[(j, j)] = v;
                }
            }
            MatrixField::Diagonal(fields) => {
                for j in 0..d {
                    m[(j, j)] = fields[j].eval(x);
                }
            }
            MatrixField::WithCross { diag, off } => {
                for j in 0..d {
                    m[(j, j)] = diag[j].eval(x);
                }
                for (j, k, f) in off {
                    let v = f.eval(x);
                    m[(*j, *k)] = v;
                    m[(*k, *j)] = v;
                }
            }
        }
        m
    }

    pub fn has_cross_terms(&self) -> bool {
        matches!(self, MatrixField::WithCross { off, .. } if !off.is_empty())
    }
}

/// Symbolic description of all coefficient fields of the model.
#[derive(Debug, Clone)]
pub struct CoefficientSpec {
    /// boson metric a^{jk}
    pub a: MatrixField,
    /// conformal factor c > 0
    pub c: ScalarField,
    /// boson mass profile m >= 0
    pub m: ScalarField,
    /// (amplitude, exponent p) when m(x) = amp * ⟨x⟩^{-p}
    pub mass_decay: Option<(f64, f64)>,
    /// electron metric A^{jk}
    pub big_a: MatrixField,
    /// electron potential W
    pub w: ScalarField,
    /// charge density rho >= 0
    pub rho: ScalarField,
}

impl CoefficientSpec {
    /// Flat Laplacian data with a given mass profile; the common test case.
    pub fn flat_with_mass(m: ScalarField, mass_decay: Option<(f64, f64)>) -> Self {
        CoefficientSpec {
            a: MatrixField::Isotropic(ScalarField::Const(1.0)),
            c: ScalarField::Const(1.0),
            m,
            mass_decay,
            big_a: MatrixField::Isotropic(ScalarField::Const(1.0)),
            w: ScalarField::Zero,
            rho: ScalarField::Zero,
        }
    }
}

/// Coefficient fields sampled on a grid, with hypothesis metadata.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub grid: Grid,
    /// a^{jk} sampled per node (d x d each)
    pub a: Vec<DMatrix<f64>>,
    pub c: Vec<f64>,
    pub m: Vec<f64>,
    pub mass_decay: Option<(f64, f64)>,
    pub big_a: Vec<DMatrix<f64>>,
    pub w: Vec<f64>,
    pub rho: Vec<f64>,
    /// total charge q = Σ rho Δx^d
    pub charge: f64,
    /// ellipticity bounds over {a^{jk}, c} (boson side)
    pub c0: f64,
    pub c1: f64,
    /// ellipticity bounds of A^{jk} (electron side)
    pub c0_electron: f64,
    pub c1_electron: f64,
    pub warnings: Vec<String>,
    pub has_cross_terms: bool,
}

fn sym_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

pub fn sample_coefficients(spec: &CoefficientSpec, grid: &Grid) -> Result<CoefficientSet> {
    let n = grid.node_count();
    let d = grid.dim;
    let mut a = Vec::with_capacity(n);
    let mut big_a = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    let mut c0 = f64::INFINITY;
    let mut c1 = f64::NEG_INFINITY;
    let mut c0e = f64::INFINITY;
    let mut c1e = f64::NEG_INFINITY;
    let mut warnings = Vec::new();

    for i in 0..n {
        let x = grid.node_coord(i);
        let am = spec.a.eval(&x, d);
        let (lo, hi) = sym_eig_range(&am);
        if lo <= 0.0 {
            return Err(NelsonError::Ellipticity {
                node: i,
                detail: format!("a^jk has eigenvalue {lo} <= 0"),
            });
        }
        c0 = c0.min(lo);
        c1 = c1.max(hi);
        let cv = spec.c.eval(&x);
        if cv <= 0.0 {
            return Err(NelsonError::Ellipticity {
                node: i,
                detail: format!("c(x) = {cv} <= 0"),
            });
        }
        c0 = c0.min(cv);
        c1 = c1.max(cv);
        let mv = spec.m.eval(&x);
        if mv < 0.0 {
            return Err(NelsonError::Ellipticity {
                node: i,
                detail: format!("m(x) = {mv} < 0"),
            });
        }
        let bm = spec.big_a.eval(&x, d);
        let (elo, ehi) = sym_eig_range(&bm);
        if elo <= 0.0 {
            return Err(NelsonError::Ellipticity {
                node: i,
                detail: format!("A^jk has eigenvalue {elo} <= 0"),
            });
        }
        c0e = c0e.min(elo);
        c1e = c1e.max(ehi);
        let rv = spec.rho.eval(&x);
        if rv < 0.0 {
            return Err(NelsonError::Ellipticity {
                node: i,
                detail: format!("rho(x) = {rv} < 0"),
            });
        }
        a.push(am);
        big_a.push(bm);
        c.push(cv);
        m.push(mv);
        w.push(spec.w.eval(&x));
        rho.push(rv);
    }

    let charge: f64 = rho.iter().sum::<f64>() * grid.cell_volume();
    if charge == 0.0 {
        warnings.push("charge q = 0 (rho vanishes on the grid)".to_string());
    }
    if w.iter().cloned().fold(f64::INFINITY, f64::min) < 0.0 {
        warnings.push("electron potential W takes negative values on the grid".to_string());
    }

    Ok(CoefficientSet {
        grid: grid.clone(),
        a,
        c,
        m,
        mass_decay: spec.mass_decay,
        big_a,
        w,
        rho,
        charge,
        c0,
        c1,
        c0_electron: c0e,
        c1_electron: c1e,
        warnings,
        has_cross_terms: spec.a.has_cross_terms() || spec.big_a.has_cross_terms(),
    })
}

/// Sparse symmetric matrix tagged with its grid and role.
#[derive(Debug, Clone)]
pub struct SymmetricOperator {
    pub matrix: CsrMatrix,
    pub grid: Grid,
    pub label: String,
}

impl SymmetricOperator {
    pub fn dim(&self) -> usize {
        self.matrix.dim
    }
}

/// Gauge-transformed operator diag(c)^{-1} h diag(c), symmetric under the
/// c²-weighted inner product ⟨u,v⟩ = Σ u v c² Δx^d.
#[derive(Debug, Clone)]
pub struct WeightedOperator {
    pub matrix: CsrMatrix,
    pub grid: Grid,
    /// weight c² per node
    pub weight: Vec<f64>,
    pub label: String,
}

impl WeightedOperator {
    /// max |w_i m_ij - w_j m_ji| over stored entries.
    pub fn weighted_asymmetry(&self) -> f64 {
        let m = &self.matrix;
        let dense = m.to_dense();
        let mut worst = 0.0f64;
        for i in 0..m.dim {
            for j in 0..m.dim {
                let v = self.weight[i] * dense[(i, j)] - self.weight[j] * dense[(j, i)];
                worst = worst.max(v.abs());
            }
        }
        worst
    }
}

/// Conservative stencil for the divergence form part Σ_j D_j a^{jj} D_j with
/// face-averaged coefficients, plus centered-difference cross terms for j != k.
/// Dirichlet boundary: couplings to outside nodes are dropped (u = 0 there),
/// face coefficient at the wall falls back to the interior node value.
fn assemble_div_form(
    grid: &Grid,
    coeff_at: &dyn Fn(usize) -> DMatrix<f64>,
) -> CooMatrix {
    let n = grid.n_per_axis;
    let d = grid.dim;
    let dx = grid.spacing();
    let dx2 = dx * dx;
    let total = grid.node_count();
    let mut coo = CooMatrix::new(total);

    let neighbor = |idx: &[usize; 3], axis: usize, step: i64| -> Option<usize> {
        let v = idx[axis] as i64 + step;
        if v < 0 || v >= n as i64 {
            None
        } else {
            let mut nidx = *idx;
            nidx[axis] = v as usize;
            Some(grid.flat_index(&nidx[..d]))
        }
    };

    for i in 0..total {
        let idx = grid.multi_index(i);
        let ai = coeff_at(i);
        for j in 0..d {
            // diagonal term: face-averaged conservative stencil
            for &step in &[-1i64, 1] {
                let face = match neighbor(&idx, j, step) {
                    Some(nb) => 0.5 * (ai[(j, j)] + coeff_at(nb)[(j, j)]),
                    None => ai[(j, j)],
                };
                coo.push(i, i, face / dx2);
                if let Some(nb) = neighbor(&idx, j, step) {
                    coo.push(i, nb, -face / dx2);
                }
            }
            // cross terms: (C_j^T diag(a^{jk}) C_k + transpose)/2 with centered
            // differences; assembled entrywise as a^{jk}(x) D_j^T e_x e_x^T D_k
            for k in 0..d {
                if k == j {
                    continue;
                }
                let ajk = ai[(j, k)];
                if ajk == 0.0 {
                    continue;
                }
                // quadratic form contribution a^{jk}(x_i) (D_j u)(x_i) (D_k u)(x_i):
                // rows/cols touched are the centered-difference neighbors of i.
                for &(sj, wj) in &[(-1i64, -0.5), (1i64, 0.5)] {
                    for &(sk, wk) in &[(-1i64, -0.5), (1i64, 0.5)] {
                        if let (Some(pj), Some(pk)) =
                            (neighbor(&idx, j, sj), neighbor(&idx, k, sk))
                        {
                            coo.push(pj, pk, ajk * wj * wk / dx2);
                        }
                    }
                }
            }
        }
    }
    coo
}

/// h = diag(c)^{-1} (Σ D a D) diag(c)^{-1} + diag(m²)
pub fn assemble_h(coeffs: &CoefficientSet, grid: &Grid) -> Result<SymmetricOperator> {
    if coeffs.grid != *grid {
        return Err(NelsonError::DimensionMismatch(
            "coefficient set was sampled on a different grid".into(),
        ));
    }
    let a = coeffs.a.clone();
    let coo = assemble_div_form(grid, &|i| a[i].clone());
    let mut coo2 = CooMatrix::new(coo.dim);
    for &(i, j, v) in &coo.triplets {
        coo2.push(i, j, v / (coeffs.c[i] * coeffs.c[j]));
    }
    for i in 0..grid.node_count() {
        let m2 = coeffs.m[i] * coeffs.m[i];
        if m2 != 0.0 {
            coo2.push(i, i, m2);
        }
    }
    Ok(SymmetricOperator {
        matrix: coo2.to_csr(),
        grid: grid.clone(),
        label: "h".into(),
    })
}

/// h0 = diag(c)^{-1} (Σ D a D) diag(c)^{-1}, the massless part of h.
pub fn assemble_h0(coeffs: &CoefficientSet, grid: &Grid) -> Result<SymmetricOperator> {
    let mut zero_mass = coeffs.clone();
    zero_mass.m = vec![0.0; grid.node_count()];
    let mut op = assemble_h(&zero_mass, grid)?;
    op.label = "h0".into();
    Ok(op)
}

/// K = Σ D A D + diag(W)
pub fn assemble_electron_k(coeffs: &CoefficientSet, grid: &Grid) -> Result<SymmetricOperator> {
    if coeffs.grid != *grid {
        return Err(NelsonError::DimensionMismatch(
            "coefficient set was sampled on a different grid".into(),
        ));
    }
    let a = coeffs.big_a.clone();
    let mut coo = assemble_div_form(grid, &|i| a[i].clone());
    for i in 0..grid.node_count() {
        if coeffs.w[i] != 0.0 {
            coo.push(i, i, coeffs.w[i]);
        }
    }
    Ok(SymmetricOperator {
        matrix: coo.to_csr(),
        grid: grid.clone(),
        label: "K".into(),
    })
}

/// Discrete Dirichlet Laplacian (a = 1, c = 1, m = 0 case of assemble_h).
pub fn assemble_laplacian(grid: &Grid) -> SymmetricOperator {
    let ident = DMatrix::identity(grid.dim, grid.dim);
    let coo = assemble_div_form(grid, &|_| ident.clone());
    SymmetricOperator {
        matrix: coo.to_csr(),
        grid: grid.clone(),
        label: "laplacian".into(),
    }
}

/// diag(c)^{-1} h diag(c) with weight c².
pub fn gauge_transform(h: &SymmetricOperator, coeffs: &CoefficientSet) -> WeightedOperator {
    let m = &h.matrix;
    let mut coo = CooMatrix::new(m.dim);
    for i in 0..m.dim {
        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
            let j = m.col_idx[k];
            coo.push(i, j, m.values[k] * coeffs.c[j] / coeffs.c[i]);
        }
    }
    WeightedOperator {
        matrix: coo.to_csr(),
        grid: h.grid.clone(),
        weight: coeffs.c.iter().map(|v| v * v).collect(),
        label: format!("{}_gauge", h.label),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_1d() {
        // (dim=1, L=10, n=4) -> spacing 4, nodes {-6, -2, 2, 6}
        let g = build_grid(1, 10.0, 4).unwrap();
        assert_eq!(g.spacing(), 4.0);
        let xs: Vec<f64> = (0..4).map(|i| g.axis_coord(i)).collect();
        assert_eq!(xs, vec![-6.0, -2.0, 2.0, 6.0]);
    }

    #[test]
    fn grid_nodes_2d() {
        let g = build_grid(2, 1.0, 3).unwrap();
        assert_eq!(g.node_count(), 9);
        assert!((g.spacing() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(build_grid(1, 1.0, 1).is_err());
        assert!(build_grid(4, 1.0, 8).is_err());
        assert!(build_grid(0, 1.0, 8).is_err());
        assert!(build_grid(2, -1.0, 8).is_err());
        assert!(build_grid(2, 0.0, 8).is_err());
    }

    #[test]
    fn bracket_at_origin() {
        // m(x) = ⟨x⟩^{-1} at x = 0 is 1
        let f = ScalarField::BracketPower {
            amp: 1.0,
            exponent: -1.0,
        };
        assert_eq!(f.eval(&[0.0]), 1.0);
    }

    #[test]
    fn ellipticity_error_reports_node() {
        let g = build_grid(1, 1.0, 3).unwrap();
        let mut spec = CoefficientSpec::flat_with_mass(ScalarField::Zero, None);
        spec.c = ScalarField::Zero;
        match sample_coefficients(&spec, &g) {
            Err(NelsonError::Ellipticity { node, .. }) => assert_eq!(node, 0),
            other => panic!("expected ellipticity error, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_charge_near_one() {
        // unit-integral Gaussian quadrature on a fine grid
        let g = build_grid(1, 10.0, 399).unwrap();
        let width = 1.0f64;
        let amp = 1.0 / (width * (2.0 * std::f64::consts::PI).sqrt());
        let mut spec = CoefficientSpec::flat_with_mass(ScalarField::Zero, None);
        spec.rho = ScalarField::Gaussian { amp, width };
        let set = sample_coefficients(&spec, &g).unwrap();
        assert!((set.charge - 1.0).abs() <= 0.01, "q = {}", set.charge);
    }

    #[test]
    fn zero_rho_warns_q0() {
        let g = build_grid(1, 1.0, 3).unwrap();
        let spec = CoefficientSpec::flat_with_mass(ScalarField::Zero, None);
        let set = sample_coefficients(&spec, &g).unwrap();
        assert!(set.warnings.iter().any(|w| w.contains("q = 0")));
    }

    #[test]
    fn laplacian_1d_tridiagonal() {
        // n=3, dx=1 -> tridiag(2, -1), eigenvalues {2-sqrt2, 2, 2+sqrt2}
        let g = build_grid(1, 2.0, 3).unwrap();
        assert_eq!(g.spacing(), 1.0);
        let lap = assemble_laplacian(&g);
        let d = lap.matrix.to_dense();
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(0, 1)], -1.0);
        assert_eq!(d[(1, 0)], -1.0);
        assert_eq!(d[(2, 2)], 2.0);
        assert_eq!(d[(0, 2)], 0.0);
        let eig = SymmetricEigen::new(d);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        let s2 = 2.0f64.sqrt();
        for (got, want) in ev.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_interior_row_sums_vanish_1d() {
        let g = build_grid(1, 5.0, 9).unwrap();
        let d = assemble_laplacian(&g).matrix.to_dense();
        for i in 1..8 {
            let s: f64 = (0..9).map(|j| d[(i, j)]).sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_mass_shifts_spectrum() {
        let g = build_grid(1, 2.0, 3).unwrap();
        let mu = 0.7;
        let spec0 = CoefficientSpec::flat_with_mass(ScalarField::Zero, None);
        let spec1 = CoefficientSpec::flat_with_mass(ScalarField::Const(mu), None);
        let h0 = assemble_h(&sample_coefficients(&spec0, &g).unwrap(), &g).unwrap();
        let h1 = assemble_h(&sample_coefficients(&spec1, &g).unwrap(), &g).unwrap();
        let d0 = h0.matrix.to_dense();
        let d1 = h1.matrix.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let want = d0[(i, j)] + if i == j { mu * mu } else { 0.0 };
                assert!((d1[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_c_scales_operator() {
        // c = 2 everywhere: h = (1/4) Laplacian
        let g = build_grid(1, 2.0, 3).unwrap();
        let mut spec = CoefficientSpec::flat_with_mass(ScalarField::Zero, None);
        spec.c = ScalarField::Const(2.0);
        let h = assemble_h(&sample_coefficients(&spec, &g).unwrap(), &g).unwrap();
        let lap = assemble_laplacian(&g);
        let dh = h.matrix.to_dense();
        let dl = lap.matrix.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert!((dh[(i, j)] - dl[(i, j)] / 4.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn assembled_operators_symmetric_psd() {
        let g = build_grid(2, 3.0, 7).unwrap();
        let spec = CoefficientSpec {
            a: MatrixField::WithCross {
                diag: vec![ScalarField::Const(2.0), ScalarField::Const(1.5)],
                off: vec![(0, 1, ScalarField::Const(0.3))],
            },
            c: ScalarField::Sum(
                Box::new(ScalarField::Const(1.0)),
                Box::new(ScalarField::Gaussian {
                    amp: 0.5,
                    width: 1.0,
                }),
            ),
            m: ScalarField::BracketPower {
                amp: 1.0,
                exponent: -1.0,
            },
            mass_decay: Some((1.0, 1.0)),
            big_a: MatrixField::Isotropic(ScalarField::Const(1.0)),
            w: ScalarField::BracketPower {
                amp: 1.0,
                exponent: 4.0,
            },
            rho: ScalarField::Gaussian {
                amp: 1.0,
                width: 0.5,
            },
        };
        let set = sample_coefficients(&spec, &g).unwrap();
        for op in [
            assemble_h(&set, &g).unwrap(),
            assemble_electron_k(&set, &g).unwrap(),
            assemble_laplacian(&g),
        ] {
            assert_eq!(op.matrix.max_asymmetry(), 0.0, "{} not symmetric", op.label);
            let eig = SymmetricEigen::new(op.matrix.to_dense());
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let scale = op.matrix.norm_inf();
            assert!(min >= -1e-10 * scale, "{}: min eig {min}", op.label);
        }
    }

    #[test]
    fn rayleigh_quotients_scale_with_a() {
        // scaling scalar a by s scales every Rayleigh quotient of h0 by s
        let g = build_grid(1, 4.0, 15).unwrap();
        let s = 3.5;
        let mut spec1 = CoefficientSpec::flat_with_mass(ScalarField::Zero, None);
        spec1.c = ScalarField::Sum(
            Box::new(ScalarField::Const(1.0)),
            Box::new(ScalarField::Gaussian {
                amp: 0.3,
                width: 2.0,
            }),
        );
        let mut spec2 = spec1.clone();
        spec2.a = MatrixField::Isotropic(ScalarField::Const(s));
        let h1 = assemble_h(&sample_coefficients(&spec1, &g).unwrap(), &g).unwrap();
        let h2 = assemble_h(&sample_coefficients(&spec2, &g).unwrap(), &g).unwrap();
        let d1 = h1.matrix.to_dense();
        let d2 = h2.matrix.to_dense();
        let diff = (&d2 - &d1 * s).abs().max();
        assert!(diff < 1e-12);
    }

    #[test]
    fn gauge_transform_identity_when_c_one() {
        let g = build_grid(1, 2.0, 5).unwrap();
        let spec = CoefficientSpec::flat_with_mass(ScalarField::Const(1.0), None);
        let set = sample_coefficients(&spec, &g).unwrap();
        let h = assemble_h(&set, &g).unwrap();
        let gt = gauge_transform(&h, &set);
        let diff = (gt.matrix.to_dense() - h.matrix.to_dense()).abs().max();
        assert_eq!(diff, 0.0);
    }

    #[test]
    fn gauge_transform_weighted_symmetry() {
        let g = build_grid(1, 3.0, 12).unwrap();
        let mut spec = CoefficientSpec::flat_with_mass(
            ScalarField::BracketPower {
                amp: 1.0,
                exponent: -1.0,
            },
            Some((1.0, 1.0)),
        );
        spec.c = ScalarField::Sum(
            Box::new(ScalarField::Const(0.8)),
            Box::new(ScalarField::Gaussian {
                amp: 0.9,
                width: 1.5,
            }),
        );
        let set = sample_coefficients(&spec, &g).unwrap();
        let h = assemble_h(&set, &g).unwrap();
        let gt = gauge_transform(&h, &set);
        assert!(gt.weighted_asymmetry() < 1e-12);
    }

    #[test]
    fn lambda_min_decreases_with_extent() {
        // m = ⟨x⟩^{-1}, fixed node density: λ_min(h) decreases as L doubles
        let mut prev = f64::INFINITY;
        for &(l, n) in &[(10.0, 19usize), (20.0, 39), (40.0, 79)] {
            let g = build_grid(1, l, n).unwrap();
            let spec = CoefficientSpec::flat_with_mass(
                ScalarField::BracketPower {
                    amp: 1.0,
                    exponent: -1.0,
                },
                Some((1.0, 1.0)),
            );
            let h = assemble_h(&sample_coefficients(&spec, &g).unwrap(), &g).unwrap();
            let eig = SymmetricEigen::new(h.matrix.to_dense());
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min < prev, "λ_min did not decrease at L = {l}");
            prev = min;
        }
    }
}
