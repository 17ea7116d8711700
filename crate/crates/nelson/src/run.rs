//! Experiment drivers: each takes a validated configuration and returns
//! result tables ready for CSV emission.

use crate::config::ExperimentConfig;
use crate::eigen::{lowest_eigenpairs, observables, ionization_threshold};
use crate::error::{NelsonError, Result};
use crate::fock::FockBasis;
use crate::grid::{
    assemble_electron_k, assemble_h, assemble_h0, assemble_laplacian, build_grid,
    sample_coefficients, CoefficientSet, Grid, SymmetricOperator,
};
use crate::model::{
    assemble_h_full, assemble_h_sigma, assemble_h_tilde_sigma, coupling_operator,
    CompositeHamiltonian, CouplingOperator, ModeBasis,
};
use crate::report::{bound_report_table, ResultTable};
use crate::spectral::{apply_function, eigendecompose, CutoffProfile, SpectralDecomposition};
use crate::verify;
use rayon::prelude::*;

/// Per-run substitutions used by sweeps; `None` keeps the configured value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub mass_exponent: Option<f64>,
    pub n_per_axis: Option<usize>,
    pub modes: Option<usize>,
    pub n_max: Option<usize>,
}

/// Everything needed to assemble composite Hamiltonians for one parameter set.
pub struct Model {
    pub grid: Grid,
    pub coeffs: CoefficientSet,
    pub h_boson: SymmetricOperator,
    pub dec_h: SpectralDecomposition,
    pub k_op: SymmetricOperator,
    pub modes: ModeBasis,
    pub coupling: CouplingOperator,
    pub basis: FockBasis,
}

pub fn build_model(cfg: &ExperimentConfig, ov: Overrides) -> Result<Model> {
    let n = ov.n_per_axis.unwrap_or(cfg.grid.n);
    let grid = build_grid(cfg.grid.dim, cfg.grid.extent, n)?;
    let spec = cfg.coefficient_spec(ov.mass_exponent);
    let coeffs = sample_coefficients(&spec, &grid)?;
    let h_boson = assemble_h(&coeffs, &grid)?;
    let dec_h = eigendecompose(&h_boson, cfg.solver.dense_limit)?;
    let k_op = assemble_electron_k(&coeffs, &grid)?;
    let modes = ModeBasis::from_h_decomposition(&dec_h, ov.modes.unwrap_or(cfg.fock.modes))?;
    let coupling = coupling_operator(&spec.rho, &dec_h, &modes, &grid, &grid)?;
    let basis = FockBasis::new(
        modes.count(),
        ov.n_max.unwrap_or(cfg.fock.n_max),
        cfg.fock.limit,
    )?;
    Ok(Model {
        grid,
        coeffs,
        h_boson,
        dec_h,
        k_op,
        modes,
        coupling,
        basis,
    })
}

fn column_vec(m: &nalgebra::DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().cloned().collect()
}

fn electron_ground(model: &Model, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<f64>> {
    Ok(lowest_eigenpairs(&model.k_op.matrix, 1, cfg.solver.tol, seed)?.ground_state())
}

/// Lowest k eigenpairs of H with per-state diagnostics.
pub fn run_groundstate(cfg: &ExperimentConfig, seed: u64) -> Result<ResultTable> {
    let model = build_model(cfg, Overrides::default())?;
    let h = assemble_h_full(&model.k_op, &model.modes, &model.coupling, &model.basis)?;
    let res = lowest_eigenpairs(&h.total, cfg.solver.k, cfg.solver.tol, seed)?;
    let el = electron_ground(&model, cfg, seed)?;
    let mut table = ResultTable::new(
        "groundstate",
        &[
            "level",
            "energy",
            "residual",
            "vacuum_overlap",
            "mean_boson_number",
        ],
        &cfg.hash,
    );
    for level in 0..res.eigenvalues.len() {
        let psi = column_vec(&res.eigenvectors, level);
        let obs = observables(&psi, &h, &model.basis, &el)?;
        table.push_row(vec![
            level as f64,
            res.eigenvalues[level],
            res.residuals[level],
            obs.vacuum_overlap,
            obs.mean_boson_number,
        ]);
    }
    table
        .notes
        .push(format!("hilbert_dim = {}", h.dim()));
    table.notes.push(format!("iterations = {}", res.iterations));
    Ok(table)
}

fn solve_ground(
    h: &CompositeHamiltonian,
    model: &Model,
    cfg: &ExperimentConfig,
    seed: u64,
    el: &[f64],
) -> Result<(f64, f64, f64, f64)> {
    let res = lowest_eigenpairs(&h.total, 1, cfg.solver.tol, seed)?;
    let psi = res.ground_state();
    let obs = observables(&psi, h, &model.basis, el)?;
    Ok((
        res.ground_energy(),
        obs.mean_boson_number,
        obs.vacuum_overlap,
        res.residuals[0],
    ))
}

/// Norm of the coupling removed by the infrared cutoff:
/// sup over electron positions of ‖ω^{-1} (v - v_σ)(X)‖.
fn ir_tail_norm(model: &Model, sigma: f64) -> f64 {
    let chi = CutoffProfile;
    let g = &model.coupling.g;
    let mut sup: f64 = 0.0;
    for x in 0..g.ncols() {
        let mut s = 0.0;
        for (m, &w) in model.modes.energies.iter().enumerate() {
            let cut = 1.0 - chi.chi(w / sigma);
            s += (cut * g[(m, x)]).powi(2) / w;
        }
        sup = sup.max(s.sqrt());
    }
    sup
}

/// Infrared sweep: either over cutoffs σ (strictly decreasing) comparing
/// H, H_σ and H̃_σ, or over mass-decay exponents p comparing coupling norms.
pub fn run_ir_sweep(cfg: &ExperimentConfig, seed: u64) -> Result<ResultTable> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| NelsonError::Config("ir-sweep requires a [sweep] section".into()))?;
    match sweep.parameter.as_str() {
        "sigma" => {
            let model = build_model(cfg, Overrides::default())?;
            let el = electron_ground(&model, cfg, seed)?;
            let h_full =
                assemble_h_full(&model.k_op, &model.modes, &model.coupling, &model.basis)?;
            let e_full = lowest_eigenpairs(&h_full.total, 1, cfg.solver.tol, seed)?.ground_energy();
            let rows: Result<Vec<Vec<f64>>> = sweep
                .values
                .par_iter()
                .map(|&sigma| -> Result<Vec<f64>> {
                    let h_s = assemble_h_sigma(
                        &model.k_op,
                        &model.modes,
                        &model.coupling,
                        &model.basis,
                        sigma,
                    )?;
                    let (e_s, n_s, ov_s, _) = solve_ground(&h_s, &model, cfg, seed, &el)?;
                    let h_t = assemble_h_tilde_sigma(
                        &model.k_op,
                        &model.modes,
                        &model.coupling,
                        &model.basis,
                        sigma,
                    )?;
                    let e_t =
                        lowest_eigenpairs(&h_t.total, 1, cfg.solver.tol, seed)?.ground_energy();
                    Ok(vec![
                        sigma,
                        e_full,
                        e_s,
                        e_t,
                        (e_full - e_s).abs(),
                        n_s,
                        ov_s,
                        ir_tail_norm(&model, sigma),
                    ])
                })
                .collect();
            let mut table = ResultTable::new(
                "ir_sweep",
                &[
                    "sigma",
                    "energy_full",
                    "energy_sigma",
                    "energy_tilde_sigma",
                    "energy_gap",
                    "mean_boson_number_sigma",
                    "vacuum_overlap_sigma",
                    "ir_tail_norm",
                ],
                &cfg.hash,
            );
            for row in rows? {
                table.push_row(row);
            }
            table
                .notes
                .push(format!("omega_min = {:.6e}", model.modes.energies[0]));
            Ok(table)
        }
        "p" => {
            let rows: Result<Vec<Vec<f64>>> = sweep
                .values
                .par_iter()
                .map(|&p| -> Result<Vec<f64>> {
                    let model = build_model(
                        cfg,
                        Overrides {
                            mass_exponent: Some(p),
                            ..Default::default()
                        },
                    )?;
                    let el = electron_ground(&model, cfg, seed)?;
                    let h =
                        assemble_h_full(&model.k_op, &model.modes, &model.coupling, &model.basis)?;
                    let (e, n, ov, _) = solve_ground(&h, &model, cfg, seed, &el)?;
                    Ok(vec![
                        p,
                        e,
                        n,
                        ov,
                        model.coupling.sup_norm(0.5)?,
                        model.coupling.sup_norm(1.0)?,
                        model.coupling.sup_norm(1.5)?,
                    ])
                })
                .collect();
            let mut table = ResultTable::new(
                "ir_sweep",
                &[
                    "p",
                    "energy",
                    "mean_boson_number",
                    "vacuum_overlap",
                    "coupling_norm_half",
                    "coupling_norm_one",
                    "coupling_norm_three_half",
                ],
                &cfg.hash,
            );
            for row in rows? {
                table.push_row(row);
            }
            Ok(table)
        }
        other => Err(NelsonError::Config(format!(
            "ir-sweep supports sweep parameters 'sigma' or 'p', got '{other}'"
        ))),
    }
}

/// Truncation sweep over n_max, modes, or grid resolution. For the Fock-side
/// sweeps the energy must be nonincreasing in the sweep value (the spaces are
/// nested), and the returned flag reports that check.
pub fn run_convergence(cfg: &ExperimentConfig, seed: u64) -> Result<(ResultTable, bool)> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| NelsonError::Config("convergence requires a [sweep] section".into()))?;
    let param = sweep.parameter.as_str();
    if !matches!(param, "n_max" | "modes" | "n") {
        return Err(NelsonError::Config(format!(
            "convergence supports sweep parameters 'n_max', 'modes' or 'n', got '{param}'"
        )));
    }
    let rows: Result<Vec<Vec<f64>>> = sweep
        .values
        .par_iter()
        .map(|&v| -> Result<Vec<f64>> {
            let v_usize = v as usize;
            let ov = match param {
                "n_max" => Overrides {
                    n_max: Some(v_usize),
                    ..Default::default()
                },
                "modes" => Overrides {
                    modes: Some(v_usize),
                    ..Default::default()
                },
                _ => Overrides {
                    n_per_axis: Some(v_usize),
                    ..Default::default()
                },
            };
            let model = build_model(cfg, ov)?;
            let el = electron_ground(&model, cfg, seed)?;
            let h = assemble_h_full(&model.k_op, &model.modes, &model.coupling, &model.basis)?;
            let res = lowest_eigenpairs(&h.total, 1, cfg.solver.tol, seed)?;
            let psi = res.ground_state();
            let obs = observables(&psi, &h, &model.basis, &el)?;
            Ok(vec![
                v,
                h.dim() as f64,
                res.ground_energy(),
                obs.mean_boson_number,
                res.residuals[0],
            ])
        })
        .collect();
    let rows = rows?;
    let mut table = ResultTable::new(
        "convergence",
        &[
            param,
            "hilbert_dim",
            "energy",
            "mean_boson_number",
            "residual",
        ],
        &cfg.hash,
    );
    for row in &rows {
        table.push_row(row.clone());
    }
    // variational monotonicity only applies where the spaces are nested
    let mut monotone = true;
    if matches!(param, "n_max" | "modes") {
        let mut sorted: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[2])).collect();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in sorted.windows(2) {
            let slack = 10.0 * cfg.solver.tol * w[0].1.abs().max(1.0);
            if w[1].1 > w[0].1 + slack {
                monotone = false;
            }
        }
        table
            .notes
            .push(format!("variational_monotonicity = {monotone}"));
    }
    Ok((table, monotone))
}

/// Run the configured bound checks. Returns one table per check plus a
/// summary table, and whether every check passed.
pub fn run_verify(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<ResultTable>, bool)> {
    let v = cfg
        .verify
        .as_ref()
        .ok_or_else(|| NelsonError::Config("verify requires a [verify] section".into()))?;
    let grid = cfg.build_grid()?;
    let spec = cfg.coefficient_spec(None);
    let coeffs = sample_coefficients(&spec, &grid)?;
    let h = assemble_h(&coeffs, &grid)?;
    let dec_h = eigendecompose(&h, cfg.solver.dense_limit)?;
    let mut dec_lap: Option<SpectralDecomposition> = None;
    let lap_dec = |grid: &Grid| -> Result<SpectralDecomposition> {
        eigendecompose(&assemble_laplacian(grid), cfg.solver.dense_limit)
    };

    let mut reports = Vec::new();
    for check in &v.checks {
        let rep = match check.as_str() {
            "positivity" => verify::check_positivity(&dec_h, &v.t_values, &grid)?,
            "trotter" => {
                let dec_h0 = eigendecompose(&assemble_h0(&coeffs, &grid)?, cfg.solver.dense_limit)?;
                verify::check_trotter_domination(&dec_h, &dec_h0, &v.t_values)?
            }
            "gaussian" => {
                if dec_lap.is_none() {
                    dec_lap = Some(lap_dec(&grid)?);
                }
                let dilations = [0.5, 0.6, 0.75, 0.9, 1.0];
                verify::fit_gaussian_domination(
                    &dec_h,
                    dec_lap.as_ref().unwrap(),
                    &v.t_values,
                    &dilations,
                    &grid,
                )?
            }
            "weighted" => {
                if dec_lap.is_none() {
                    dec_lap = Some(lap_dec(&grid)?);
                }
                verify::fit_weighted_domination(
                    &dec_h,
                    dec_lap.as_ref().unwrap(),
                    cfg.coefficients.mass_amp,
                    &v.t_values,
                    &grid,
                )?
            }
            "ultracontractivity" => {
                verify::ultracontractivity_constant(&dec_h, &v.t_values, &grid)?
            }
            "weights" => verify::check_weight_conditions(v.alpha, v.epsilon, &v.s_values, &coeffs)?,
            "dissipativity" => {
                verify::dissipativity_check(&h.matrix, &coeffs, v.s_values[0], v.samples, seed)?
            }
            "frac_power" => {
                let pairs = matched_density_decompositions(cfg, &v.l_values)?;
                verify::check_frac_power_bound(&pairs, v.beta, v.epsilon)?
            }
            "sobolev" => {
                let grids = matched_density_grids(cfg, &v.l_values)?;
                verify::check_sobolev_bound(&grids, v.gamma, v.delta, cfg.solver.dense_limit)?
            }
            "commutator" => {
                let chi = CutoffProfile;
                let sigma = v.sigma;
                let om_sigma = apply_function(&dec_h, |l| {
                    chi.ir_dispersion_map(l.max(0.0).sqrt(), sigma)
                })?;
                // gauge-stability reference on a once-refined grid when affordable
                let n_fine = 2 * grid.n_per_axis + 1;
                let fine = if n_fine.pow(grid.dim as u32) <= cfg.solver.dense_limit {
                    let grid_f = build_grid(grid.dim, grid.extent, n_fine)?;
                    let coeffs_f = sample_coefficients(&spec, &grid_f)?;
                    let dec_f =
                        eigendecompose(&assemble_h(&coeffs_f, &grid_f)?, cfg.solver.dense_limit)?;
                    let om_f = apply_function(&dec_f, |l| {
                        chi.ir_dispersion_map(l.max(0.0).sqrt(), sigma)
                    })?;
                    Some((om_f, grid_f))
                } else {
                    None
                };
                verify::commutator_scaling_check(
                    &om_sigma,
                    &grid,
                    &v.r_values,
                    fine.as_ref().map(|(m, g)| (m, g)),
                )?
            }
            other => {
                return Err(NelsonError::Config(format!("unknown check '{other}'")));
            }
        };
        reports.push(rep);
    }

    let all_passed = reports.iter().all(|r| r.passed);
    let mut tables: Vec<ResultTable> = reports
        .iter()
        .map(|r| bound_report_table(r, &cfg.hash))
        .collect();
    let mut summary = ResultTable::new(
        "verify_summary",
        &["check_index", "passed", "max_violation"],
        &cfg.hash,
    );
    for (i, r) in reports.iter().enumerate() {
        summary.push_row(vec![
            i as f64,
            if r.passed { 1.0 } else { 0.0 },
            r.max_violation,
        ]);
        summary.notes.push(format!(
            "check {} = {} ({})",
            i,
            r.name,
            if r.passed { "pass" } else { "FAIL" }
        ));
    }
    tables.push(summary);
    Ok((tables, all_passed))
}

/// Grids with the base spacing held fixed while the extent grows through the
/// given half-lengths L.
fn matched_density_grids(cfg: &ExperimentConfig, l_values: &[f64]) -> Result<Vec<Grid>> {
    let base = cfg.build_grid()?;
    let dx = base.spacing();
    l_values
        .iter()
        .map(|&l| {
            let n = (2.0 * l / dx - 1.0).round() as usize;
            build_grid(base.dim, l, n.max(2))
        })
        .collect()
}

fn matched_density_decompositions(
    cfg: &ExperimentConfig,
    l_values: &[f64],
) -> Result<Vec<(Grid, SpectralDecomposition)>> {
    let spec = cfg.coefficient_spec(None);
    matched_density_grids(cfg, l_values)?
        .into_iter()
        .map(|g| {
            let coeffs = sample_coefficients(&spec, &g)?;
            let dec = eigendecompose(&assemble_h(&coeffs, &g)?, cfg.solver.dense_limit)?;
            Ok((g, dec))
        })
        .collect()
}

/// Ground energies of H restricted to |X| > R, against the unrestricted
/// ground energy; a positive margin for every R is the binding signature.
pub fn run_ionization(cfg: &ExperimentConfig, seed: u64) -> Result<ResultTable> {
    let ion = cfg
        .ionization
        .as_ref()
        .ok_or_else(|| NelsonError::Config("ionization requires an [ionization] section".into()))?;
    let model = build_model(cfg, Overrides::default())?;
    let h = assemble_h_full(&model.k_op, &model.modes, &model.coupling, &model.basis)?;
    let mut r_list = ion.r_values.clone();
    if r_list.first() != Some(&0.0) {
        r_list.insert(0, 0.0);
    }
    let energies = ionization_threshold(&h, &model.grid, &r_list, cfg.solver.tol, seed)?;
    let e_gs = energies[0];
    let mut table = ResultTable::new(
        "ionization",
        &["radius", "sigma_r", "binding_margin"],
        &cfg.hash,
    );
    for (&r, &e) in r_list.iter().zip(&energies) {
        table.push_row(vec![r, e, e - e_gs]);
    }
    table.notes.push(format!("ground_energy = {e_gs:.12e}"));
    Ok(table)
}
