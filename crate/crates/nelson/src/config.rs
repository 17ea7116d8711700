//! Declarative experiment configuration: sectioned key = value file (TOML),
//! validated against the model hypotheses before any computation, and hashed
//! into every output for provenance.

use crate::error::{NelsonError, Result};
use crate::grid::{build_grid, CoefficientSpec, Grid, MatrixField, ScalarField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub dim: usize,
    pub extent: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientConfig {
    /// isotropic scale of the boson diffusion matrix [a^{jk}] = a_scale·I
    #[serde(default = "one")]
    pub a_scale: f64,
    /// conformal factor c (constant)
    #[serde(default = "one")]
    pub c_scale: f64,
    /// boson mass m(x) = mass_amp·⟨x⟩^{-mass_exponent}
    pub mass_amp: f64,
    #[serde(default = "one")]
    pub mass_exponent: f64,
    /// electron diffusion matrix [A^{jk}] = electron_a_scale·I
    #[serde(default = "one")]
    pub electron_a_scale: f64,
    /// confining potential W(X) = kappa·⟨X⟩^{2 delta}
    #[serde(default = "one")]
    pub confinement_kappa: f64,
    #[serde(default = "two")]
    pub confinement_delta: f64,
    /// charge density: Gaussian of this width, grid-normalized to unit charge
    pub rho_width: f64,
    #[serde(default = "one")]
    pub rho_amp: f64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FockConfig {
    pub modes: usize,
    pub n_max: usize,
    #[serde(default = "default_fock_limit")]
    pub limit: usize,
}

fn default_fock_limit() -> usize {
    crate::fock::DEFAULT_FOCK_LIMIT
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    /// one of: sigma, p, n_max, modes, n
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
}

fn default_k() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-8
}
fn default_dense_limit() -> usize {
    crate::spectral::DEFAULT_DENSE_LIMIT
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: default_k(),
            tol: default_tol(),
            seed: 0,
            dense_limit: default_dense_limit(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// subset of: positivity, trotter, gaussian, weighted, ultracontractivity,
    /// weights, dissipativity, frac_power, sobolev, commutator
    pub checks: Vec<String>,
    #[serde(default = "default_t_values")]
    pub t_values: Vec<f64>,
    #[serde(default = "default_s_values")]
    pub s_values: Vec<f64>,
    #[serde(default = "default_r_values")]
    pub r_values: Vec<f64>,
    #[serde(default = "default_l_values")]
    pub l_values: Vec<f64>,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_t_values() -> Vec<f64> {
    vec![0.1, 0.3, 1.0, 3.0, 10.0]
}
fn default_s_values() -> Vec<f64> {
    vec![4.0, 16.0, 64.0, 256.0]
}
fn default_r_values() -> Vec<f64> {
    vec![2.0, 4.0, 8.0, 16.0]
}
fn default_l_values() -> Vec<f64> {
    vec![20.0, 40.0, 80.0]
}
fn default_eps() -> f64 {
    0.1
}
fn default_beta() -> f64 {
    0.5
}
fn default_delta() -> f64 {
    1.2
}
fn default_sigma() -> f64 {
    0.1
}
fn default_samples() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IonizationConfig {
    pub r_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub coefficients: CoefficientConfig,
    pub fock: FockConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub ionization: Option<IonizationConfig>,
    #[serde(skip)]
    pub hash: String,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| NelsonError::Config(e.to_string()))?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        cfg.hash = format!("{:x}", hasher.finalize());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NelsonError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn short_hash(&self) -> &str {
        &self.hash[..8.min(self.hash.len())]
    }

    fn validate(&mut self) -> Result<()> {
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) || g.n < 2 || !(g.extent > 0.0) {
            return Err(NelsonError::Config(format!(
                "grid: need dim in 1..=3, n >= 2, extent > 0 (got dim={}, n={}, extent={})",
                g.dim, g.n, g.extent
            )));
        }
        let c = &self.coefficients;
        if !(c.a_scale > 0.0) || !(c.c_scale > 0.0) || !(c.electron_a_scale > 0.0) {
            return Err(NelsonError::Config(
                "coefficients: ellipticity requires positive a_scale, c_scale, electron_a_scale"
                    .into(),
            ));
        }
        if c.mass_amp < 0.0 {
            return Err(NelsonError::Config("coefficients: mass_amp must be >= 0".into()));
        }
        if !(c.rho_width > 0.0) {
            return Err(NelsonError::Config("coefficients: rho_width must be > 0".into()));
        }
        if c.rho_amp < 0.0 {
            return Err(NelsonError::Config(
                "coefficients: rho_amp must be >= 0 (charge density is nonnegative)".into(),
            ));
        }
        if c.rho_amp == 0.0 {
            self.warnings
                .push("rho_amp = 0: total charge q vanishes, coupling is trivial".into());
        }
        if c.confinement_kappa < 0.0 {
            return Err(NelsonError::Config("coefficients: confinement_kappa must be >= 0".into()));
        }
        if c.confinement_delta <= 1.5 {
            self.warnings.push(format!(
                "confinement_delta = {} <= 3/2: outside the ground-state existence hypotheses (exploratory run)",
                c.confinement_delta
            ));
        }
        if self.fock.modes == 0 || self.fock.modes > self.grid_node_count() {
            return Err(NelsonError::Config(format!(
                "fock: modes must lie in 1..={} (grid nodes)",
                self.grid_node_count()
            )));
        }
        if !(self.solver.tol > 0.0) || self.solver.k == 0 {
            return Err(NelsonError::Config("solver: need tol > 0 and k >= 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(NelsonError::Config("sweep: value list is empty".into()));
            }
            match sweep.parameter.as_str() {
                "sigma" => {
                    if sweep.values.iter().any(|&v| v <= 0.0) {
                        return Err(NelsonError::Config("sweep: sigma values must be positive".into()));
                    }
                    if sweep.values.windows(2).any(|w| w[1] >= w[0]) {
                        return Err(NelsonError::Config(
                            "sweep: sigma values must be strictly decreasing".into(),
                        ));
                    }
                }
                "p" => {
                    if sweep.values.iter().any(|&v| v < 0.0) {
                        return Err(NelsonError::Config("sweep: p values must be >= 0".into()));
                    }
                }
                "n_max" | "modes" | "n" => {
                    if sweep
                        .values
                        .iter()
                        .any(|&v| v < 1.0 || v.fract() != 0.0)
                    {
                        return Err(NelsonError::Config(format!(
                            "sweep: {} values must be positive integers",
                            sweep.parameter
                        )));
                    }
                }
                other => {
                    return Err(NelsonError::Config(format!(
                        "sweep: unknown parameter '{other}' (expected sigma, p, n_max, modes or n)"
                    )));
                }
            }
        }
        if let Some(v) = &self.verify {
            const KNOWN: [&str; 10] = [
                "positivity",
                "trotter",
                "gaussian",
                "weighted",
                "ultracontractivity",
                "weights",
                "dissipativity",
                "frac_power",
                "sobolev",
                "commutator",
            ];
            for chk in &v.checks {
                if !KNOWN.contains(&chk.as_str()) {
                    return Err(NelsonError::Config(format!(
                        "verify: unknown check '{chk}' (expected one of {KNOWN:?})"
                    )));
                }
            }
            if v.checks.iter().any(|c| c == "weights") {
                let d = self.grid.dim as f64;
                if !(v.epsilon > 0.0 && v.epsilon < d / (d + 4.0 * v.alpha)) {
                    return Err(NelsonError::Config(format!(
                        "verify: epsilon {} outside (0, d/(d+4*alpha)) = (0, {})",
                        v.epsilon,
                        d / (d + 4.0 * v.alpha)
                    )));
                }
            }
        }
        if let Some(ion) = &self.ionization {
            if ion.r_values.is_empty() {
                return Err(NelsonError::Config("ionization: r_values is empty".into()));
            }
            if ion.r_values.iter().any(|&r| r < 0.0) {
                return Err(NelsonError::Config("ionization: r_values must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn grid_node_count(&self) -> usize {
        self.grid.n.pow(self.grid.dim as u32)
    }

    pub fn build_grid(&self) -> Result<Grid> {
        build_grid(self.grid.dim, self.grid.extent, self.grid.n)
    }

    /// Boson-side coefficient fields; `p_override` substitutes the mass decay
    /// exponent during a p sweep.
    pub fn coefficient_spec(&self, p_override: Option<f64>) -> CoefficientSpec {
        let c = &self.coefficients;
        let p = p_override.unwrap_or(c.mass_exponent);
        CoefficientSpec {
            a: MatrixField::Isotropic(ScalarField::Const(c.a_scale)),
            c: ScalarField::Const(c.c_scale),
            m: ScalarField::BracketPower {
                amp: c.mass_amp,
                exponent: -p,
            },
            mass_decay: Some((c.mass_amp, p)),
            big_a: MatrixField::Isotropic(ScalarField::Const(c.electron_a_scale)),
            w: ScalarField::BracketPower {
                amp: c.confinement_kappa,
                exponent: 2.0 * c.confinement_delta,
            },
            rho: ScalarField::Gaussian {
                amp: c.rho_amp,
                width: c.rho_width,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[grid]
dim = 1
extent = 8.0
n = 32

[coefficients]
mass_amp = 1.0
rho_width = 1.0

[fock]
modes = 4
n_max = 3
"#;

    #[test]
    fn parses_and_hashes() {
        let cfg = ExperimentConfig::from_str(BASE).unwrap();
        assert_eq!(cfg.grid.n, 32);
        assert_eq!(cfg.hash.len(), 64);
        assert_eq!(cfg.solver.k, 1);
        assert!(cfg.warnings.is_empty());
        // same text, same hash; different text, different hash
        let cfg2 = ExperimentConfig::from_str(BASE).unwrap();
        assert_eq!(cfg.hash, cfg2.hash);
        let cfg3 = ExperimentConfig::from_str(&BASE.replace("n = 32", "n = 16")).unwrap();
        assert_ne!(cfg.hash, cfg3.hash);
    }

    #[test]
    fn rejects_hypothesis_violations() {
        let bad = BASE.replace("mass_amp = 1.0", "mass_amp = -1.0");
        assert!(ExperimentConfig::from_str(&bad).is_err());
        let bad = BASE.replace("dim = 1", "dim = 4");
        assert!(ExperimentConfig::from_str(&bad).is_err());
        let bad = format!("{BASE}\n[sweep]\nparameter = \"sigma\"\nvalues = [0.1, 0.5]\n");
        assert!(ExperimentConfig::from_str(&bad).is_err());
        let bad = format!("{BASE}\n[sweep]\nparameter = \"voltage\"\nvalues = [1.0]\n");
        assert!(ExperimentConfig::from_str(&bad).is_err());
        let bad = format!(
            "{BASE}\n[verify]\nchecks = [\"weights\"]\nepsilon = 0.9\n"
        );
        assert!(ExperimentConfig::from_str(&bad).is_err());
    }

    #[test]
    fn exploratory_delta_warns_not_errors() {
        let txt = BASE.replace(
            "mass_amp = 1.0",
            "mass_amp = 1.0\nconfinement_delta = 1.0",
        );
        let cfg = ExperimentConfig::from_str(&txt).unwrap();
        assert!(cfg.warnings.iter().any(|w| w.contains("3/2")));
    }
}
