//! TOML run configurations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{self, BuiltinParams, HamiltonianSystem, TrigTerm};
use crate::homology::ShootingParams;

/// A Hamiltonian (or surface function): a builtin with parameters, or
/// explicit trigonometric terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TrigTerm>>,
}

impl HamiltonianSpec {
    pub fn build(&self, half_dim: usize) -> Result<HamiltonianSystem> {
        match (&self.builtin, &self.terms) {
            (Some(name), None) => hamiltonians::builtin(
                name,
                half_dim,
                &BuiltinParams {
                    epsilon: self.epsilon,
                    matrix: self.matrix.clone(),
                },
            ),
            (None, Some(terms)) => {
                if self.epsilon.is_some() || self.matrix.is_some() {
                    return Err(Error::Config(
                        "`epsilon` and `matrix` apply only to builtin Hamiltonians".into(),
                    ));
                }
                hamiltonians::from_trig_polynomial(half_dim, terms.clone())
            }
            (Some(_), Some(_)) => Err(Error::Config(
                "give either `builtin` or `terms`, not both".into(),
            )),
            (None, None) => Err(Error::Config("missing `builtin` or `terms`".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub newton: f64,
    pub phi: f64,
    pub dedup: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            newton: 1e-10,
            phi: 1e-12,
            dedup: 1e-6,
        }
    }
}

fn default_starts() -> usize {
    200
}

fn default_outer_factor() -> usize {
    4
}

/// Configuration of `find-orbits`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub half_dim: usize,
    pub hamiltonian: HamiltonianSpec,
    /// Overrides the automatic choice of `n₀`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0_override: Option<usize>,
    /// `N = max(outer_factor·n₀, 32)`.
    #[serde(default = "default_outer_factor")]
    pub outer_factor: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}` must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.half_dim == 0 {
            return Err(Error::Config("`half_dim` must be at least 1".into()));
        }
        if self.starts == 0 {
            return Err(Error::Config("`starts` must be at least 1".into()));
        }
        if self.outer_factor == 0 {
            return Err(Error::Config("`outer_factor` must be at least 1".into()));
        }
        if self.n0_override == Some(0) {
            return Err(Error::Config("`n0_override` must be at least 1".into()));
        }
        check_positive("tolerances.newton", self.tolerances.newton)?;
        check_positive("tolerances.phi", self.tolerances.phi)?;
        check_positive("tolerances.dedup", self.tolerances.dedup)?;
        Ok(())
    }

    /// Outer truncation order for a given `n₀`.
    pub fn order(&self, n0: usize) -> usize {
        (self.outer_factor * n0).max(crate::reduction::MIN_OUTER_ORDER)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootingConfig {
    pub delta: f64,
    pub tolerance: f64,
    pub landing_radius: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        let p = ShootingParams::default();
        Self {
            delta: p.delta,
            tolerance: p.tolerance,
            landing_radius: p.landing_radius,
        }
    }
}

impl ShootingConfig {
    pub fn params(&self) -> ShootingParams {
        ShootingParams {
            delta: self.delta,
            tolerance: self.tolerance,
            landing_radius: self.landing_radius,
            ..ShootingParams::default()
        }
    }
}

/// Configuration of `morse-homology`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomologyConfig {
    pub function: HamiltonianSpec,
    /// Second function for the invariance check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<HamiltonianSpec>,
    #[serde(default)]
    pub shooting: ShootingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl HomologyConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("shooting.delta", self.shooting.delta)?;
        check_positive("shooting.tolerance", self.shooting.tolerance)?;
        check_positive("shooting.landing_radius", self.shooting.landing_radius)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    parse_run_config(&read(path)?).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_homology_config(text: &str) -> Result<HomologyConfig> {
    let cfg: HomologyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_homology_config(path: &Path) -> Result<HomologyConfig> {
    parse_homology_config(&read(path)?).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
