//! SQD, ExtSQD and TrimSQD drivers for a single fragment.

mod report;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sbd::{SbdError, SolverOptions};
use crate::HARTREE_TO_KCAL_PER_MOL;

pub use report::{EnergyReport, FinalStage, IterationRecord, PhaseTimings, SampleSummary, SeedRecord};
pub use run::{run_extsqd, run_pipeline, run_sqd, run_trimsqd};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
    #[error("no configurations survived to form a subspace")]
    EmptySubspace,
    #[error("sample strings have {found} orbitals, Hamiltonian has {expected}")]
    SampleMismatch { expected: usize, found: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error("subspace solve did not converge (report retained)")]
    NoConvergence(Box<EnergyReport>),
    #[error(transparent)]
    Solver(#[from] SbdError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sqd,
    Extsqd,
    Trimsqd,
}

impl Method {
    /// Baseline final-diagonalization threshold.
    pub fn default_epsilon(self) -> f64 {
        match self {
            Method::Trimsqd => 5e-6,
            Method::Extsqd => 1e-6,
            Method::Sqd => 0.0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sqd => "sqd",
            Method::Extsqd => "extsqd",
            Method::Trimsqd => "trimsqd",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sqd" => Ok(Method::Sqd),
            "extsqd" => Ok(Method::Extsqd),
            "trimsqd" => Ok(Method::Trimsqd),
            other => Err(format!("unknown method {other:?} (expected sqd, extsqd or trimsqd)")),
        }
    }
}

/// Hyperparameters of a pipeline run. Field names double as the keys of the
/// TOML run-configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub method: Method,
    /// Shot count requested from a sampler; informational for file input.
    pub shots: u64,
    pub recovery_iterations: usize,
    pub subgroup_count: usize,
    pub subgroup_capacity: usize,
    /// Percent kept per subgroup.
    pub k1: f64,
    /// Percent kept from the merged subspace.
    pub k2: f64,
    /// Final amplitude threshold; the method's baseline when absent.
    pub epsilon: Option<f64>,
    /// 2 extends by single excitations, 0 disables the extension.
    pub extension_distance: u32,
    /// Drop extension partners with `|H_xy|` at or below this value.
    pub extension_screen: f64,
    /// Stop the recovery loop once `|dE|` between iterations falls below
    /// this value (Hartree).
    pub early_stop: Option<f64>,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: Method::Trimsqd,
            shots: 100_000,
            recovery_iterations: 5,
            subgroup_count: 8,
            subgroup_capacity: 10_000,
            k1: 10.0,
            k2: 50.0,
            epsilon: None,
            extension_distance: 2,
            extension_screen: 0.0,
            early_stop: None,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn for_method(method: Method) -> Self {
        PipelineConfig { method, ..Default::default() }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or_else(|| self.method.default_epsilon())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::InvalidConfig(msg));
        if !(self.k1 > 0.0 && self.k1 <= 100.0) {
            return bad(format!("k1 = {} outside (0, 100]", self.k1));
        }
        if !(self.k2 > 0.0 && self.k2 <= 100.0) {
            return bad(format!("k2 = {} outside (0, 100]", self.k2));
        }
        if let Some(eps) = self.epsilon {
            if !(eps >= 0.0 && eps.is_finite()) {
                return bad(format!("epsilon = {eps} must be a finite value >= 0"));
            }
        }
        if self.subgroup_count == 0 {
            return bad("subgroup_count must be at least 1".into());
        }
        if self.subgroup_capacity == 0 {
            return bad("subgroup_capacity must be at least 1".into());
        }
        if self.recovery_iterations == 0 {
            return bad("recovery_iterations must be at least 1".into());
        }
        match self.extension_distance {
            0 | 2 => {}
            4 => return bad("extension_distance = 4 (double-excitation extension) is not enabled".into()),
            d => return bad(format!("extension_distance = {d} must be 0 or 2")),
        }
        if self.extension_screen.is_nan() || self.extension_screen < 0.0 {
            return bad("extension_screen must be >= 0".into());
        }
        if self.solver.tol.is_nan() || self.solver.tol <= 0.0 {
            return bad("solver.tol must be positive".into());
        }
        Ok(())
    }
}

/// Fragment solver choice by active orbital count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Fci,
    Trimsqd,
}

/// Largest active orbital count routed to TrimSQD.
pub const MAX_ROUTED_ORBITALS: usize = 45;

/// FCI below 13 active orbitals, TrimSQD for 13..=45; larger fragments are
/// rejected unless `force` is set.
pub fn solver_router(active_orbitals: usize, force: bool) -> Result<Route, PipelineError> {
    match active_orbitals {
        0 => Err(PipelineError::Unsupported("active space has no orbitals".into())),
        1..=12 => Ok(Route::Fci),
        13..=MAX_ROUTED_ORBITALS => Ok(Route::Trimsqd),
        _ if force => Ok(Route::Trimsqd),
        m => Err(PipelineError::Unsupported(format!(
            "{m} active orbitals exceeds the supported maximum of {MAX_ROUTED_ORBITALS}"
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BindingEnergy {
    pub hartree: f64,
    pub kcal_per_mol: f64,
}

/// `E_bound - E_unbound - E_ligand`.
pub fn binding_energy(e_bound: f64, e_unbound: f64, e_ligand: f64) -> BindingEnergy {
    let hartree = e_bound - e_unbound - e_ligand;
    BindingEnergy { hartree, kcal_per_mol: hartree * HARTREE_TO_KCAL_PER_MOL }
}
