use std::path::{Path, PathBuf};

use catmap_core::fourier::Truncation;
use catmap_core::monte_carlo::{ErrorModel, Normalization, SimConfig};
use catmap_core::torus::{CatSystem, Harmonic, HarmonicForce};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Harmonics `amp · sin(ν·ψ)`; defaults to `sin ψ₁`.
    #[serde(default = "default_force")]
    pub force: Vec<Harmonic>,
    #[serde(default = "default_epsilon")]
    pub epsilon: Vec<f64>,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub boundary_terms: bool,
    #[serde(default)]
    pub simulation: Simulation,
    #[serde(default)]
    pub symbolic: Symbolic,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    pub t: u64,
    pub tau: u64,
    pub runs: u64,
    pub bin_width: f64,
    pub normalization: Normalization,
    pub errors: ErrorModel,
    /// Largest `p` used in the slope fit.
    pub p_max: f64,
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            t: 1_000_000,
            tau: 100,
            runs: 20,
            bin_width: 0.05,
            normalization: Normalization::PerRun,
            errors: ErrorModel::RunToRun,
            p_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Symbolic {
    /// Partition file to load and verify instead of constructing one.
    pub partition: Option<PathBuf>,
    /// Torus point in angles for `encode` and `frequency`.
    pub point: [f64; 2],
    pub n: usize,
    /// Symbols `σ_{−n} … σ_n` for `decode`.
    pub window: Option<Vec<usize>>,
    pub steps: usize,
}

impl Default for Symbolic {
    fn default() -> Self {
        Self {
            partition: None,
            point: [1.0, 2.0],
            n: 8,
            window: None,
            steps: 1_000_000,
        }
    }
}

fn default_force() -> Vec<Harmonic> {
    HarmonicForce::single().harmonics
}

fn default_epsilon() -> Vec<f64> {
    vec![0.05]
}

fn default_order() -> usize {
    4
}

fn default_seed() -> u64 {
    1
}

impl Default for Config {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.epsilon.is_empty() {
            return bad("epsilon: list must not be empty");
        }
        if self.epsilon.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return bad("epsilon: values must be finite and positive");
        }
        if self.order == 0 {
            return bad("order: must be at least 1");
        }
        if self.force.is_empty() {
            return bad("force: at least one harmonic is required");
        }
        HarmonicForce::new(self.force.clone())
            .map_err(|e| CliError::Config(format!("force: {e}")))?;
        self.truncation
            .validate()
            .map_err(|e| CliError::Config(format!("truncation: {e}")))?;
        let s = &self.simulation;
        if s.tau == 0 || s.t == 0 || s.t % s.tau != 0 || s.runs == 0 || !(s.bin_width > 0.0) {
            return bad("simulation: need t a positive multiple of tau, runs >= 1, bin_width > 0");
        }
        if let Some(w) = &self.symbolic.window {
            if w.len() % 2 == 0 {
                return bad("symbolic.window: needs an odd number of symbols");
            }
        }
        Ok(())
    }

    pub fn force(&self) -> HarmonicForce {
        HarmonicForce {
            harmonics: self.force.clone(),
        }
    }

    pub fn sim_config(&self, eps: f64) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            system: CatSystem::new(eps, self.force()),
            t: s.t,
            tau: s.tau,
            runs: s.runs,
            bin_width: s.bin_width,
            seed: self.seed,
            workers: self.workers,
            normalization: s.normalization,
        }
    }

    /// SHA-256 of the effective configuration; output directory and worker count excluded.
    pub fn hash(&self) -> String {
        let keyed = Config {
            out: None,
            workers: 0,
            ..self.clone()
        };
        let text = serde_json::to_string(&keyed).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
