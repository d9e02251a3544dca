use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use tpm_core::sampling::{generate_components, ComponentModel};
use tpm_core::ComponentSet;

use crate::{Failure, BAD_INPUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Orthonormal,
    GaussianUnit,
    ExplicitFile,
}

/// Experiment parameters read from `--config`; command-line flags override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub k: usize,
    pub weight_range: [f64; 2],
    pub component_model: ModelChoice,
    pub components_file: Option<PathBuf>,
    pub seed: u64,
    #[serde(rename = "L")]
    pub restarts: Option<u64>,
    pub iters: Option<usize>,
    pub eta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 400,
            k: 20,
            weight_range: [1.0, 1.25],
            component_model: ModelChoice::GaussianUnit,
            components_file: None,
            seed: 0,
            restarts: None,
            iters: None,
            eta: 0.1,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::new(BAD_INPUT, format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::new(BAD_INPUT, format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |message: String| Err(Failure::new(BAD_INPUT, message));
        let [lo, hi] = self.weight_range;
        if self.d == 0 || self.k == 0 {
            return bad(format!("d and k must be positive (d = {}, k = {})", self.d, self.k));
        }
        if self.k > self.d && self.component_model != ModelChoice::ExplicitFile {
            return bad(format!("component count {} exceeds dimension {}", self.k, self.d));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("weight_range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if self.restarts == Some(0) {
            return bad("L must be positive".into());
        }
        if self.iters == Some(0) {
            return bad("iters must be positive".into());
        }
        if self.component_model == ModelChoice::ExplicitFile && self.components_file.is_none() {
            return bad("component_model explicit-file needs components_file".into());
        }
        Ok(())
    }

    /// `λ_hi / λ_lo`.
    pub fn kappa_target(&self) -> f64 {
        self.weight_range[1] / self.weight_range[0]
    }

    /// Reads the components file when one is named, otherwise draws the
    /// configured model from `seed`.
    pub fn components(&self) -> Result<ComponentSet, Failure> {
        if let Some(path) = &self.components_file {
            return read_components(path);
        }
        let model = match self.component_model {
            ModelChoice::Orthonormal => ComponentModel::Orthonormal,
            ModelChoice::GaussianUnit => ComponentModel::GaussianUnit,
            ModelChoice::ExplicitFile => unreachable!("validated"),
        };
        let range = (self.weight_range[0], self.weight_range[1]);
        Ok(generate_components(model, self.d, self.k, range, self.seed)?)
    }
}

pub fn read_components(path: &Path) -> Result<ComponentSet, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(BAD_INPUT, format!("cannot read components {}: {e}", path.display())))?;
    ComponentSet::from_json(&text).map_err(|e| Failure::new(BAD_INPUT, format!("components {}: {e}", path.display())))
}
