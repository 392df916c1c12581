//! Experiment configuration read from TOML.
//!
//! ```toml
//! master_seed = 7
//!
//! [model]
//! n_bath = 1
//! u_values = [2.0, 4.0, 6.0, 8.0]
//! hybridization = 1.0
//!
//! [vqe]
//! method = "lbfgsb"
//! shots = { mode = "per_group", shots = 100 }
//! n_seeds = 10
//! n_repeats = 5
//!
//! [qcm]
//! enabled = true
//!
//! [greens]
//! enabled = true
//! depth = 2
//! eta = 0.05
//!
//! [output]
//! directory = "results"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::greens::ExcitationMethod;
use crate::hamiltonian::{AimModel, GroupingMode};
use crate::statevector::DEFAULT_SHELL_LAYERS;
use crate::vqe::{Method, OptimizerConfig};

pub const DEFAULT_U_VALUES: [f64; 4] = [2.0, 4.0, 6.0, 8.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub model: ModelBlock,
    #[serde(default)]
    pub vqe: VqeBlock,
    #[serde(default)]
    pub qcm: QcmBlock,
    #[serde(default)]
    pub greens: GreensBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub n_bath: usize,
    #[serde(default = "default_u_values")]
    pub u_values: Vec<f64>,
    #[serde(default = "one")]
    pub hybridization: f64,
    /// Bath energies; the symmetric unit-spacing grid when absent.
    #[serde(default)]
    pub bath_energies: Option<Vec<f64>>,
    /// Impurity level; `-U/2` when absent.
    #[serde(default)]
    pub impurity_energy: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShotsMode {
    Exact,
    PerGroup { shots: usize },
    /// Shots per group from `N_Pauli / eps^2`.
    Target { eps: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqeBlock {
    pub method: Method,
    pub shots: ShotsMode,
    /// Defaults to 10 seeds for one and three bath sites and 1 otherwise.
    pub n_seeds: Option<usize>,
    /// Defaults to 5 repeats for one and three bath sites and 2 otherwise.
    pub n_repeats: Option<usize>,
    pub grouping: GroupingMode,
    pub layers: usize,
    /// Overrides applied on top of the method defaults.
    pub optimizer: Option<OptimizerConfig>,
}

impl Default for VqeBlock {
    fn default() -> Self {
        Self {
            method: Method::Lbfgsb,
            shots: ShotsMode::Exact,
            n_seeds: None,
            n_repeats: None,
            grouping: GroupingMode::FullyCommuting,
            layers: DEFAULT_SHELL_LAYERS,
            optimizer: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum MomentShots {
    Exact,
    /// Reference settings for `<H>` and `<H^4>` with interpolated middle powers.
    Schedule,
    PerGroup { shots: [usize; 4] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcmBlock {
    pub enabled: bool,
    pub shots: MomentShots,
}

impl Default for QcmBlock {
    fn default() -> Self {
        Self { enabled: true, shots: MomentShots::Exact }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreensBlock {
    pub enabled: bool,
    pub excitation: ExcitationMethod,
    pub depth: usize,
    /// Size parameter of the cumulant expansion used for the excitation ladders.
    pub system_size_n: f64,
    pub eta: f64,
    /// Half-width of the energy grid; `U + 6V` when absent.
    pub omega_max: Option<f64>,
    pub points: usize,
    pub shots: MomentShots,
}

impl Default for GreensBlock {
    fn default() -> Self {
        Self {
            enabled: true,
            excitation: ExcitationMethod::Operator,
            depth: 2,
            system_size_n: 1.0,
            eta: 0.05,
            omega_max: None,
            points: 801,
            shots: MomentShots::Exact,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: PathBuf::from("results"), formats: vec![Format::Json, Format::Csv] }
    }
}

fn default_u_values() -> Vec<f64> {
    DEFAULT_U_VALUES.to_vec()
}

fn one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Smallest runnable configuration for `n_bath`.
    pub fn minimal(n_bath: usize) -> Self {
        Self {
            master_seed: 0,
            model: ModelBlock {
                n_bath,
                u_values: default_u_values(),
                hybridization: 1.0,
                bath_energies: None,
                impurity_energy: None,
            },
            vqe: VqeBlock::default(),
            qcm: QcmBlock::default(),
            greens: GreensBlock::default(),
            output: OutputBlock::default(),
        }
    }

    pub fn n_seeds(&self) -> usize {
        self.vqe.n_seeds.unwrap_or(if self.model.n_bath <= 3 { 10 } else { 1 })
    }

    pub fn n_repeats(&self) -> usize {
        self.vqe.n_repeats.unwrap_or(if self.model.n_bath <= 3 { 5 } else { 2 })
    }

    /// Optimizer settings with the block's method applied.
    pub fn optimizer(&self) -> OptimizerConfig {
        let mut o = self.vqe.optimizer.clone().unwrap_or_default();
        o.method = self.vqe.method;
        o
    }

    pub fn model_for(&self, hubbard_u: f64) -> Result<AimModel> {
        let m = &self.model;
        let mut model = match &m.bath_energies {
            Some(e) => AimModel::with_bath(m.n_bath, hubbard_u, m.hybridization, e.clone())?,
            None => AimModel::symmetric(m.n_bath, hubbard_u, m.hybridization)?,
        };
        if let Some(e0) = m.impurity_energy {
            model.impurity_energy = e0;
        }
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.n_bath == 0 || m.n_bath % 2 == 0 {
            return domain(format!("n_bath must be odd and positive, got {}", m.n_bath));
        }
        if m.u_values.is_empty() || m.u_values.iter().any(|u| !u.is_finite()) {
            return domain("u_values must be a nonempty list of finite numbers");
        }
        if let Some(e) = &m.bath_energies {
            if e.len() != m.n_bath {
                return domain(format!("{} bath energies given for {} bath sites", e.len(), m.n_bath));
            }
        }
        for &u in &m.u_values {
            self.model_for(u)?;
        }
        if self.vqe.n_seeds == Some(0) || self.vqe.n_repeats == Some(0) {
            return domain("n_seeds and n_repeats must be at least 1");
        }
        if self.vqe.layers == 0 {
            return domain("the ansatz needs at least one layer");
        }
        match self.vqe.shots {
            ShotsMode::PerGroup { shots: 0 } => return domain("shots per group must be positive"),
            ShotsMode::Target { eps } if !(eps > 0.0) => return domain("target error must be positive"),
            _ => {}
        }
        for shots in [self.qcm.shots, self.greens.shots] {
            if let MomentShots::PerGroup { shots } = shots {
                if shots.contains(&0) {
                    return domain("moment shots per group must be positive");
                }
            }
        }
        self.optimizer().validate()?;
        let g = &self.greens;
        if g.depth == 0 || g.points < 2 {
            return domain("greens depth must be positive and the grid needs two points");
        }
        if !(g.eta > 0.0) || !(g.system_size_n > 0.0) {
            return domain("eta and the expansion size must be positive");
        }
        if let Some(w) = g.omega_max {
            if !(w > 0.0) {
                return domain("omega_max must be positive");
            }
        }
        if self.output.formats.is_empty() {
            return domain("at least one output format is required");
        }
        Ok(())
    }
}
