//! Flat JSON scenario shared by every subcommand.

use std::path::Path;

use qfeedback::{
    BlochVector, CoupledState, EstParams, FeedbackLaw, PhysParams, Projection, SdeConfig, TargetState,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

const FIG1: &str = include_str!("../scenarios/fig1.json");
const FIG2: &str = include_str!("../scenarios/fig2.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LawChoice {
    #[default]
    Power,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub omega: f64,
    pub eta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub omega_hat: f64,
    pub eta_hat: f64,
    #[serde(rename = "M_hat")]
    pub m_hat: f64,
    #[serde(default = "default_target")]
    pub target: TargetState,
    #[serde(default)]
    pub law: LawChoice,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub ic: [f64; 3],
    pub ic_hat: [f64; 3],
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default = "default_record_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub projection: Projection,
    /// Coupled Bures radius for `exit-time`.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Exponent-fit window; the last 80% of the span when absent.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Terminal threshold for convergence fractions.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_target() -> TargetState {
    TargetState::Excited
}
fn default_alpha() -> f64 {
    10.0
}
fn default_beta() -> f64 {
    2.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_final() -> f64 {
    10.0
}
fn default_n_traj() -> usize {
    10
}
fn default_record_stride() -> usize {
    10
}
fn default_radius() -> f64 {
    0.1
}
fn default_threshold() -> f64 {
    0.05
}

/// Scenario converted into validated core types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub phys: PhysParams,
    pub est: EstParams,
    pub law: FeedbackLaw,
    pub ic: CoupledState,
    pub sde: SdeConfig,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a scenario file. `builtin:fig1` and `builtin:fig2` name the
    /// bundled scenarios.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = match path.to_str() {
            Some("builtin:fig1") => FIG1.to_string(),
            Some("builtin:fig2") => FIG2.to_string(),
            _ => std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        };
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "fig1" => Self::from_json(FIG1).ok(),
            "fig2" => Self::from_json(FIG2).ok(),
            _ => None,
        }
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let phys = PhysParams::new(self.omega, self.eta, self.m)?;
        let est = EstParams::new(self.omega_hat, self.eta_hat, self.m_hat)?;
        let law = match self.law {
            LawChoice::Power => FeedbackLaw::power(self.target, self.alpha, self.beta),
            LawChoice::Zero => FeedbackLaw::zero(self.target),
        };
        law.check_gains().map_err(|msg| CliError::Config(format!("law: {msg}")))?;
        let bloch = |name: &str, v: [f64; 3]| {
            BlochVector::new(v[0], v[1], v[2]).map_err(|e| CliError::Config(format!("{name}: {e}")))
        };
        let ic = CoupledState {
            actual: bloch("ic", self.ic)?,
            estimate: bloch("ic_hat", self.ic_hat)?,
        };
        let sde = SdeConfig {
            dt: self.dt,
            t_final: self.t_final,
            record_stride: self.record_stride,
            seed: self.seed,
            projection: self.projection,
            ..SdeConfig::default()
        };
        sde.validate()?;
        if self.n_traj == 0 {
            return Err(CliError::Config("n_traj: must be >= 1".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(CliError::Config(format!("threshold: must be > 0, got {}", self.threshold)));
        }
        if let Some([a, b]) = self.window {
            if !(a < b) {
                return Err(CliError::Config(format!("window: start {a} must precede end {b}")));
            }
        }
        Ok(Resolved { phys, est, law, ic, sde })
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        self.window.map(|[a, b]| (a, b))
    }
}
