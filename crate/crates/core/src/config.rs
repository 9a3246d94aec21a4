//! JSON run configuration.
//!
//! ```json
//! {
//!   "preset": "pure-rt",
//!   "parameters": { "vartheta": 0.9 },
//!   "lattice": { "k_max": 16, "adaptive": false },
//!   "degree": 32,
//!   "tol": 1e-8
//! }
//! ```
//!
//! Without a preset every parameter must be given. `sweep` must be present
//! exactly when the command is `sweep`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{validate_parameters, RTParameters};
use crate::spectrum::ModeLattice;
use crate::thresholds::COEFFICIENTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Growth,
    Threshold,
    Sweep,
    ModeShape,
    Dis,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Growth => "growth",
            Command::Threshold => "threshold",
            Command::Sweep => "sweep",
            Command::ModeShape => "mode-shape",
            Command::Dis => "dis",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// viscoelastic, no field
    Vrt,
    MrtVertical,
    MrtHorizontal,
    PureRt,
}

impl Preset {
    pub fn parameters(self) -> RTParameters {
        let mut p = RTParameters::reference();
        match self {
            Preset::PureRt => {}
            Preset::Vrt => {
                p.kappa_plus = 1.0;
                p.kappa_minus = 1.0;
            }
            Preset::MrtVertical => {
                p.lambda = 1.0;
                p.m_bar = [0.0, 0.0, 1.0];
            }
            Preset::MrtHorizontal => {
                p.lambda = 1.0;
                p.m_bar = [1.0, 1.0, 0.0];
            }
        }
        p
    }
}

/// Field-by-field parameter overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterOverrides {
    pub rho_plus: Option<f64>,
    pub rho_minus: Option<f64>,
    pub mu_plus: Option<f64>,
    pub mu_minus: Option<f64>,
    pub kappa_plus: Option<f64>,
    pub kappa_minus: Option<f64>,
    pub vartheta: Option<f64>,
    pub g: Option<f64>,
    pub lambda: Option<f64>,
    pub m_bar: Option<[f64; 3]>,
    pub l: Option<f64>,
    pub tau: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default)]
    pub adaptive: bool,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            k_max: default_k_max(),
            adaptive: false,
        }
    }
}

impl LatticeConfig {
    pub fn lattice(&self) -> ModeLattice {
        if self.adaptive {
            ModeLattice::adaptive(self.k_max)
        } else {
            ModeLattice::new(self.k_max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub coefficient: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepConfig {
    /// Evenly spaced grid including both ends (`from` only when `steps = 1`).
    pub fn grid(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.from];
        }
        let h = (self.to - self.from) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.to } else { self.from + i as f64 * h })
            .collect()
    }
}

/// Optional bisection for the `threshold` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub coefficient: String,
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_threshold_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub parameters: ParameterOverrides,
    /// must agree with the command given on the command line
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub threshold: Option<ThresholdConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// worker threads, 0 = one per core
    #[serde(default)]
    pub threads: usize,
}

fn default_k_max() -> u32 {
    16
}

fn default_degree() -> usize {
    32
}

fn default_tol() -> f64 {
    1e-8
}

fn default_threshold_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error in `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // serde names the offending key in its message
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".into());
            ConfigError::new(&field, msg)
        })
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), ConfigError> {
        let bytes = std::fs::read(path).map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| ConfigError::new("--config", e.to_string()))?;
        Ok((Self::from_json(text)?, bytes))
    }

    /// Preset (if any) with overrides applied, validated.
    pub fn parameters(&self) -> Result<RTParameters, ConfigError> {
        let o = &self.parameters;
        let base = self.preset.map(Preset::parameters);
        macro_rules! pick {
            ($f:ident) => {
                match (o.$f, base) {
                    (Some(v), _) => v,
                    (None, Some(b)) => b.$f,
                    (None, None) => {
                        return Err(ConfigError::new(
                            concat!("parameters.", stringify!($f)),
                            "missing (no preset given)",
                        ))
                    }
                }
            };
        }
        let p = RTParameters {
            rho_plus: pick!(rho_plus),
            rho_minus: pick!(rho_minus),
            mu_plus: pick!(mu_plus),
            mu_minus: pick!(mu_minus),
            kappa_plus: pick!(kappa_plus),
            kappa_minus: pick!(kappa_minus),
            vartheta: pick!(vartheta),
            g: pick!(g),
            lambda: pick!(lambda),
            m_bar: pick!(m_bar),
            l: pick!(l),
            tau: pick!(tau),
            l1: pick!(l1),
            l2: pick!(l2),
        };
        validate_parameters(&p).map_err(|e| ConfigError::new("parameters", e.to_string()))
    }

    /// Check everything except the parameter block.
    pub fn validate_for(&self, command: Command) -> Result<(), ConfigError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(ConfigError::new(
                    "command",
                    format!("config says `{}` but `{}` was requested", c.name(), command.name()),
                ));
            }
        }
        if self.degree < crate::discretize::MIN_DEGREE {
            return Err(ConfigError::new("degree", format!("{} is below the minimum of 8", self.degree)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ConfigError::new("tol", "must be positive"));
        }
        if self.lattice.k_max == 0 {
            return Err(ConfigError::new("lattice.k_max", "must be at least 1"));
        }
        match (&self.sweep, command) {
            (None, Command::Sweep) => return Err(ConfigError::new("sweep", "required by the sweep command")),
            (Some(_), c) if c != Command::Sweep => {
                return Err(ConfigError::new("sweep", "only allowed with the sweep command"))
            }
            (Some(s), _) => {
                check_coefficient("sweep.coefficient", &s.coefficient)?;
                if s.steps == 0 {
                    return Err(ConfigError::new("sweep.steps", "must be at least 1"));
                }
                if !(s.from.is_finite() && s.to.is_finite()) {
                    return Err(ConfigError::new("sweep", "range must be finite"));
                }
            }
            _ => {}
        }
        if let Some(t) = &self.threshold {
            if command != Command::Threshold {
                return Err(ConfigError::new("threshold", "only allowed with the threshold command"));
            }
            check_coefficient("threshold.coefficient", &t.coefficient)?;
            if !(t.tol > 0.0) {
                return Err(ConfigError::new("threshold.tol", "must be positive"));
            }
        }
        Ok(())
    }
}

fn check_coefficient(field: &str, name: &str) -> Result<(), ConfigError> {
    if COEFFICIENTS.contains(&name) {
        Ok(())
    } else {
        Err(ConfigError::new(
            field,
            format!("unknown coefficient `{name}` (expected one of {})", COEFFICIENTS.join(", ")),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_with_override() {
        let c = RunConfig::from_json(r#"{"preset": "pure-rt", "parameters": {"vartheta": 0.9}}"#).unwrap();
        let p = c.parameters().unwrap();
        assert_eq!(p.vartheta, 0.9);
        assert_eq!(p.rho_plus, 2.0);
        assert_eq!(c.degree, 32);
        assert_eq!(c.lattice.k_max, 16);
    }

    #[test]
    fn missing_field_is_named() {
        let c = RunConfig::from_json(r#"{"parameters": {"rho_plus": 2.0}}"#).unwrap();
        let e = c.parameters().unwrap_err();
        assert_eq!(e.field, "parameters.rho_minus");
    }

    #[test]
    fn unknown_key_rejected() {
        let e = RunConfig::from_json(r#"{"preset": "vrt", "parameters": {"rho": 1.0}}"#).unwrap_err();
        assert_eq!(e.field, "rho");
    }

    #[test]
    fn rt_condition_reported() {
        let c = RunConfig::from_json(r#"{"preset": "vrt", "parameters": {"rho_plus": 1.0}}"#).unwrap();
        assert!(c.parameters().unwrap_err().to_string().contains("RT condition"));
    }

    #[test]
    fn sweep_block_rules() {
        let c = RunConfig::from_json(r#"{"preset": "vrt"}"#).unwrap();
        assert!(c.validate_for(Command::Growth).is_ok());
        assert_eq!(c.validate_for(Command::Sweep).unwrap_err().field, "sweep");
        let s = RunConfig::from_json(
            r#"{"preset": "vrt", "sweep": {"coefficient": "vartheta", "from": 0, "to": 2, "steps": 5}}"#,
        )
        .unwrap();
        assert!(s.validate_for(Command::Sweep).is_ok());
        assert!(s.validate_for(Command::Dis).is_err());
        assert_eq!(s.sweep.unwrap().grid(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let m = RunConfig::from_json(r#"{"preset": "vrt", "command": "dis"}"#).unwrap();
        assert_eq!(m.validate_for(Command::Growth).unwrap_err().field, "command");
    }
}
