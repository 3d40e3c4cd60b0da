use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkConfig, PerLink, PerUser};
use crate::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "rate")]
    Rate,
    #[serde(rename = "tau2")]
    Tau2,
    #[serde(rename = "N")]
    Antennas,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Rate => "rate",
            SweepVariable::Tau2 => "tau2",
            SweepVariable::Antennas => "N",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Full finite solve on every realization.
    #[default]
    Finite,
    /// Deterministic multipliers and powers applied to fresh channels.
    Asymptotic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Finite => "finite",
            Mode::Asymptotic => "asymptotic",
        }
    }
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn default_trials() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub mode: Mode,
    /// Reuse the drop of trial 0 in every trial.
    #[serde(default)]
    pub fixed_drop: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            network: NetworkConfig::default(),
            sweep: None,
            schemes: default_schemes(),
            trials: default_trials(),
            mode: Mode::default(),
            fixed_drop: false,
            output: None,
        }
    }
}

/// One configuration of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub sweep_name: &'static str,
    pub sweep_value: f64,
    pub network: NetworkConfig,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner()))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn points(&self) -> Result<Vec<Point>> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![Point {
                sweep_name: "base",
                sweep_value: 0.0,
                network: self.network.clone(),
            }]);
        };
        sweep
            .values
            .iter()
            .map(|&v| {
                let mut network = self.network.clone();
                match sweep.variable {
                    SweepVariable::Rate => network.rate_bps_hz = PerUser::Uniform(v),
                    SweepVariable::Tau2 => {
                        if !(0.0..=1.0).contains(&v) {
                            return Err(Error::Config(format!("tau2 sweep value {v} outside [0, 1]")));
                        }
                        network.tau = PerLink::Uniform(v.sqrt());
                    }
                    SweepVariable::Antennas => {
                        if !(v >= 1.0 && v.fract() == 0.0) {
                            return Err(Error::Config(format!("N sweep value {v} is not a positive integer")));
                        }
                        network.antennas = v as usize;
                    }
                }
                Ok(Point {
                    sweep_name: sweep.variable.name(),
                    sweep_value: v,
                    network,
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("`trials` must be >= 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("`schemes` must not be empty".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("`sweep.values` must not be empty".into()));
            }
            if sweep.values.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config("`sweep.values` must be strictly ascending".into()));
            }
        }
        for point in self.points()? {
            point.network.validate()?;
        }
        Ok(())
    }
}

pub fn read_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentSpec::from_json(&text)
}
