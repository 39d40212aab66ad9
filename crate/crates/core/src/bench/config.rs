//! Run configuration with INI-file loading.

use std::path::{Path, PathBuf};

use ini::Ini;

use crate::assembly::Scheme;
use crate::error::{Error, Result};
use crate::forms::{BcMode, NitscheParams};
use crate::linalg::SolverConfig;
use crate::stepper::{Damping, LinearSolverKind, NewtonConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Converge,
    ChannelCompare,
    Dfg,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Converge => "converge",
            Scenario::ChannelCompare => "channel-compare",
            Scenario::Dfg => "dfg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "converge" => Some(Scenario::Converge),
            "channel-compare" | "channelCompare" => Some(Scenario::ChannelCompare),
            "dfg" => Some(Scenario::Dfg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearChoice {
    Direct,
    Gmres,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Finest refinement level; the convergence study runs `0..=levels`.
    pub levels: u32,
    /// Step size on level 0.
    pub tau: f64,
    pub t_end: f64,
    /// Velocity degree `r`; the pressure uses `r − 1`.
    pub degree: usize,
    pub nu: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub scheme: Scheme,
    pub bc: BcMode,
    pub out: PathBuf,
    /// Fraction `k` of an interval between L∞ samples.
    pub sampling: f64,
    /// Largest system for which κ₂ is computed; 0 disables it.
    pub condition_cap: usize,
    pub linear: LinearChoice,
    pub damping: Damping,
    /// Serial assembly.
    pub deterministic: bool,
    /// Number of samples on the cross-section line.
    pub samples: usize,
}

impl RunConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let base = RunConfig {
            scenario,
            levels: 2,
            tau: 1.0,
            t_end: 1.0,
            degree: 4,
            nu: 1.0,
            eta1: 35.0,
            eta2: 35.0,
            scheme: Scheme::Gcc13,
            bc: BcMode::Nitsche,
            out: PathBuf::from("out"),
            sampling: 0.001,
            condition_cap: 1600,
            linear: LinearChoice::Direct,
            damping: Damping::line_search(),
            deterministic: false,
            samples: 83,
        };
        match scenario {
            Scenario::Converge => base,
            Scenario::ChannelCompare => RunConfig { levels: 0, tau: 0.05, degree: 2, nu: 0.01, condition_cap: 0, ..base },
            Scenario::Dfg => RunConfig { levels: 0, tau: 0.01, t_end: 2.0, degree: 2, nu: 0.001, condition_cap: 0, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 2 {
            return Err(Error::Config(format!("velocity degree must be at least 2, got {}", self.degree)));
        }
        if !(self.tau > 0.0 && self.t_end > 0.0 && self.nu > 0.0) {
            return Err(Error::Config("tau, t_end and nu must be positive".into()));
        }
        if !(self.sampling > 0.0 && self.sampling <= 1.0) {
            return Err(Error::Config(format!("sampling must lie in (0, 1], got {}", self.sampling)));
        }
        self.nitsche().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn nitsche(&self) -> NitscheParams {
        NitscheParams { eta1: self.eta1, eta2: self.eta2, mode: self.bc }
    }

    pub fn newton(&self) -> NewtonConfig {
        NewtonConfig {
            damping: self.damping,
            linear: match self.linear {
                LinearChoice::Direct => LinearSolverKind::Direct,
                LinearChoice::Gmres => LinearSolverKind::Gmres(SolverConfig::default()),
            },
            ..NewtonConfig::default()
        }
    }

    /// Applies `key = value` pairs; unknown keys are rejected.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("invalid value '{value}' for key '{key}'"));
        let num = || value.parse::<f64>().map_err(|_| bad());
        match key {
            "scenario" => self.scenario = Scenario::parse(value).ok_or_else(bad)?,
            "levels" => self.levels = value.parse().map_err(|_| bad())?,
            "tau" => self.tau = num()?,
            "t_end" => self.t_end = num()?,
            "degree" => self.degree = value.parse().map_err(|_| bad())?,
            "nu" => self.nu = num()?,
            "eta1" => self.eta1 = num()?,
            "eta2" => self.eta2 = num()?,
            "scheme" => self.scheme = Scheme::parse(value).ok_or_else(bad)?,
            "bc" => {
                self.bc = match value {
                    "strong" => BcMode::Strong,
                    "nitsche" => BcMode::Nitsche,
                    _ => return Err(bad()),
                }
            }
            "out" => self.out = PathBuf::from(value),
            "sampling" => self.sampling = num()?,
            "condition_cap" => self.condition_cap = value.parse().map_err(|_| bad())?,
            "linear_solver" => {
                self.linear = match value {
                    "direct" => LinearChoice::Direct,
                    "gmres" => LinearChoice::Gmres,
                    _ => return Err(bad()),
                }
            }
            "damping" => {
                self.damping = match value {
                    "none" => Damping::None,
                    "line_search" => Damping::line_search(),
                    "dogleg" => Damping::dogleg(),
                    _ => return Err(bad()),
                }
            }
            "deterministic" => self.deterministic = value.parse().map_err(|_| bad())?,
            "samples" => self.samples = value.parse().map_err(|_| bad())?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Reads every key of every section of an INI file.
    pub fn apply_ini_str(&mut self, text: &str) -> Result<()> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (_, props) in ini.iter() {
            for (k, v) in props.iter() {
                self.apply(k.trim(), v.trim())?;
            }
        }
        Ok(())
    }

    pub fn apply_ini_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_ini_str(&text)
    }
}
