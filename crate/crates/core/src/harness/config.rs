//! Experiment configuration: a flat `key = value` file (`#` starts a
//! comment) layered under command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{CoagError, Result};
use crate::grid::{self, geometric};
use crate::kernel::KernelKind;

use super::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    TransformClosedForm,
    TransformOdeFallback,
    Physical,
}

impl SolverChoice {
    pub fn name(self) -> &'static str {
        match self {
            SolverChoice::TransformClosedForm => "transform_closed_form",
            SolverChoice::TransformOdeFallback => "transform_ode_fallback",
            SolverChoice::Physical => "physical",
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverChoice {
    type Err = CoagError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "transform_closed_form" | "closed_form" | "closed-form" => Ok(SolverChoice::TransformClosedForm),
            "transform_ode_fallback" | "ode_fallback" | "ode-fallback" | "ode" => Ok(SolverChoice::TransformOdeFallback),
            "physical" => Ok(SolverChoice::Physical),
            other => Err(CoagError::UnknownName(format!("solver '{other}'"))),
        }
    }
}

/// A geometric grid `lo .. hi` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        geometric(self.lo, self.hi, self.n)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let v: Vec<&str> = s.split(',').map(str::trim).collect();
        if v.len() != 3 {
            return Err(CoagError::Parse(format!("grid '{s}' must be 'lo,hi,n'")));
        }
        let lo = parse_f64(v[0])?;
        let hi = parse_f64(v[1])?;
        let n = v[2].parse::<usize>().map_err(|_| CoagError::Parse(format!("bad point count '{}'", v[2])))?;
        if !(lo > 0.0 && hi > lo && n >= 8) {
            return Err(CoagError::Config(format!("grid '{s}' needs 0 < lo < hi and n >= 8")));
        }
        Ok(GridSpec { lo, hi, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kernel: KernelKind,
    /// Catalog name or CSV path.
    pub g1: String,
    pub g2: String,
    pub kappas: Vec<f64>,
    pub taus: Vec<f64>,
    pub solver: SolverChoice,
    pub size_grid: GridSpec,
    pub eta_grid: GridSpec,
    pub output_dir: Option<PathBuf>,
    pub allow_out_of_range: bool,
    /// Cross-validation tolerance; defaults per kernel.
    pub tolerance: Option<f64>,
    /// When set, fitted rates must be within this relative error.
    pub rate_tolerance: Option<f64>,
    /// Compare against the exact profile instead of `g1`.
    pub profile_mode: bool,
    /// Check the closed-form flow against the ODE fallback.
    pub ode_guard: bool,
    /// Largest physical-solver step.
    pub dt: f64,
    /// Reserved; every code path is deterministic.
    pub seed: u64,
}

/// Layered key-value settings. Later layers win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

pub const KEYS: &[&str] = &[
    "preset",
    "kernel",
    "g1",
    "g2",
    "kappa",
    "checkpoints",
    "tau_max",
    "tau_step",
    "t_checkpoints",
    "solver",
    "size_grid",
    "eta_grid",
    "out",
    "allow_out_of_range",
    "tolerance",
    "rate_tolerance",
    "profile_mode",
    "ode_guard",
    "dt",
    "seed",
];

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| CoagError::Parse(format!("bad number '{s}'")))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(parse_f64).collect()
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(CoagError::Parse(format!("{key}: expected a boolean, got '{other}'"))),
    }
}

impl Settings {
    pub fn new() -> Self {
        Settings::default()
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CoagError::Parse(format!("line {}: expected 'key = value'", no + 1)))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(CoagError::Config(format!("unknown key '{key}'")));
        }
        self.map.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// `self` overridden by `other`.
    pub fn layered(&self, other: &Settings) -> Settings {
        let mut map = self.map.clone();
        map.extend(other.map.clone());
        Settings { map }
    }

    /// Resolves a preset (if named), layers `self` over it and builds the
    /// configuration.
    pub fn build(&self) -> Result<ExperimentConfig> {
        let merged = match self.get("preset") {
            Some(name) => presets::settings(name)?.layered(self),
            None => self.clone(),
        };
        ExperimentConfig::from_settings(&merged)
    }
}

pub fn default_kappas(kernel: KernelKind) -> Vec<f64> {
    match kernel {
        KernelKind::Constant => vec![1.25, 1.5, 1.75, 2.0],
        _ => vec![2.25, 2.5, 2.75],
    }
}

/// `0, step, 2 step, ..., tau_max`.
pub fn tau_range(tau_max: f64, step: f64) -> Vec<f64> {
    let n = (tau_max / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Default eta grid for runs on the physical solver.
pub const PHYSICAL_ETA_GRID: GridSpec = GridSpec { lo: 1e-2, hi: 1e2, n: 161 };

pub const DEFAULT_TAU_MAX: f64 = 5.0;
pub const DEFAULT_TAU_STEP: f64 = 0.25;

impl ExperimentConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let kernel: KernelKind = s.get("kernel").unwrap_or("const").parse()?;
        let kappas = match s.get("kappa") {
            Some(v) => parse_list(v)?,
            None => default_kappas(kernel),
        };
        let taus = Self::parse_taus(s)?;
        let solver = match s.get("solver") {
            Some(v) => v.parse()?,
            None => SolverChoice::TransformClosedForm,
        };
        let size_grid = match s.get("size_grid") {
            Some(v) => GridSpec::parse(v)?,
            None => GridSpec { lo: grid::DEFAULT_SIZE_RANGE.0, hi: grid::DEFAULT_SIZE_RANGE.1, n: grid::DEFAULT_SIZE_POINTS },
        };
        let eta_grid = match s.get("eta_grid") {
            Some(v) => GridSpec::parse(v)?,
            // finite-volume moments are only matched to truncation accuracy,
            // so the ratio near eta = 0 carries that mismatch
            None if solver == SolverChoice::Physical => PHYSICAL_ETA_GRID,
            None => GridSpec { lo: grid::DEFAULT_ETA_RANGE.0, hi: grid::DEFAULT_ETA_RANGE.1, n: grid::DEFAULT_ETA_POINTS },
        };
        let opt_f64 = |k: &str| s.get(k).map(parse_f64).transpose();
        let flag = |k: &str| s.get(k).map(|v| parse_bool(k, v)).transpose().map(|b| b.unwrap_or(false));
        let cfg = ExperimentConfig {
            kernel,
            g1: s.get("g1").unwrap_or_else(|| presets::profile_name(kernel)).to_string(),
            g2: s.get("g2").unwrap_or("gamma(2,2)").to_string(),
            kappas,
            taus,
            solver,
            size_grid,
            eta_grid,
            output_dir: s.get("out").map(PathBuf::from),
            allow_out_of_range: flag("allow_out_of_range")?,
            tolerance: opt_f64("tolerance")?,
            rate_tolerance: opt_f64("rate_tolerance")?,
            profile_mode: flag("profile_mode")?,
            ode_guard: flag("ode_guard")?,
            dt: opt_f64("dt")?.unwrap_or(0.02),
            seed: s.get("seed").map(|v| v.trim().parse::<u64>()).transpose().map_err(|_| CoagError::Parse("bad seed".into()))?.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn parse_taus(s: &Settings) -> Result<Vec<f64>> {
        if let Some(ts) = s.get("t_checkpoints") {
            let ts = parse_list(ts)?;
            if let Some(t) = ts.iter().find(|&&t| !(0.0..1.0).contains(&t)) {
                return Err(CoagError::Config(format!("original-time checkpoint t = {t} is not in [0, 1)")));
            }
            return Ok(ts.iter().map(|t| -(-t).ln_1p()).collect());
        }
        let tau_max = s.get("tau_max").map(parse_f64).transpose()?.unwrap_or(DEFAULT_TAU_MAX);
        match s.get("checkpoints") {
            Some(v) if v.contains(',') => parse_list(v),
            Some(v) => {
                let n = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| CoagError::Parse(format!("checkpoints: expected a count or a list, got '{v}'")))?;
                if n == 0 {
                    return Err(CoagError::Config("checkpoints: need at least one interval".into()));
                }
                Ok((0..=n).map(|i| tau_max * i as f64 / n as f64).collect())
            }
            None => {
                let step = s.get("tau_step").map(parse_f64).transpose()?.unwrap_or(DEFAULT_TAU_STEP);
                if !(step > 0.0) {
                    return Err(CoagError::Config("tau_step must be positive".into()));
                }
                Ok(tau_range(tau_max, step))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.taus.first() != Some(&0.0) {
            return Err(CoagError::Config("tau checkpoints must start at 0".into()));
        }
        if self.taus.windows(2).any(|w| !(w[1] > w[0])) || self.taus.iter().any(|t| !t.is_finite()) {
            return Err(CoagError::Config("tau checkpoints must be finite and strictly increasing".into()));
        }
        if self.kappas.is_empty() {
            return Err(CoagError::Config("no kappa values given".into()));
        }
        for &k in &self.kappas {
            if !self.allow_out_of_range && !self.kernel.kappa_in_theorem_range(k) {
                let (lo, hi) = self.kernel.theorem_kappa_range();
                let close = if self.kernel == KernelKind::Constant { ']' } else { ')' };
                return Err(CoagError::Config(format!(
                    "kappa = {k} is outside the contraction range ({lo}, {hi}{close} for the {} kernel; pass --allow-out-of-range to run anyway",
                    self.kernel
                )));
            }
        }
        if !(self.dt > 0.0) {
            return Err(CoagError::Config("dt must be positive".into()));
        }
        Ok(())
    }

    pub fn eta_points(&self) -> Vec<f64> {
        self.eta_grid.points()
    }

    pub fn size_points(&self) -> Vec<f64> {
        self.size_grid.points()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_format() {
        let s = Settings::parse("# run\nkernel = add\n\nkappa = 2.25, 2.5 # two\ng2=gamma(3,1)\n").unwrap();
        let c = ExperimentConfig::from_settings(&s).unwrap();
        assert_eq!(c.kernel, KernelKind::Additive);
        assert_eq!(c.kappas, vec![2.25, 2.5]);
        assert_eq!(c.g1, "G_add");
        assert_eq!(c.g2, "gamma(3,1)");
        assert_eq!(c.taus.len(), 21);
        assert!(Settings::parse("kernel add").is_err());
        assert!(Settings::parse("colour = red").is_err());
    }

    #[test]
    fn later_layers_win() {
        let file = Settings::parse("kernel = add\nkappa = 2.5").unwrap();
        let mut flags = Settings::new();
        flags.set("kappa", "2.75").unwrap();
        let c = ExperimentConfig::from_settings(&file.layered(&flags)).unwrap();
        assert_eq!(c.kappas, vec![2.75]);
    }

    #[test]
    fn kappa_range_guard() {
        let s = Settings::parse("kernel = add\nkappa = 3.0").unwrap();
        assert!(matches!(ExperimentConfig::from_settings(&s), Err(CoagError::Config(_))));
        let s = Settings::parse("kernel = add\nkappa = 3.0\nallow_out_of_range = true").unwrap();
        assert!(ExperimentConfig::from_settings(&s).is_ok());
    }

    #[test]
    fn checkpoint_forms() {
        let c = ExperimentConfig::from_settings(&Settings::parse("checkpoints = 4\ntau_max = 2").unwrap()).unwrap();
        assert_eq!(c.taus, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let c = ExperimentConfig::from_settings(&Settings::parse("checkpoints = 0, 1, 3").unwrap()).unwrap();
        assert_eq!(c.taus, vec![0.0, 1.0, 3.0]);
        assert!(ExperimentConfig::from_settings(&Settings::parse("checkpoints = 1, 0.5").unwrap()).is_err());
        assert!(ExperimentConfig::from_settings(&Settings::parse("checkpoints = 0.5, 1").unwrap()).is_err());
    }

    #[test]
    fn original_time_checkpoints_must_precede_gelation() {
        let c = ExperimentConfig::from_settings(&Settings::parse("kernel = mult\nt_checkpoints = 0, 0.5, 0.75").unwrap()).unwrap();
        assert!((c.taus[2] - 4f64.ln()).abs() < 1e-15);
        let e = ExperimentConfig::from_settings(&Settings::parse("kernel = mult\nt_checkpoints = 0, 0.5, 1.0").unwrap());
        assert!(matches!(e, Err(CoagError::Config(_))));
    }
}
