//! Resolved run configuration; every physical parameter has a default.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use blockade_core::comb::MoleculeSpec;
use blockade_core::SystemParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    #[default]
    Sweep,
    Threshold,
    Converge,
    Protocol,
    Splitting,
    Materials,
    Comb,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Threshold => "threshold",
            Command::Converge => "converge",
            Command::Protocol => "protocol",
            Command::Splitting => "splitting",
            Command::Materials => "materials",
            Command::Comb => "comb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// `lo:hi:n`, `n` evenly spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn validate(&self, what: &str) -> Result<(), CliError> {
        if !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(CliError::Config(format!("{what}: bounds must be finite")));
        }
        match self.n {
            0 => Err(CliError::Config(format!("{what}: need at least one point"))),
            1 => Ok(()),
            _ if self.hi <= self.lo => Err(CliError::Config(format!("{what}: need lo < hi, got {self}"))),
            _ => Ok(()),
        }
    }

    pub fn points(&self) -> Vec<f64> {
        blockade_core::observables::linspace(self.lo, self.hi, self.n)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.n)
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(format!("expected lo:hi:n, got `{s}`"));
        };
        let lo = lo.trim().parse::<f64>().map_err(|e| format!("bad lower bound `{lo}`: {e}"))?;
        let hi = hi.trim().parse::<f64>().map_err(|e| format!("bad upper bound `{hi}`: {e}"))?;
        let n = n.trim().parse::<usize>().map_err(|e| format!("bad point count `{n}`: {e}"))?;
        Ok(Self { lo, hi, n })
    }
}

/// `lo:hi` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
        Ok(Range(
            lo.trim().parse().map_err(|e| format!("bad value `{lo}`: {e}"))?,
            hi.trim().parse().map_err(|e| format!("bad value `{hi}`: {e}"))?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub target: f64,
    pub bracket: (f64, f64),
    pub n_max: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            target: 0.5,
            bracket: (0.1, 0.6),
            n_max: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergeConfig {
    pub rel_tol: f64,
    pub n_max_start: usize,
    pub n_max_limit: usize,
    /// Detunings over which Max⟨n̂_s⟩ is tracked.
    pub grid: GridSpec,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            rel_tol: 0.01,
            n_max_start: 2,
            n_max_limit: 12,
            grid: GridSpec::new(-3.0, 3.0, 25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplittingConfig {
    /// Drive amplitudes `|F_s|/√Γ_s`.
    pub fs_grid: Vec<f64>,
    pub n_max: usize,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        Self {
            fs_grid: vec![0.1, 1.0, 2.5],
            n_max: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub t1: f64,
    pub t_c: f64,
    pub t_final: f64,
    pub xpm_seed: f64,
    pub xpm_idler: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            t1: 5.0,
            t_c: 20.0,
            t_final: 120.0,
            xpm_seed: 0.0,
            xpm_idler: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialsConfig {
    /// Single pump power in watts; a log-spaced curve is emitted when absent.
    pub power: Option<f64>,
    /// Log-spaced power grid in watts.
    pub power_grid: GridSpec,
    /// Platform file; the bundled data is used when absent.
    pub data: Option<PathBuf>,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        Self {
            power: None,
            power_grid: GridSpec::new(1e-6, 10.0, 71),
            data: None,
        }
    }
}

fn default_molecule() -> MoleculeSpec {
    MoleculeSpec {
        n_eff: 2.0,
        radius: 100e-6,
        radius_ratio: 0.5,
        coupling_j: 1e10,
        m_range: (1200, 1210),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: Command,
    /// Rates in units of Γ_s.
    pub system: SystemParams,
    pub delta_grid: GridSpec,
    pub n_max: usize,
    pub auto_nmax: bool,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub seed: u64,
    pub threshold: ThresholdConfig,
    pub converge: ConvergeConfig,
    pub splitting: SplittingConfig,
    pub protocol: ProtocolConfig,
    pub materials: MaterialsConfig,
    pub comb: MoleculeSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Sweep,
            system: SystemParams::default(),
            delta_grid: GridSpec::new(-3.0, 3.0, 121),
            n_max: 4,
            auto_nmax: false,
            tol: 1e-10,
            out: None,
            format: Format::Csv,
            threads: 0,
            seed: 0,
            threshold: ThresholdConfig::default(),
            converge: ConvergeConfig::default(),
            splitting: SplittingConfig::default(),
            protocol: ProtocolConfig::default(),
            materials: MaterialsConfig::default(),
            comb: default_molecule(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.system
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.delta_grid.validate("delta grid")?;
        if !(self.tol > 0.0) {
            return Err(CliError::Config(format!("--tol must be positive, got {}", self.tol)));
        }
        if self.n_max == 0 {
            return Err(CliError::Config("--nmax must be at least 1".into()));
        }
        let t = &self.threshold;
        if !(t.target > 0.0 && t.target <= 1.0) {
            return Err(CliError::Config(format!("--target must lie in (0, 1], got {}", t.target)));
        }
        if !(t.bracket.0 >= 0.0 && t.bracket.1 > t.bracket.0) {
            return Err(CliError::Config(format!(
                "--bracket needs 0 <= lo < hi, got {}:{}",
                t.bracket.0, t.bracket.1
            )));
        }
        let c = &self.converge;
        if !(c.rel_tol > 0.0) || c.n_max_start == 0 || c.n_max_limit < c.n_max_start {
            return Err(CliError::Config(
                "converge needs rel_tol > 0 and 1 <= n_max_start <= n_max_limit".into(),
            ));
        }
        c.grid.validate("converge grid")?;
        if self.splitting.fs_grid.is_empty() || self.splitting.fs_grid.iter().any(|f| !(*f > 0.0)) {
            return Err(CliError::Config("--fs-grid needs positive drive values".into()));
        }
        let p = &self.protocol;
        if !(0.0 <= p.t1 && p.t1 < p.t_c && p.t_c < p.t_final) {
            return Err(CliError::Config(format!(
                "protocol needs 0 <= t1 < t_c < t_final, got {} {} {}",
                p.t1, p.t_c, p.t_final
            )));
        }
        let m = &self.materials;
        if let Some(power) = m.power {
            if !(power >= 0.0) {
                return Err(CliError::Config(format!("--power must be non-negative, got {power}")));
            }
        }
        if !(m.power_grid.lo > 0.0) || m.power_grid.n < 2 || m.power_grid.hi <= m.power_grid.lo {
            return Err(CliError::Config("--power-grid needs 0 < lo < hi and n >= 2".into()));
        }
        self.comb
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_standard_parameters() {
        let c = RunConfig::default();
        assert_eq!(c.system.gamma_i, c.system.gamma_s);
        assert_eq!(c.system.gamma / c.system.gamma_s, 0.5);
        assert_eq!(c.system.f_s.re, 0.1);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        let mut c = RunConfig {
            command: Command::Splitting,
            n_max: 7,
            out: Some("x/y.csv".into()),
            seed: 42,
            ..Default::default()
        };
        c.system.g_eff = 0.325;
        c.system.delta = -0.1;
        c.system.f_s = num_complex::Complex64::new(0.3, 0.7);
        c.materials.power = Some(0.1);
        c.splitting.fs_grid = vec![0.1, 2.5];
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let json: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(json, c);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = RunConfig::from_toml("command = 'threshold'\n[system]\ndelta = 0.0\nf_s = [0.1, 0.0]\ngamma = 0.5\ngamma_s = 1.0\ngamma_i = 1.0\ng_eff = 0.0\n").unwrap();
        assert_eq!(c.command, Command::Threshold);
        assert_eq!(c.delta_grid, RunConfig::default().delta_grid);
    }

    #[test]
    fn grid_spec_parsing() {
        assert_eq!("-3:3:121".parse::<GridSpec>().unwrap(), GridSpec::new(-3.0, 3.0, 121));
        assert!("1:2".parse::<GridSpec>().is_err());
        assert!("a:2:3".parse::<GridSpec>().is_err());
        assert!(GridSpec::new(1.0, 0.0, 5).validate("g").is_err());
        assert!(GridSpec::new(1.0, 1.0, 1).validate("g").is_ok());
        assert_eq!("0.1:0.6".parse::<Range>().unwrap(), Range(0.1, 0.6));
    }
}
