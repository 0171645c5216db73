use std::path::{Path, PathBuf};

use qcollide::analysis::{SaturationMethod, SweepVariable};
use qcollide::{Error, PacketPair, PotentialWell, QuadSpec, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub depth: f64,
    pub width: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { depth: 8.0, width: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketConfig {
    pub a: [f64; 3],
    pub p0: f64,
    pub q0: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self { a: [1.0, 1.0, 2.0], p0: 0.8, q0: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimesConfig {
    /// Times `t/m` for `evolve`.
    pub values: Vec<f64>,
    /// Evaluate at the saturation time instead.
    pub saturate: bool,
}

impl Default for TimesConfig {
    fn default() -> Self {
        Self { values: vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0], saturate: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub method: SaturationMethod,
    /// Points run concurrently.
    pub width: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            variable: SweepVariable::P0,
            values: vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2],
            method: SaturationMethod::Position,
            width: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Everything a run depends on; echoed into every output header.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    pub packet: PacketConfig,
    pub quadrature: QuadSpec,
    pub times: TimesConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Digest of the canonical TOML form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn well(&self) -> Result<PotentialWell> {
        PotentialWell::new(self.potential.depth, self.potential.width)
    }

    pub fn pair(&self) -> Result<PacketPair> {
        PacketPair::new(self.packet.a, self.packet.p0, self.packet.q0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.quadrature.p_order = Some(300);
        cfg.output.path = Some("out.csv".into());
        cfg.sweep.variable = SweepVariable::V0;
        cfg.sweep.method = SaturationMethod::Asymptotic;
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(RunConfig::parse(&RunConfig::default().to_toml()).unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = RunConfig::parse("[potential]\ndepth = 7.6\n[quadrature]\norders = [8, 16, 8]\n").unwrap();
        assert_eq!(cfg.potential.depth, 7.6);
        assert_eq!(cfg.potential.width, 1.0);
        assert_eq!(cfg.quadrature.orders, [8, 16, 8]);
        assert_eq!(cfg.quadrature.l_max, 6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[potential]\ndepht = 7.6\n").is_err());
    }
}
