//! Node configuration from a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use cascade_node::NodeConfig;
use clap::Args;
use serde::Deserialize;

use crate::{read_file, CliError, CliResult};

#[derive(Debug, Clone, Default, Args)]
pub struct NodeArgs {
    /// Node config JSON; flags below override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of rings (defaults to one more than the number of J rates)
    #[arg(long = "n-rings")]
    pub n_rings: Option<usize>,
    /// Emitter-ring coupling
    #[arg(long)]
    pub g: Option<f64>,
    /// Ring-ring couplings J12,J23,...
    #[arg(long = "j", value_delimiter = ',', allow_hyphen_values = true)]
    pub j_rates: Option<Vec<f64>>,
    /// Last ring to waveguide decay rate
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Ring detunings from the emitter, one per ring
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma0: Option<f64>,
    #[arg(long = "gamma-c")]
    pub gamma_c: Option<f64>,
    /// Clockwise/counterclockwise coupling per ring
    #[arg(long, value_delimiter = ',')]
    pub backscatter: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n_rings: Option<usize>,
    g: Option<f64>,
    j_rates: Option<Vec<f64>>,
    kappa: Option<f64>,
    deltas: Option<Vec<f64>>,
    gamma0: Option<f64>,
    gamma_c: Option<f64>,
    backscatter: Option<Vec<f64>>,
}

pub fn load_config_file(path: &Path) -> CliResult<NodeConfig> {
    NodeArgs {
        config: Some(path.to_path_buf()),
        ..NodeArgs::default()
    }
    .resolve()
}

impl NodeArgs {
    pub fn resolve(&self) -> CliResult<NodeConfig> {
        let file = match &self.config {
            Some(path) => serde_json::from_str::<ConfigFile>(&read_file(path)?)
                .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?,
            None => ConfigFile::default(),
        };
        let j_rates = self.j_rates.clone().or(file.j_rates).unwrap_or_default();
        let n_rings = self.n_rings.or(file.n_rings).unwrap_or(j_rates.len() + 1);
        let kappa = self
            .kappa
            .or(file.kappa)
            .ok_or_else(|| CliError::Usage("kappa is required (--kappa or the config file)".into()))?;
        let per_ring = |v: Option<Vec<f64>>| v.filter(|v| !v.is_empty()).unwrap_or_else(|| vec![0.0; n_rings]);
        let config = NodeConfig {
            n_rings,
            g: self.g.or(file.g).unwrap_or(1.0),
            j_rates,
            kappa,
            deltas: per_ring(self.deltas.clone().or(file.deltas)),
            gamma0: self.gamma0.or(file.gamma0).unwrap_or(0.0),
            gamma_c: self.gamma_c.or(file.gamma_c).unwrap_or(0.0),
            backscatter: per_ring(self.backscatter.clone().or(file.backscatter)),
        };
        config.validate()?;
        Ok(config)
    }
}
