//! TOML configuration file. Every key is optional; command-line flags take
//! precedence over file values, which take precedence over built-in defaults.

use std::path::Path;

use eivdc::dc::PartitionMode;
use eivdc::experiments::{MethodSpec, Spec};
use eivdc::{DgpConfig, Method, Schema};
use serde::Deserialize;

use crate::args::SchemaArgs;
use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub schema: SchemaFile,
    /// Overrides applied field by field to the design of the command.
    pub dgp: Option<toml::Table>,
    #[serde(default)]
    pub simulate: SimulateFile,
    #[serde(default)]
    pub estimate: EstimateFile,
    #[serde(default)]
    pub mc: McFile,
    #[serde(default)]
    pub window: WindowFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    pub firm: Option<String>,
    pub year: Option<String>,
    pub y: Option<String>,
    pub x: Option<String>,
    pub z: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub first_year: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    pub method: Option<Method>,
    pub blocks_per_year: Option<usize>,
    pub fe: Option<bool>,
    pub te: Option<bool>,
    pub alpha: Option<f64>,
    pub bootstrap_draws: Option<usize>,
    pub partition_mode: Option<PartitionMode>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McFile {
    pub reps: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub specs: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub bootstrap_draws: Option<usize>,
    pub partition_mode: Option<PartitionMode>,
    pub paper_scale: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowFile {
    pub start_year: Option<i64>,
    pub first_end: Option<i64>,
    pub methods: Option<Vec<String>>,
    pub fe: Option<bool>,
    pub te: Option<bool>,
    pub alpha: Option<f64>,
    pub bootstrap_draws: Option<usize>,
    pub partition_mode: Option<PartitionMode>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// `base` with the `[dgp]` table laid over it.
    pub fn dgp(&self, base: DgpConfig) -> Result<DgpConfig, CliError> {
        let Some(over) = &self.dgp else {
            return Ok(base);
        };
        let mut table = toml::Table::try_from(&base)
            .map_err(|e| CliError::Usage(format!("config [dgp]: {e}")))?;
        for (k, v) in over {
            table.insert(k.clone(), v.clone());
        }
        table
            .try_into()
            .map_err(|e| CliError::Usage(format!("config [dgp]: {e}")))
    }

    /// Column mapping from flags, then the `[schema]` table, then defaults.
    pub fn schema(&self, flags: &SchemaArgs) -> Schema {
        let d = Schema::default();
        let s = &self.schema;
        let z = if flags.no_controls {
            Vec::new()
        } else if !flags.z_col.is_empty() {
            flags.z_col.clone()
        } else {
            s.z.clone().unwrap_or(d.z)
        };
        Schema {
            firm: flags.firm_col.clone().or(s.firm.clone()).unwrap_or(d.firm),
            year: flags.year_col.clone().or(s.year.clone()).unwrap_or(d.year),
            y: flags.y_col.clone().or(s.y.clone()).unwrap_or(d.y),
            x: flags.x_col.clone().or(s.x.clone()).unwrap_or(d.x),
            z,
        }
    }
}

pub fn parse_methods(items: &[String]) -> Result<Vec<MethodSpec>, CliError> {
    items
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|e: eivdc::Error| CliError::Usage(e.to_string()))
        })
        .collect()
}

pub fn parse_specs(items: &[String]) -> Result<Vec<Spec>, CliError> {
    items
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|e: eivdc::Error| CliError::Usage(e.to_string()))
        })
        .collect()
}
