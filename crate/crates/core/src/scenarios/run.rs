//! Running a configured scenario and writing its outputs.

use std::fs;
use std::path::Path;

use super::comply::run_comply;
use super::config::{ScenarioConfig, ScenarioKind};
use super::export::{write_tables, Table};
use super::learn::run_learn;
use super::metrics::MetricsReport;
use super::reproduce::run_reproduce;
use super::teach::run_teach;
use crate::error::Result;

pub const METRICS_FILE: &str = "metrics.json";
pub const TRACE_DIR: &str = "trace";
pub const CONFIG_FILE: &str = "config.toml";

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub tables: Vec<Table>,
    /// Extra text files (name, contents), e.g. the learned model.
    pub artifacts: Vec<(String, String)>,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `metrics.json`, the artifacts and `trace/*.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(METRICS_FILE), self.report.to_json())?;
        for (name, text) in &self.artifacts {
            fs::write(dir.join(name), text)?;
        }
        write_tables(&dir.join(TRACE_DIR), &self.tables)
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput> {
    match config.kind {
        ScenarioKind::Learn => run_learn(config),
        ScenarioKind::Reproduce => run_reproduce(config),
        ScenarioKind::Teach => run_teach(config),
        ScenarioKind::Comply => run_comply(config),
    }
}

/// Runs the scenario and writes its outputs plus a copy of the effective
/// configuration into `dir`.
pub fn run_to_dir(config: &ScenarioConfig, dir: &Path) -> Result<RunOutput> {
    let out = run_scenario(config)?;
    out.write(dir)?;
    fs::write(dir.join(CONFIG_FILE), config.to_toml_string()?)?;
    Ok(out)
}
