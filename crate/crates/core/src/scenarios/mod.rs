//! The experiment replications driven by the command line tool: learning
//! a skill, reproducing it, teaching with a simulated hand and null-space
//! compliance under elbow pushes.

pub mod comply;
pub mod config;
pub mod controllers;
pub mod export;
pub mod learn;
pub mod metrics;
pub mod reproduce;
pub mod run;
pub mod shapes;
pub mod teach;

pub use config::{ScenarioConfig, ScenarioKind};
pub use export::{export_plots, Table};
pub use metrics::{Check, MetricsReport};
pub use run::{run_scenario, run_to_dir, RunOutput};
