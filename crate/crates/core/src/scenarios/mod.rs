//! Experiment configuration, the simulation world and the CLI commands.

pub mod commands;
mod config;
pub mod oracle;
pub mod output;
pub mod report;
mod runner;
mod world;

pub use config::{MixSpec, Preset, ScenarioConfig, SensitivityGrid};
pub use world::{InvariantCounters, MetricRow, World, WorldOptions, SYSTEM};
pub use runner::{initial_models, networks, test_run, train_run, TestOutput, TrainOutput, TrainingRow};
