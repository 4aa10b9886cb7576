//! Closed-loop difficulty tuning for a configurable Flappy Bird game.
//!
//! The crate pairs a deterministic fixed-timestep simulator with pluggable
//! playtest policies and a pluggable designer (scripted controller or an
//! OpenAI-compatible LLM endpoint). Each iteration the player runs a batch of
//! episodes on the current configuration, the episodes are condensed into
//! text metrics and/or composite image strips, and the designer edits the
//! pipe parameters toward a target score. Trials, re-evaluation runs, and
//! IQM/bootstrap statistics mirror that protocol end to end.

pub mod agents;
pub mod config;
pub mod designer;
pub mod rng;
pub mod runner;
pub mod sim;
pub mod stats;
pub mod traces;

pub use config::{
    broken_config, default_config, diff_configs, enforce_designer_constraints, parse_config,
    serialize_config, validate_config, ConfigError, FieldChange, GameConfig, Scenario,
    ValidationReport,
};
pub use sim::{Action, GameState, Observation, Pipe, TerminationReason};
pub use traces::{EpisodeTrace, FrameBuffer};
