//! Single-user link-adaptation simulator and agent library.
//!
//! Selects the modulation and coding scheme (MCS) per TTI over a fading
//! channel with stale sounding-based measurements, using one of three
//! agents: an online-trained ACK-probability network that maximizes
//! expected throughput, a Q-learning regression baseline, and classical
//! OLLA. The engine runs paired episodes (shared channel and outcome
//! streams per seed) so agents can be compared like-for-like, and the
//! sweep layer reproduces speed x rank gain grids into CSV.

pub mod agent;
pub mod buffer;
pub mod channel;
pub mod config;
pub mod engine;
pub mod mcs;
pub mod neural;
pub mod olla;
pub mod report;
pub mod rng;

pub use agent::{Agent, AgentConfig, AgentKind};
pub use buffer::{Sample, SampleBuffer};
pub use channel::{ChannelConfig, ChannelMode, ChannelState, Measurement};
pub use config::{parse_config, render_config, ConfigError, SimConfig};
pub use engine::{
    compare, run_episode, sweep, CompareReport, EpisodeMetrics, ScenarioConfig, SweepConfig,
    SweepReport,
};
pub use mcs::{CqiTable, McsTable};
pub use neural::{ActivationSpec, FeatureVector, LossKind, MlpModel, Scaler};
pub use olla::{OllaConfig, OllaState};
