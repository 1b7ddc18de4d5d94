//! Multi-UAV image-acquisition and emergency-uplink simulator with a
//! multi-head DQN agent and hierarchical dynamic reward weighting.

pub mod config;
pub mod env;
pub mod error;
pub mod nn;
pub mod agent;
pub mod api;
pub mod rng;
pub mod weighting;
pub mod harness;

pub use config::Config;
pub use error::{Error, Result};
