//! Reward computation for terminology-aware machine translation RL.

pub mod align;
pub mod config;
pub mod grpo;
pub mod keys;
pub mod metrics;
pub mod policy;
pub mod reward;
pub mod text;
