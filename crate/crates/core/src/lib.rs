//! Unsupervised vacuum-leak detection for sputter stations.

pub mod baseline;
pub mod clustering;
pub mod cycle_model;
pub mod distances;
pub mod detector;
pub mod divergence;
pub mod features;
pub mod orchestrator;
pub mod reduction;
pub mod simulator;
pub mod time;
