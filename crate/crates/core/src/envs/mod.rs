//! The six bundled problem families.

pub mod bandit;
pub mod gridworld;
pub mod optimization;
pub mod parking;
pub mod poem;
pub mod reco;
