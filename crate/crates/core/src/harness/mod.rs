//! Wire protocol, scripted agents and evaluation.

pub mod agents;
pub mod eval;
pub mod play;
pub mod protocol;
pub mod server;
