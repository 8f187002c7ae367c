//! Simulation core for PUF-based entanglement authentication.

pub mod hepuf;
pub mod pair;
pub mod puf;
pub mod quantum;
pub mod protocol;
pub mod transcript;
pub mod adversary;
pub mod analysis;
